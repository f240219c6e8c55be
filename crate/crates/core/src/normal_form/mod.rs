//! Homological equation, Lie transforms, the order-2 step and the partial
//! normal form.

mod homological;
mod lie;
mod order2;
mod partial;
mod transform;

pub use homological::{
    solve_homological, term_divisor, DivisorPolicy, GeneratorSolveResult, ResonanceThresholds,
};
pub use lie::{lie_transform, LieOptions, LieResult};
pub use order2::{order2_step, Order2Output};
pub use partial::{
    high_mode_count, is_z_form, partial_normal_form, PartialConfig, PartialNormalFormOutput,
};
pub use transform::{compose_transform, compose_transform_eval, Direction, FlowOptions};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::FrequencyShifts;
use crate::norms::{vector_field_tame_norm, DomainParams, NormReport, ParameterGrid, TameOptions};
use crate::series::Series;

/// Settings shared by both normal-form stages.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalFormConfig {
    /// Sweeps of the order-2 step.
    pub sweeps: usize,
    /// Absolute divisor floor.
    pub divisor_floor: f64,
    pub lie: LieOptions,
    /// After each transform, coefficients below this fraction of the largest
    /// perturbation coefficient are dropped and their mass is logged.
    pub prune_relative: f64,
    /// Domain at which the logged norms are evaluated.
    pub norm_domain: DomainParams,
    pub tame: TameOptions,
}

impl Default for NormalFormConfig {
    fn default() -> Self {
        NormalFormConfig {
            sweeps: 3,
            divisor_floor: 1e-12,
            lie: LieOptions {
                max_iter: 200,
                ..LieOptions::default()
            },
            prune_relative: 1e-10,
            norm_domain: DomainParams {
                s: 0.5,
                r: 0.1,
                p: 3,
                dbase: 2,
            },
            tame: TameOptions::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Order2,
    Partial,
}

/// One homological solve followed by a Lie transform.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    /// Sweep index for the order-2 stage, order `h` for the partial stage.
    pub index: u32,
    pub targeted_terms: usize,
    pub targeted_mass: f64,
    pub solved_terms: usize,
    pub unresolved_terms: usize,
    pub min_divisor: Option<f64>,
    pub max_divisor: Option<f64>,
    pub homological_residual: f64,
    pub generator_terms: usize,
    pub generator_norm: f64,
    pub lie_iterations: usize,
    pub dropped_mass: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalFormLog {
    pub stage: Stage,
    pub frequency_shifts: Option<FrequencyShifts>,
    /// Norm of the part of the Hamiltonian beyond `N` before the stage.
    pub norms_before: NormReport,
    /// Norm of the remainder after the stage.
    pub norms_after: NormReport,
    /// `Σ |||X_F|||^T` over the generators: a bound on the displacement of
    /// the composed transformation.
    pub transform_displacement: f64,
    pub dropped_mass: f64,
    /// ℓ¹ mass removed by coefficient pruning.
    pub pruned_mass: f64,
    pub steps: Vec<StepRecord>,
    /// ℓ¹ mass of the targeted terms still present at the end.
    pub residual_mass: f64,
    /// Largest relative homological residual over all steps.
    pub max_homological_residual: f64,
}

pub(crate) fn tame_upper(s: &Series, cfg: &NormalFormConfig) -> Result<NormReport> {
    if s.is_empty() {
        return Ok(NormReport::zero());
    }
    vector_field_tame_norm(s, &cfg.norm_domain, &ParameterGrid::fixed(), &cfg.tame)
}

/// Splits off the terms with `|c| < floor`, returning the kept series and the
/// removed mass.
pub(crate) fn prune(s: Series, floor: f64) -> (Series, f64) {
    if floor <= 0.0 {
        return (s, 0.0);
    }
    let (kept, gone) = s.partition(|_, c| c.norm() >= floor);
    (kept, gone.l1_mass())
}

pub(crate) fn max_coefficient(s: &Series) -> f64 {
    s.iter().fold(0.0, |m, (_, c)| m.max(c.norm()))
}

/// Coefficients of `y_i` and `q_j q̄_j` in `h`: the frequencies of its
/// quadratic normal part.
pub fn read_frequencies(h: &Series) -> (Vec<f64>, Vec<f64>) {
    use crate::series::Monomial;
    let n = h.n();
    let omega = (0..n).map(|i| h.get(&Monomial::y(n, i)).re).collect();
    let big = (0..h.table().len() as u32)
        .map(|s| h.get(&Monomial::action(n, s)).re)
        .collect();
    (omega, big)
}
