use serde::{Deserialize, Serialize};

use super::{
    lie_transform, max_coefficient, read_frequencies, solve_homological, tame_upper, DivisorPolicy,
    LieOptions, NormalFormConfig, NormalFormLog, Order2Output, ResonanceThresholds, Stage,
    StepRecord,
};
use crate::error::{config_err, Error, Result};
use crate::model::SiteLattice;
use crate::norms::NormReport;
use crate::series::{Monomial, Prune, Series, C64};

/// Parameters of the partial normal form of order `M + 2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartialConfig {
    pub m_order: u32,
    /// Radius at which the logged norms are evaluated.
    pub rho: f64,
    pub eta_tilde: f64,
    pub tau: f64,
    /// Terms of order above `M + 2` with coefficients below this fraction of
    /// the largest remainder coefficient are dropped; their mass is logged.
    pub prune_relative: f64,
}

impl Default for PartialConfig {
    fn default() -> Self {
        PartialConfig {
            m_order: 2,
            rho: 0.1,
            eta_tilde: 0.1,
            tau: 10.0,
            prune_relative: 1e-5,
        }
    }
}

/// `H̆ ∘ Φ = N̆ + Z + P + Q + unresolved`.
#[derive(Clone, Debug)]
pub struct PartialNormalFormOutput {
    pub n_breve: Series,
    /// Integrable part: `k = 0`, `β = γ`, at most one high mode pair, order
    /// between 4 and `M + 2`.
    pub z: Series,
    /// Order `≥ M + 3` with at most two high-mode factors.
    pub p: Series,
    /// At least three high-mode factors.
    pub q: Series,
    /// Order `≤ M + 2` terms that could not be removed because their divisor
    /// fell below threshold.
    pub unresolved: Series,
    pub generators: Vec<Series>,
    pub log: NormalFormLog,
    pub norm_z: NormReport,
    pub norm_p: NormReport,
    pub norm_q: NormReport,
}

impl PartialNormalFormOutput {
    pub fn total(&self) -> Result<Series> {
        self.n_breve
            .add(&self.z)?
            .add(&self.p)?
            .add(&self.q)?
            .add(&self.unresolved)
    }
}

/// `|μ| + |ν|`: total power of the high modes.
pub fn high_mode_count(m: &Monomial, is_low: &[bool]) -> u32 {
    m.beta
        .iter()
        .chain(m.gamma.iter())
        .filter(|(s, _)| !is_low[*s as usize])
        .map(|&(_, p)| u32::from(p))
        .sum()
}

/// `y^α q̃^β q̄̃^β q̂^μ q̄̂^μ` with `|μ| ≤ 1` and `4 ≤ order ≤ max_order`.
pub fn is_z_form(m: &Monomial, is_low: &[bool], max_order: u32) -> bool {
    let d = m.degree();
    m.is_normal() && high_mode_count(m, is_low) <= 2 && (4..=max_order).contains(&d)
}

/// Removes, order by order for `h = 3, …, M + 2`, every term of order `h`
/// with at most two high-mode factors that is not of integrable form.
/// Divisors are tested against the non-resonance thresholds.
pub fn partial_normal_form(
    order2: &Order2Output,
    lattice: &SiteLattice,
    pcfg: &PartialConfig,
    cfg: &NormalFormConfig,
) -> Result<PartialNormalFormOutput> {
    if !(pcfg.rho > 0.0) {
        return Err(config_err("normal_form.rho", "must be positive"));
    }
    let is_low = &lattice.is_low;
    if is_low.len() != order2.n_breve.table().len() {
        return Err(Error::Dimension(
            "lattice does not match the Hamiltonian".into(),
        ));
    }
    let cfg = NormalFormConfig {
        norm_domain: cfg.norm_domain.with_r(pcfg.rho),
        ..cfg.clone()
    };
    let max_order = pcfg.m_order + 2;
    let policy = DivisorPolicy {
        floor: cfg.divisor_floor,
        resonance: Some(ResonanceThresholds {
            eta_tilde: pcfg.eta_tilde,
            n_cutoff: lattice.low_cutoff,
            m_order: pcfg.m_order,
            tau: pcfg.tau,
            is_low: is_low.clone(),
        }),
    };
    let (omega, big) = read_frequencies(&order2.n_breve);
    let norms_before = tame_upper(&order2.r_breve, &cfg)?;
    let target_at = |h: &Series, order: u32| {
        h.filter(|m, _| {
            m.degree() == order
                && high_mode_count(m, is_low) <= 2
                && !is_z_form(m, is_low, max_order)
        })
    };
    let mut r = order2.r_breve.clone();
    let mut generators = Vec::new();
    let mut steps = Vec::new();
    let mut dropped = 0.0;
    let mut max_res = 0.0f64;
    let mut displacement = 0.0;
    let floor = pcfg.prune_relative * max_coefficient(&order2.r_breve);
    let mut pruned = 0.0;
    for order in 3..=max_order {
        let target = target_at(&r, order);
        if target.is_empty() {
            continue;
        }
        let solve = solve_homological(&target, &omega, &big, &policy)?;
        max_res = max_res.max(solve.residual);
        let mut step = StepRecord {
            index: order,
            targeted_terms: target.len(),
            targeted_mass: target.l1_mass(),
            solved_terms: solve.f.len(),
            unresolved_terms: solve.unresolved.len(),
            min_divisor: solve.min_divisor.is_finite().then_some(solve.min_divisor),
            max_divisor: (solve.max_divisor > 0.0).then_some(solve.max_divisor),
            homological_residual: solve.residual,
            generator_terms: solve.f.len(),
            generator_norm: 0.0,
            lie_iterations: 0,
            dropped_mass: 0.0,
        };
        if !solve.f.is_empty() {
            // The generator has order ≥ 3, so the series terminates.
            let h = order2.n_breve.add(&r)?;
            let opts = LieOptions {
                prune: Prune {
                    floor,
                    min_degree: max_order + 1,
                },
                ..cfg.lie.clone()
            };
            let lie = lie_transform(&h, &solve.f, &opts)?;
            step.generator_norm = tame_upper(&solve.f, &cfg)?.value_upper;
            step.lie_iterations = lie.iterations;
            step.dropped_mass = lie.dropped_mass;
            dropped += lie.dropped_mass;
            displacement += step.generator_norm;
            // Brackets with F raise the order, so a solved monomial of order
            // `order` keeps only R̂ + {N̆, F}^ = 0 up to rounding (the solve
            // residual above); clear it.
            let (small, kept) = lie.value.sub(&order2.n_breve)?.partition(|m, c| {
                (m.degree() > max_order && c.norm() < floor) || solve.f.get(m) != C64::new(0.0, 0.0)
            });
            let gone = small.filter(|m, _| m.degree() > max_order).l1_mass();
            pruned += gone;
            r = kept;
            generators.push(solve.f);
        }
        steps.push(step);
    }
    let (z, rest) = r.partition(|m, _| is_z_form(m, is_low, max_order));
    let (q, rest) = rest.partition(|m, _| high_mode_count(m, is_low) >= 3);
    let (p, unresolved) = rest.partition(|m, _| m.degree() > max_order);
    let residual_mass = (3..=max_order)
        .map(|o| target_at(&unresolved, o).l1_mass())
        .sum();
    let norm_z = tame_upper(&z, &cfg)?;
    let norm_p = tame_upper(&p, &cfg)?;
    let norm_q = tame_upper(&q, &cfg)?;
    let log = NormalFormLog {
        stage: Stage::Partial,
        frequency_shifts: None,
        norms_before,
        norms_after: norm_p.clone(),
        transform_displacement: displacement,
        dropped_mass: dropped,
        pruned_mass: pruned,
        steps,
        residual_mass,
        max_homological_residual: max_res,
    };
    Ok(PartialNormalFormOutput {
        n_breve: order2.n_breve.clone(),
        z,
        p,
        q,
        unresolved,
        generators,
        log,
        norm_z,
        norm_p,
        norm_q,
    })
}
