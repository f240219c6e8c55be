//! Empirical checks of the norm inequalities on concrete series.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{
    sample_domain_point, vector_field_tame_norm, weighted_phase_norm, DomainParams, ParameterGrid,
    TameOptions,
};
use crate::error::{config_err, Result};
use crate::series::{poisson_bracket, CompiledSeries, Series};

/// `|||X_{U,V}|||` on `D(s − σ, r − σ')` divided by
/// `max(1/σ, r/σ') |||X_U||| |||X_V|||` on `D(s, r, r)`; `None` when either
/// factor vanishes.
pub fn bracket_ratio(
    u: &Series,
    v: &Series,
    dp: &DomainParams,
    sigma: f64,
    sigma_r: f64,
    opts: &TameOptions,
) -> Result<Option<f64>> {
    if !(sigma > 0.0 && sigma < dp.s && sigma_r > 0.0 && sigma_r < dp.r) {
        return Err(config_err(
            "norms.sigma",
            "shrinkage must lie strictly inside the domain",
        ));
    }
    let inner = dp.shrink(sigma, sigma_r)?;
    let grid = ParameterGrid::fixed();
    let nu = vector_field_tame_norm(u, dp, &grid, opts)?.value_upper;
    let nv = vector_field_tame_norm(v, dp, &grid, opts)?.value_upper;
    if nu == 0.0 || nv == 0.0 {
        return Ok(None);
    }
    let b = poisson_bracket(u, v)?.value;
    let nb = vector_field_tame_norm(&b, &inner, &grid, opts)?.value_upper;
    let factor = (1.0 / sigma).max(dp.r / sigma_r);
    Ok(Some(nb / (factor * nu * nv)))
}

/// Bracket ratios over a set of pairs at one shrinkage setting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BracketConstantReport {
    pub sigma: f64,
    pub sigma_r: f64,
    pub ratios: Vec<f64>,
    /// Smallest constant that makes the inequality hold for every pair.
    pub c: f64,
    /// The same constant computed on each half of the pairs.
    pub c_halves: [f64; 2],
}

impl BracketConstantReport {
    pub fn new(sigma: f64, sigma_r: f64, ratios: Vec<f64>) -> Self {
        let max = |xs: &[f64]| xs.iter().copied().fold(0.0, f64::max);
        let mid = ratios.len() / 2;
        BracketConstantReport {
            sigma,
            sigma_r,
            c: max(&ratios),
            c_halves: [max(&ratios[..mid]), max(&ratios[mid..])],
            ratios,
        }
    }

    /// Relative gap between the two half-sample constants.
    pub fn half_spread(&self) -> f64 {
        let [a, b] = self.c_halves;
        (a - b).abs() / a.max(b).max(f64::MIN_POSITIVE)
    }
}

/// `sup_w ‖X_U(w)‖` in the weighted phase norm over sampled `w ∈ D(s, r, r)`,
/// compared with the tame bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderingReport {
    pub points: usize,
    pub sampled_sup: f64,
    pub tame_upper: f64,
    /// Points where the sampled value exceeds the bound.
    pub violations: usize,
}

/// Evaluates `X_U` at `points` random points of the domain scaled by `fill`.
pub fn phase_norm_ordering<R: Rng>(
    u: &Series,
    dp: &DomainParams,
    points: usize,
    fill: f64,
    opts: &TameOptions,
    rng: &mut R,
) -> Result<OrderingReport> {
    let bound = vector_field_tame_norm(u, dp, &ParameterGrid::fixed(), opts)?.value_upper;
    let cu = CompiledSeries::new(u);
    let mut sup = 0.0f64;
    let mut violations = 0;
    for _ in 0..points {
        let w = sample_domain_point(u.table(), dp, fill, rng);
        let v = weighted_phase_norm(&cu.vector_field(&w)?, u.table(), dp)?;
        sup = sup.max(v);
        if v > bound * (1.0 + 1e-12) {
            violations += 1;
        }
    }
    Ok(OrderingReport {
        points,
        sampled_sup: sup,
        tame_upper: bound,
        violations,
    })
}
