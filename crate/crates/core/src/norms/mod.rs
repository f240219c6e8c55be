//! Weighted analytic norms, moduli, p-tame operator norms and the weighted
//! phase-space norm.

mod blocks;
mod checks;
mod tame;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use blocks::{analytic_x_norm, modulus, BlockEntry, BlockNorms};
pub use checks::{bracket_ratio, phase_norm_ordering, BracketConstantReport, OrderingReport};
pub use tame::{tame_operator_norm, vector_field_tame_norm, TameOptions};

use crate::error::{config_err, Error, Result};
use crate::series::{EvalPoint, Site, SiteTable, Tangent, C64};

/// Domain `D(s, r, r)` and regularity indices.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainParams {
    /// Width of the complex strip in the angles.
    pub s: f64,
    /// Radius: `|y| < r²`, `‖z‖_p < r`.
    pub r: f64,
    /// High regularity index.
    pub p: u32,
    /// Base regularity index of the `d`-norm.
    pub dbase: u32,
}

impl DomainParams {
    pub fn new(s: f64, r: f64, p: u32, dbase: u32) -> Result<Self> {
        let dp = DomainParams { s, r, p, dbase };
        dp.validate()?;
        Ok(dp)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.s > 0.0 && self.s.is_finite()) {
            return Err(config_err("norms.s", "must be positive"));
        }
        if !(self.r > 0.0 && self.r <= 1.0) {
            return Err(config_err("norms.r", "must lie in (0, 1]"));
        }
        if self.dbase < 1 {
            return Err(config_err("norms.dbase", "must be at least 1"));
        }
        if self.p <= self.dbase {
            return Err(config_err("norms.p", "must exceed dbase"));
        }
        Ok(())
    }

    /// `D(s − σ, r − σ', r − σ')`.
    pub fn shrink(&self, sigma: f64, sigma_r: f64) -> Result<Self> {
        DomainParams::new(self.s - sigma, self.r - sigma_r, self.p, self.dbase)
    }

    pub fn with_r(&self, r: f64) -> Self {
        DomainParams { r, ..*self }
    }
}

/// Finite stand-in for the parameter set: sample points and a central
/// difference step for `∂_ξ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParameterGrid {
    /// Sites indexing the components of every sample.
    pub sites: Vec<Site>,
    pub samples: Vec<Vec<f64>>,
    pub step: f64,
}

impl ParameterGrid {
    pub fn new(
        sites: Vec<Site>,
        samples: Vec<Vec<f64>>,
        step: f64,
        bounds: (f64, f64),
    ) -> Result<Self> {
        if !(step > 0.0) {
            return Err(config_err("norms.fd_step", "must be positive"));
        }
        if samples.is_empty() {
            return Err(Error::Empty("parameter grid has no samples".into()));
        }
        for s in &samples {
            if s.len() != sites.len() {
                return Err(Error::Dimension(format!(
                    "grid sample of length {} for {} sites",
                    s.len(),
                    sites.len()
                )));
            }
            if s.iter().any(|&v| v < bounds.0 || v > bounds.1) {
                return Err(config_err("norms.grid", "sample outside the parameter box"));
            }
        }
        Ok(ParameterGrid {
            sites,
            samples,
            step,
        })
    }

    /// A single parameter point with no derivative directions; used for
    /// series whose coefficients are fixed numbers.
    pub fn fixed() -> Self {
        ParameterGrid {
            sites: Vec::new(),
            samples: vec![Vec::new()],
            step: 1e-6,
        }
    }

    /// One sample with derivative directions over all listed sites.
    pub fn single(sites: Vec<Site>, xi: Vec<f64>, step: f64) -> Self {
        ParameterGrid {
            sites,
            samples: vec![xi],
            step,
        }
    }
}

/// Contribution of one homogeneous z-degree to a vector-field norm.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DegreeContribution {
    pub h: u32,
    /// `|||W_y|||` before the `r^h` weight (upper bound).
    pub y_norm: f64,
    /// `|||W_x|||` before the `r^h` weight (upper bound).
    pub x_norm: f64,
    /// p-tame operator norm of `W_z` (upper bound).
    pub z_tame: f64,
    /// d-operator norm of `W_z` (upper bound).
    pub z_d: f64,
    /// Sampled lower bound of the p-tame operator norm.
    pub z_tame_lower: f64,
    /// Weighted contribution to `|||X_W|||^T` (upper bound).
    pub weighted_upper: f64,
    /// Weighted contribution, sampled lower bound.
    pub weighted_lower: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub value_upper: f64,
    pub value_lower: f64,
    pub breakdown: Vec<DegreeContribution>,
}

impl NormReport {
    pub fn zero() -> Self {
        NormReport::default()
    }
}

/// Weighted ℓ² norm `(Σ |v_j|² ⟨j⟩^{2a})^{1/2}`.
pub fn weighted_l2(v: &[C64], weights: &[f64], a: f64) -> f64 {
    v.iter()
        .zip(weights)
        .map(|(c, w)| c.norm_sqr() * w.powf(2.0 * a))
        .sum::<f64>()
        .sqrt()
}

/// A normal-direction vector `z = (q, q̄)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ZVec {
    pub q: Vec<C64>,
    pub qbar: Vec<C64>,
}

impl ZVec {
    /// `‖z‖_a = ‖q‖_a + ‖q̄‖_a`.
    pub fn norm(&self, weights: &[f64], a: f64) -> f64 {
        weighted_l2(&self.q, weights, a) + weighted_l2(&self.qbar, weights, a)
    }
}

/// Mixed product norm `(1/h) Σ_i ‖z^{(i)}‖_p Π_{m≠i} ‖z^{(m)}‖_d`.
pub fn znorm_mixed(zs: &[ZVec], weights: &[f64], p: u32, dbase: u32) -> Result<f64> {
    if zs.is_empty() {
        return Err(Error::Empty("mixed norm of an empty tuple".into()));
    }
    let np: Vec<f64> = zs.iter().map(|z| z.norm(weights, p as f64)).collect();
    let nd: Vec<f64> = zs.iter().map(|z| z.norm(weights, dbase as f64)).collect();
    let h = zs.len();
    let mut total = 0.0;
    for i in 0..h {
        let mut prod = np[i];
        for (m, v) in nd.iter().enumerate() {
            if m != i {
                prod *= v;
            }
        }
        total += prod;
    }
    Ok(total / h as f64)
}

/// `‖x‖ + ‖y‖/r² + ‖z‖_p/r` with sup norms on `x`, `y`.
pub fn weighted_phase_norm(v: &Tangent, table: &SiteTable, dp: &DomainParams) -> Result<f64> {
    if v.dx.len() != table.n() || v.dq.len() != table.len() {
        return Err(Error::Dimension(
            "tangent vector does not match the site table".into(),
        ));
    }
    let sup = |xs: &[C64]| xs.iter().fold(0.0f64, |m, c| m.max(c.norm()));
    let w = table.weights();
    let z = ZVec {
        q: v.dq.clone(),
        qbar: v.dqbar.clone(),
    };
    Ok(sup(&v.dx) + sup(&v.dy) / (dp.r * dp.r) + z.norm(&w, dp.p as f64) / dp.r)
}

/// A random point of `D(s, r, r)` scaled by `fill ∈ (0, 1)`: `|Im x| < fill·s`,
/// `|y_i| < fill·r²`, `‖z‖_p = fill·r` with independent `q`, `q̄`.
pub fn sample_domain_point<R: Rng>(
    table: &SiteTable,
    dp: &DomainParams,
    fill: f64,
    rng: &mut R,
) -> EvalPoint {
    let n = table.n();
    let sites = table.len();
    let w = table.weights();
    let x = (0..n)
        .map(|_| {
            C64::new(
                rng.gen_range(0.0..std::f64::consts::TAU),
                rng.gen_range(-1.0..1.0) * fill * dp.s,
            )
        })
        .collect();
    let y = (0..n)
        .map(|_| {
            C64::from_polar(
                rng.gen_range(0.0..1.0) * fill * dp.r * dp.r,
                rng.gen_range(0.0..std::f64::consts::TAU),
            )
        })
        .collect();
    let decay = rng.gen_range(0.0..(dp.p as f64 + 1.0));
    let mut draw = || {
        C64::from_polar(
            rng.gen_range(0.0..1.0),
            rng.gen_range(0.0..std::f64::consts::TAU),
        )
    };
    let mut q: Vec<C64> = (0..sites).map(|_| draw()).collect();
    let mut qbar: Vec<C64> = (0..sites).map(|_| draw()).collect();
    for (s, wt) in w.iter().enumerate() {
        let f = wt.powf(-decay);
        q[s] *= f;
        qbar[s] *= f;
    }
    let z = ZVec { q, qbar };
    let norm = z.norm(&w, dp.p as f64);
    let scale = if norm > 0.0 { fill * dp.r / norm } else { 0.0 };
    EvalPoint {
        x,
        y,
        q: z.q.iter().map(|c| c * scale).collect(),
        qbar: z.qbar.iter().map(|c| c * scale).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(sites: usize, j: usize) -> ZVec {
        let mut q = vec![C64::new(0.0, 0.0); sites];
        q[j] = C64::new(1.0, 0.0);
        ZVec {
            q,
            qbar: vec![C64::new(0.0, 0.0); sites],
        }
    }

    #[test]
    fn mixed_norm_of_one_vector_is_p_norm() {
        let w = vec![1.0, 2.0, 3.0];
        let z = ZVec {
            q: vec![C64::new(0.3, 0.1), C64::new(0.0, 0.2), C64::new(0.1, 0.0)],
            qbar: vec![C64::new(0.1, 0.0); 3],
        };
        let m = znorm_mixed(&[z.clone()], &w, 4, 2).unwrap();
        assert!((m - z.norm(&w, 4.0)).abs() < 1e-15);
    }

    #[test]
    fn mixed_norm_of_equal_units() {
        let w = vec![1.0, 2.0, 3.0];
        let zs = vec![unit(3, 2); 3];
        let m = znorm_mixed(&zs, &w, 4, 2).unwrap();
        assert!((m - 3f64.powi(4) * 3f64.powi(2 * 2)).abs() < 1e-9);
    }

    #[test]
    fn mixed_norm_rejects_empty() {
        assert!(znorm_mixed(&[], &[1.0], 3, 1).is_err());
    }

    #[test]
    fn domain_validation() {
        assert!(DomainParams::new(0.5, 0.5, 3, 2).is_ok());
        assert!(DomainParams::new(0.5, 1.5, 3, 2).is_err());
        assert!(DomainParams::new(0.5, 0.5, 2, 2).is_err());
        assert!(DomainParams::new(-1.0, 0.5, 3, 2).is_err());
    }
}
