use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{divisor, ResonanceQuery};
use crate::error::{config_err, Result};
use crate::model::SiteLattice;

/// Which parameter direction carries the transversality of a divisor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DerivativeCase {
    /// `k ≠ 0`: differentiate along `ξ_{j_i}` with `|k_i|` maximal.
    Angle,
    /// `k = 0`, `l̃ ≠ 0`: differentiate along a low site with `|l̃_j|`
    /// maximal.
    LowSite,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivativeEntry {
    pub query: ResonanceQuery,
    pub case: DerivativeCase,
    /// Index of the differentiated parameter among the retained sites.
    pub direction: usize,
    pub derivative: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivativeReport {
    pub checked: usize,
    /// Queries with `k = 0` and `l̃ = 0`, which have no transversal
    /// direction in this argument.
    pub skipped: usize,
    pub min_angle_case: Option<f64>,
    pub min_low_site_case: Option<f64>,
    /// Entries with `|∂D| < 1/4 − tolerance`.
    pub failures: Vec<DerivativeEntry>,
    pub passed: bool,
}

/// Central differences of each divisor along its transversal direction,
/// checked against `|∂D| ≥ 1/4`. `freq` maps a parameter vector to
/// `(ω, Ω)`, possibly including normal-form corrections.
pub fn derivative_bounds_check(
    queries: &[ResonanceQuery],
    lattice: &SiteLattice,
    freq: &dyn Fn(&[f64]) -> Result<(Vec<f64>, Vec<f64>)>,
    xi: &[f64],
    step: f64,
    tolerance: f64,
) -> Result<DerivativeReport> {
    if !(step > 0.0) {
        return Err(config_err("resonance.fd_step", "must be positive"));
    }
    type Pair = ((Vec<f64>, Vec<f64>), (Vec<f64>, Vec<f64>));
    let mut cache: BTreeMap<usize, Pair> = BTreeMap::new();
    let mut report = DerivativeReport {
        checked: 0,
        skipped: 0,
        min_angle_case: None,
        min_low_site_case: None,
        failures: Vec::new(),
        passed: true,
    };
    for q in queries {
        let (case, direction) = if q.k_abs() > 0 {
            let (i, _) =
                q.k.iter()
                    .enumerate()
                    .max_by_key(|(i, k)| (k.unsigned_abs(), std::cmp::Reverse(*i)))
                    .expect("k nonzero");
            (DerivativeCase::Angle, lattice.tangential_index[i])
        } else if let Some(&(s, _)) = q
            .l_low
            .iter()
            .max_by_key(|(s, c)| (c.unsigned_abs(), std::cmp::Reverse(*s)))
        {
            (DerivativeCase::LowSite, lattice.normal_index[s as usize])
        } else {
            report.skipped += 1;
            continue;
        };
        if !cache.contains_key(&direction) {
            let mut plus = xi.to_vec();
            let mut minus = xi.to_vec();
            plus[direction] += step;
            minus[direction] -= step;
            cache.insert(direction, (freq(&plus)?, freq(&minus)?));
        }
        let ((wp, op), (wm, om)) = &cache[&direction];
        let derivative = (divisor(q, wp, op)? - divisor(q, wm, om)?) / (2.0 * step);
        report.checked += 1;
        let slot = match case {
            DerivativeCase::Angle => &mut report.min_angle_case,
            DerivativeCase::LowSite => &mut report.min_low_site_case,
        };
        *slot = Some(slot.map_or(derivative.abs(), |m: f64| m.min(derivative.abs())));
        if derivative.abs() < 0.25 - tolerance {
            report.passed = false;
            report.failures.push(DerivativeEntry {
                query: q.clone(),
                case,
                direction,
                derivative,
            });
        }
    }
    Ok(report)
}
