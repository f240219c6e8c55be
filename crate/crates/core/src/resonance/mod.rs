//! Small divisors, `(η̃, N, M)`-non-resonance certification and Monte-Carlo
//! estimates of the resonant parameter set.

mod derivative;
mod enumerate;
mod measure;

use serde::{Deserialize, Serialize};

pub use derivative::{derivative_bounds_check, DerivativeCase, DerivativeReport};
pub use enumerate::{enumerate_queries, for_each_query, QuerySet};
pub use measure::{fit_power_law, measure_estimate, wilson_interval, MeasureRow, MeasureTable};

use crate::error::{config_err, Error, Result};
use crate::model::{FrequencyMap, SiteLattice};

/// Split of `l̂` (the high-site part) into the four disjoint classes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum QueryClass {
    /// `l̂ = 0`.
    L0,
    /// `l̂ = ±e_j`.
    L1,
    /// `l̂ = ±(e_i + e_j)`, including `i = j`.
    L2Plus,
    /// `l̂ = e_i − e_j`, `i ≠ j`.
    L2Minus,
}

impl QueryClass {
    /// Class of a sparse high-site vector, `None` if `|l̂| > 2`.
    pub fn of(l_high: &[(u32, i32)]) -> Option<Self> {
        let size: i32 = l_high.iter().map(|&(_, c)| c.abs()).sum();
        match size {
            0 => Some(QueryClass::L0),
            1 => Some(QueryClass::L1),
            2 => {
                let sum: i32 = l_high.iter().map(|&(_, c)| c).sum();
                if sum == 0 {
                    Some(QueryClass::L2Minus)
                } else {
                    Some(QueryClass::L2Plus)
                }
            }
            _ => None,
        }
    }
}

/// One divisor `⟨k, ω⟩ + ⟨l̃, Ω̃⟩ + ⟨l̂, Ω̂⟩`. Site vectors are sparse over
/// normal slots, sorted by slot, with nonzero entries.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ResonanceQuery {
    pub k: Vec<i32>,
    pub l_low: Vec<(u32, i32)>,
    pub l_high: Vec<(u32, i32)>,
    pub class: QueryClass,
}

impl ResonanceQuery {
    /// Builds a query, checking the class and the low/high split.
    pub fn new(
        k: Vec<i32>,
        l_low: Vec<(u32, i32)>,
        l_high: Vec<(u32, i32)>,
        lattice: &SiteLattice,
    ) -> Result<Self> {
        for &(s, c) in l_low.iter().chain(&l_high) {
            if s as usize >= lattice.normal.len() || c == 0 {
                return Err(Error::InvalidTerm(format!("bad site entry ({s}, {c})")));
            }
        }
        if l_low.iter().any(|&(s, _)| !lattice.is_low[s as usize])
            || l_high.iter().any(|&(s, _)| lattice.is_low[s as usize])
        {
            return Err(Error::InvalidTerm(
                "site on the wrong side of the low/high split".into(),
            ));
        }
        let class =
            QueryClass::of(&l_high).ok_or_else(|| Error::InvalidTerm("|l̂| exceeds 2".into()))?;
        let mut l_low = l_low;
        let mut l_high = l_high;
        l_low.sort_unstable();
        l_high.sort_unstable();
        let q = ResonanceQuery {
            k,
            l_low,
            l_high,
            class,
        };
        if q.k_abs() + q.l_low_abs() + q.l_high_abs() == 0 {
            return Err(Error::InvalidTerm("all-zero query".into()));
        }
        Ok(q)
    }

    pub fn k_abs(&self) -> u32 {
        self.k.iter().map(|k| k.unsigned_abs()).sum()
    }

    pub fn l_low_abs(&self) -> u32 {
        self.l_low.iter().map(|(_, c)| c.unsigned_abs()).sum()
    }

    pub fn l_high_abs(&self) -> u32 {
        self.l_high.iter().map(|(_, c)| c.unsigned_abs()).sum()
    }
}

/// Non-resonance parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResonanceConfig {
    /// `η̃ ∈ (0, 1)`.
    pub eta_tilde: f64,
    /// Normal-form order parameter `M`.
    pub m_order: u32,
    /// Diophantine exponent; must exceed `2n + 5`.
    pub tau: f64,
    /// Cutoff on `|k|`.
    pub k_max: u32,
}

impl Default for ResonanceConfig {
    fn default() -> Self {
        ResonanceConfig {
            eta_tilde: 0.1,
            m_order: 2,
            tau: 10.0,
            k_max: 6,
        }
    }
}

impl ResonanceConfig {
    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.eta_tilde > 0.0 && self.eta_tilde < 1.0) {
            return Err(config_err("resonance.eta_tilde", "must lie in (0, 1)"));
        }
        check_tau(self.tau, n)
    }
}

fn check_tau(tau: f64, n: usize) -> Result<()> {
    if !(tau > (2 * n + 5) as f64) {
        return Err(config_err(
            "resonance.tau",
            format!("must exceed 2n + 5 = {} for n = {n}", 2 * n + 5),
        ));
    }
    Ok(())
}

/// `⟨k, ω⟩ + ⟨l̃, Ω̃⟩ + ⟨l̂, Ω̂⟩`; `big_omega` is indexed by normal slot.
pub fn divisor(q: &ResonanceQuery, omega: &[f64], big_omega: &[f64]) -> Result<f64> {
    if q.k.len() != omega.len() {
        return Err(Error::Dimension(format!(
            "query has {} angles, ω has {}",
            q.k.len(),
            omega.len()
        )));
    }
    let mut d: f64 = q.k.iter().zip(omega).map(|(&k, &w)| f64::from(k) * w).sum();
    for &(s, c) in q.l_low.iter().chain(&q.l_high) {
        let w = big_omega
            .get(s as usize)
            .ok_or_else(|| Error::Dimension(format!("no frequency for normal slot {s}")))?;
        d += f64::from(c) * w;
    }
    Ok(d)
}

/// `C(N, l̃) = N^{3(|l̃| + 4)²}`.
pub fn c_factor(n_cutoff: f64, l_low_abs: u32) -> f64 {
    let e = 3.0 * f64::from(l_low_abs + 4).powi(2);
    n_cutoff.powf(e)
}

/// `η̃ / (4^{3M} (|k| + 1)^τ C(N, l̃))`.
pub fn threshold(
    q: &ResonanceQuery,
    eta_tilde: f64,
    n_cutoff: f64,
    m_order: u32,
    tau: f64,
) -> Result<f64> {
    check_tau(tau, q.k.len())?;
    Ok(threshold_unchecked(
        q.k_abs(),
        q.l_low_abs(),
        eta_tilde,
        n_cutoff,
        m_order,
        tau,
    ))
}

pub(crate) fn threshold_unchecked(
    k_abs: u32,
    l_low_abs: u32,
    eta: f64,
    n_cutoff: f64,
    m_order: u32,
    tau: f64,
) -> f64 {
    eta / (4f64.powi(3 * m_order as i32)
        * f64::from(k_abs + 1).powf(tau)
        * c_factor(n_cutoff, l_low_abs))
}

/// A violated inequality.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub query: ResonanceQuery,
    pub divisor: f64,
    pub threshold: f64,
}

/// Outcome of checking every enumerated inequality at one parameter point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResonanceReport {
    pub xi: Vec<f64>,
    pub violations: Vec<Violation>,
    pub certified: bool,
    pub checked_count: u64,
    pub pruned_count: u64,
    /// Smallest `|divisor| / threshold` over the checked queries.
    pub min_ratio: f64,
    /// Largest threshold of any query with `|k| > k_max`; the part of the
    /// condition not checked.
    pub tail_threshold: f64,
}

/// Checks all `(η̃, N, M)` inequalities at `ξ`, with `N` the lattice's low
/// cutoff and frequencies from `freq` (including any shifts).
pub fn certify(
    xi: &[f64],
    lattice: &SiteLattice,
    freq: &FrequencyMap,
    cfg: &ResonanceConfig,
    param_box: [f64; 2],
) -> Result<ResonanceReport> {
    cfg.validate(lattice.n())?;
    let (omega, big) = freq.eval(xi)?;
    let n_cutoff = lattice.low_cutoff;
    let margin = freq.shifts.as_ref().map_or(0.0, |s| {
        s.d_omega
            .iter()
            .chain(&s.d_big_omega)
            .fold(0.0f64, |m, v| m.max(v.abs()))
    });
    let mut violations = Vec::new();
    let mut checked = 0u64;
    let mut min_ratio = f64::INFINITY;
    let pruned = for_each_query(lattice, cfg.m_order, cfg.k_max, param_box, margin, |q| {
        checked += 1;
        let d = divisor(q, &omega, &big).expect("dimensions checked");
        let t = threshold_unchecked(
            q.k_abs(),
            q.l_low_abs(),
            cfg.eta_tilde,
            n_cutoff,
            cfg.m_order,
            cfg.tau,
        );
        min_ratio = min_ratio.min(d.abs() / t);
        if d.abs() < t {
            violations.push(Violation {
                query: q.clone(),
                divisor: d,
                threshold: t,
            });
        }
    });
    Ok(ResonanceReport {
        xi: xi.to_vec(),
        certified: violations.is_empty(),
        violations,
        checked_count: checked,
        pruned_count: pruned,
        min_ratio,
        tail_threshold: threshold_unchecked(
            cfg.k_max + 1,
            0,
            cfg.eta_tilde,
            n_cutoff,
            cfg.m_order,
            cfg.tau,
        ),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_sites, ModelConfig};

    fn lattice() -> SiteLattice {
        build_sites(&ModelConfig {
            j_max: 2.0,
            low_cutoff: 1.0,
            ..ModelConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn threshold_constants() {
        let l = lattice();
        let q = ResonanceQuery::new(vec![1, 0], vec![], vec![], &l).unwrap();
        assert_eq!(c_factor(2.0, 0), 2f64.powi(48));
        let low = l.is_low.iter().position(|&b| b).unwrap() as u32;
        let q1 = ResonanceQuery::new(vec![0, 0], vec![(low, 1)], vec![], &l).unwrap();
        let t = threshold(&q1, 1.0, 2.0, 0, 10.0).unwrap();
        assert_eq!(t, 2f64.powi(-75));
        assert!(
            threshold(&q, 0.5, 2.0, 1, 10.0).unwrap()
                > threshold(
                    &ResonanceQuery::new(vec![2, 0], vec![], vec![], &l).unwrap(),
                    0.5,
                    2.0,
                    1,
                    10.0
                )
                .unwrap()
        );
        assert!(threshold(&q, 0.5, 2.0, 1, 9.0).is_err());
    }

    #[test]
    fn divisor_of_unit_angle() {
        let l = lattice();
        let q = ResonanceQuery::new(vec![1, 0], vec![], vec![], &l).unwrap();
        let big = vec![0.0; l.normal.len()];
        assert_eq!(divisor(&q, &[1.3, 2.0], &big).unwrap(), 1.3);
    }

    #[test]
    fn classes() {
        assert_eq!(QueryClass::of(&[]), Some(QueryClass::L0));
        assert_eq!(QueryClass::of(&[(3, -1)]), Some(QueryClass::L1));
        assert_eq!(QueryClass::of(&[(3, 2)]), Some(QueryClass::L2Plus));
        assert_eq!(
            QueryClass::of(&[(3, -1), (4, -1)]),
            Some(QueryClass::L2Plus)
        );
        assert_eq!(
            QueryClass::of(&[(3, 1), (4, -1)]),
            Some(QueryClass::L2Minus)
        );
        assert_eq!(QueryClass::of(&[(3, 3)]), None);
    }
}
