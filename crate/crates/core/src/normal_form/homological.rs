use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::resonance::threshold_unchecked;
use crate::series::{poisson_bracket, Monomial, Series, C64};

/// Non-resonance thresholds applied to the divisors of the homological
/// equation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResonanceThresholds {
    pub eta_tilde: f64,
    pub n_cutoff: f64,
    pub m_order: u32,
    pub tau: f64,
    /// Per normal slot: whether the site is a low mode.
    pub is_low: Vec<bool>,
}

/// When a divisor counts as too small to divide by.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DivisorPolicy {
    /// Absolute floor guarding against floating-point zero divisors.
    pub floor: f64,
    pub resonance: Option<ResonanceThresholds>,
}

impl Default for DivisorPolicy {
    fn default() -> Self {
        DivisorPolicy {
            floor: 1e-12,
            resonance: None,
        }
    }
}

impl DivisorPolicy {
    pub fn threshold(&self, m: &Monomial) -> f64 {
        let Some(r) = &self.resonance else {
            return self.floor;
        };
        let low: u32 = m
            .l_vector()
            .iter()
            .filter(|(s, _)| r.is_low[*s as usize])
            .map(|(_, c)| c.unsigned_abs())
            .sum();
        threshold_unchecked(
            m.fourier_order(),
            low,
            r.eta_tilde,
            r.n_cutoff,
            r.m_order,
            r.tau,
        )
        .max(self.floor)
    }
}

/// `⟨k, ω⟩ + Σ (β_j − γ_j) Ω_j`: the factor with `{F, N} = i·D·F` for a
/// single term `F`.
pub fn term_divisor(m: &Monomial, omega: &[f64], big_omega: &[f64]) -> f64 {
    let mut d: f64 = m.k.iter().zip(omega).map(|(&k, &w)| f64::from(k) * w).sum();
    for (s, c) in m.l_vector() {
        d += f64::from(c) * big_omega[s as usize];
    }
    d
}

#[derive(Clone, Debug)]
pub struct GeneratorSolveResult {
    pub f: Series,
    /// Terms whose divisor fell below threshold, unchanged.
    pub unresolved: Series,
    /// Smallest and largest `|D|` among solved terms.
    pub min_divisor: f64,
    pub max_divisor: f64,
    /// `ℓ¹(R_kill + {N, F} − unresolved) / ℓ¹(R_kill)`.
    pub residual: f64,
}

/// Solves `{N, F} = −(R_kill − unresolved)` with `N = ⟨ω, y⟩ + Σ Ω_j q_j q̄_j`,
/// term by term: `F̂ = R̂ / (i D)`.
pub fn solve_homological(
    r_kill: &Series,
    omega: &[f64],
    big_omega: &[f64],
    policy: &DivisorPolicy,
) -> Result<GeneratorSolveResult> {
    let meta = r_kill.meta().clone();
    if omega.len() != meta.n() || big_omega.len() != meta.table.len() {
        return Err(Error::Dimension(
            "frequencies do not match the series".into(),
        ));
    }
    let mut solved = Vec::new();
    let mut unresolved = Vec::new();
    let mut min_d = f64::INFINITY;
    let mut max_d = 0.0f64;
    for (m, &c) in r_kill.iter() {
        let d = term_divisor(m, omega, big_omega);
        if d.abs() >= policy.threshold(m) {
            min_d = min_d.min(d.abs());
            max_d = max_d.max(d.abs());
            solved.push((m.clone(), c / C64::new(0.0, d)));
        } else {
            unresolved.push((m.clone(), c));
        }
    }
    let f = Series::from_terms(meta.clone(), solved)?;
    let unresolved = Series::from_terms(meta.clone(), unresolved)?;
    // The bracket with N preserves degree and Fourier order, so nothing is
    // truncated here.
    let n = Series::normal_form(meta, omega, big_omega)?;
    let bracket = poisson_bracket(&n, &f)?.value;
    let res = r_kill.add(&bracket)?.sub(&unresolved)?;
    let scale = r_kill.l1_mass();
    Ok(GeneratorSolveResult {
        f,
        unresolved,
        min_divisor: min_d,
        max_divisor: max_d,
        residual: if scale > 0.0 {
            res.l1_mass() / scale
        } else {
            0.0
        },
    })
}
