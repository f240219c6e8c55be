use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{poisson_bracket_pruned, Prune, Series, C64};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LieOptions {
    pub max_iter: usize,
    /// Stop once the ℓ¹ mass of an increment falls below `tol` times the
    /// mass of the running sum. Only consulted for low-degree generators.
    pub tol: f64,
    /// Accept generators of degree ≤ 2, whose brackets do not raise the
    /// degree; the sum is then cut off by `tol`.
    pub allow_low_degree: bool,
    /// Bracket contributions to discard; their mass is counted as dropped.
    pub prune: Prune,
}

impl Default for LieOptions {
    fn default() -> Self {
        LieOptions {
            max_iter: 64,
            tol: 1e-16,
            allow_low_degree: false,
            prune: Prune::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct LieResult {
    pub value: Series,
    /// Number of brackets taken.
    pub iterations: usize,
    pub dropped_mass: f64,
}

/// `H ∘ X_F^1 = Σ_i H^{(i)}/i!` with `H^{(0)} = H`, `H^{(i)} = {H^{(i−1)}, F}`.
pub fn lie_transform(h: &Series, f: &Series, opts: &LieOptions) -> Result<LieResult> {
    h.check_meta(f)?;
    let low = f.min_degree().is_some_and(|d| d <= 2);
    if low && !opts.allow_low_degree {
        return Err(Error::NonTerminating);
    }
    let mut sum = h.clone();
    let mut term = h.clone();
    let mut dropped = 0.0;
    let mut i = 0;
    while !term.is_empty() && !f.is_empty() {
        if i == opts.max_iter {
            return Err(Error::NotConverged {
                iterations: i,
                last_mass: term.l1_mass(),
            });
        }
        i += 1;
        let b = poisson_bracket_pruned(&term, f, opts.prune)?;
        dropped += b.dropped_mass / factorial(i);
        term = b.value.scale(C64::new(1.0 / i as f64, 0.0));
        sum = sum.add(&term)?;
        if low && term.l1_mass() <= opts.tol * sum.l1_mass() {
            break;
        }
    }
    Ok(LieResult {
        value: sum,
        iterations: i,
        dropped_mass: dropped,
    })
}

fn factorial(i: usize) -> f64 {
    (1..=i).map(|k| k as f64).product()
}
