use rayon::prelude::*;

use super::{eigenvalues, ModelConfig, SiteLattice};
use crate::error::{config_err, Result};
use crate::series::{Monomial, Series, SeriesMeta, Site, Truncated, C64};

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// Coefficient of `Π q_s^{β_s} q̄_s^{γ_s}` in `∫ u^m/m dx` with
/// `u = Σ (q_j φ_j + q̄_j φ̄_j)/√(2λ_j)` and `φ_j = e^{i⟨j,x⟩}/(2π)^{d/2}`.
fn coefficient(m: u32, d: usize, counts: &[(u32, u16, u16)], lambda: &[f64]) -> f64 {
    let mut c = factorial(m) / f64::from(m);
    for &(slot, b, g) in counts {
        c /= factorial(u32::from(b)) * factorial(u32::from(g));
        c *= (2.0 * lambda[slot as usize]).powf(-0.5 * f64::from(b + g));
    }
    let two_pi = std::f64::consts::TAU;
    c * two_pi.powf(d as f64 * (1.0 - 0.5 * f64::from(m)))
}

/// Expands `G = ∫_{T^d} g(u) dx`, `g(u) = u^m/m`, `m = f_power + 1`, over the
/// retained sites at parameter `ξ`. Only momentum-conserving monomials are
/// produced.
pub fn build_nonlinearity(
    cfg: &ModelConfig,
    lattice: &SiteLattice,
    xi: &[f64],
) -> Result<Truncated<Series>> {
    let m = cfg.f_power + 1;
    if m > cfg.degree_cap {
        return Err(config_err(
            "model.degree_cap",
            format!("must be at least {m}"),
        ));
    }
    let lambda = eigenvalues(lattice, xi)?;
    let table = lattice.full_table();
    let meta = SeriesMeta::new(table.clone(), cfg.degree_cap, cfg.fourier_cap);
    let sites = lattice.retained.len();
    let coords: Vec<&[i32]> = lattice.retained.iter().map(|s| s.coords()).collect();
    let walker = Walker {
        coords: &coords,
        len: (m - 1) as usize,
        signed: 2 * sites,
    };
    let chunks: Vec<Vec<(Monomial, C64)>> = (0..walker.signed)
        .into_par_iter()
        .map(|first| {
            let mut out = Vec::new();
            let mut seq = vec![first];
            let mut sum = vec![0i64; lattice.d];
            walker.shift(&mut sum, first, 1);
            walker.extend(&mut seq, &mut sum, &mut |seq, sum| {
                let last_min = *seq.last().expect("nonempty");
                for last_sign in [1i64, -1] {
                    // The closing factor cancels the momentum sum.
                    let closing: Vec<i32> = sum.iter().map(|&v| (-v * last_sign) as i32).collect();
                    let Some(slot) = table.slot(&Site::new(closing)) else {
                        continue;
                    };
                    let v = 2 * slot as usize + usize::from(last_sign < 0);
                    if v < last_min {
                        continue;
                    }
                    let mut all = seq.to_vec();
                    all.push(v);
                    out.push(term(&all, m, lattice.d, &lambda));
                }
            });
            out
        })
        .collect();
    Series::from_terms_truncating(meta, chunks.into_iter().flatten())
}

/// Walks nondecreasing sequences of signed variables. Variable `2s` is
/// `q_s` and contributes `+j_s` to the momentum; `2s + 1` is `q̄_s` and
/// contributes `−j_s`.
struct Walker<'a> {
    coords: &'a [&'a [i32]],
    len: usize,
    signed: usize,
}

impl Walker<'_> {
    fn shift(&self, sum: &mut [i64], v: usize, dir: i64) {
        let sign = if v.is_multiple_of(2) { dir } else { -dir };
        for (a, x) in sum.iter_mut().zip(self.coords[v / 2]) {
            *a += sign * i64::from(*x);
        }
    }

    fn extend(&self, seq: &mut Vec<usize>, sum: &mut [i64], f: &mut dyn FnMut(&[usize], &[i64])) {
        if seq.len() == self.len {
            f(seq, sum);
            return;
        }
        let start = *seq.last().expect("nonempty");
        for v in start..self.signed {
            seq.push(v);
            self.shift(sum, v, 1);
            self.extend(seq, sum, f);
            self.shift(sum, v, -1);
            seq.pop();
        }
    }
}

fn term(all: &[usize], m: u32, d: usize, lambda: &[f64]) -> (Monomial, C64) {
    let mut counts: Vec<(u32, u16, u16)> = Vec::new();
    for &v in all {
        let slot = (v / 2) as u32;
        match counts.last_mut() {
            Some(e) if e.0 == slot => {
                if v % 2 == 0 {
                    e.1 += 1
                } else {
                    e.2 += 1
                }
            }
            _ => counts.push(if v % 2 == 0 {
                (slot, 1, 0)
            } else {
                (slot, 0, 1)
            }),
        }
    }
    let beta: Vec<(u32, u16)> = counts
        .iter()
        .filter(|e| e.1 > 0)
        .map(|e| (e.0, e.1))
        .collect();
    let gamma: Vec<(u32, u16)> = counts
        .iter()
        .filter(|e| e.2 > 0)
        .map(|e| (e.0, e.2))
        .collect();
    let mono = Monomial::new(&[], &[], &beta, &gamma).expect("valid exponents");
    (mono, C64::new(coefficient(m, d, &counts, lambda), 0.0))
}
