//! Random series generators for property tests and empirical constant fits.

use rand::Rng;

use super::monomial::{canonical_exps, Monomial};
use super::{Series, SeriesMeta, Site, C64};

/// Shape of a random series.
#[derive(Clone, Debug)]
pub struct RandomSeriesSpec {
    pub terms: usize,
    pub min_z: u32,
    pub max_z: u32,
    /// Largest `|α|`.
    pub max_alpha: u16,
    /// Largest `|k_i|` per angle.
    pub max_fourier: i32,
    /// Only emit monomials satisfying the momentum rule.
    pub momentum: bool,
    /// Add the conjugate partner of each term so the series is real.
    pub real: bool,
    /// Coefficient magnitudes are drawn from `[scale/2, scale]`.
    pub scale: f64,
}

impl RandomSeriesSpec {
    /// Up to `terms` terms of z-degree exactly `z`, no x or y dependence.
    pub fn pure_z(z: u32, terms: usize) -> Self {
        RandomSeriesSpec {
            terms,
            min_z: z,
            max_z: z,
            max_alpha: 0,
            max_fourier: 0,
            momentum: false,
            real: false,
            scale: 1.0,
        }
    }

    /// Mixed terms of total degree at most `max_degree`.
    pub fn mixed(max_degree: u32, terms: usize) -> Self {
        RandomSeriesSpec {
            terms,
            min_z: 0,
            max_z: max_degree,
            max_alpha: (max_degree / 2) as u16,
            max_fourier: 2,
            momentum: false,
            real: false,
            scale: 1.0,
        }
    }
}

/// Draws one monomial, or `None` if the momentum repair failed.
fn draw_monomial<R: Rng>(
    meta: &SeriesMeta,
    spec: &RandomSeriesSpec,
    rng: &mut R,
) -> Option<Monomial> {
    let n = meta.n();
    let sites = meta.table.len() as u32;
    let mut m = Monomial::one(n);
    for i in 0..n {
        if spec.max_fourier > 0 {
            m.k[i] = rng.gen_range(-spec.max_fourier..=spec.max_fourier);
        }
    }
    let mut alpha_left = if spec.max_alpha > 0 {
        rng.gen_range(0..=spec.max_alpha)
    } else {
        0
    };
    while alpha_left > 0 && n > 0 {
        m.alpha[rng.gen_range(0..n)] += 1;
        alpha_left -= 1;
    }
    let z = if sites == 0 {
        0
    } else {
        rng.gen_range(spec.min_z..=spec.max_z)
    };
    let mut beta = Vec::new();
    let mut gamma = Vec::new();
    let free = if spec.momentum && z > 0 { z - 1 } else { z };
    for _ in 0..free {
        let s = rng.gen_range(0..sites);
        if rng.gen_bool(0.5) {
            beta.push((s, 1u16));
        } else {
            gamma.push((s, 1u16));
        }
    }
    m.beta = canonical_exps(&beta);
    m.gamma = canonical_exps(&gamma);
    if spec.momentum {
        let r = m.momentum_residual(&meta.table);
        let is_zero = r.iter().all(|&v| v == 0);
        if z == 0 {
            if !is_zero {
                return None;
            }
        } else {
            // Close the momentum with one more factor: q̄_s removes s, q_s adds s.
            let target = Site::new(r.iter().map(|&v| v as i32).collect());
            let use_qbar = rng.gen_bool(0.5);
            let site = if use_qbar { target } else { target.neg() };
            let slot = meta.table.slot(&site)?;
            if use_qbar {
                gamma.push((slot, 1));
            } else {
                beta.push((slot, 1));
            }
            m.beta = canonical_exps(&beta);
            m.gamma = canonical_exps(&gamma);
        }
    }
    if !meta.admits(&m) || m.z_degree() < spec.min_z {
        return None;
    }
    Some(m)
}

/// A random series with at most `spec.terms` distinct monomials.
pub fn random_series<R: Rng>(meta: &SeriesMeta, spec: &RandomSeriesSpec, rng: &mut R) -> Series {
    let mut out = Vec::new();
    let mut attempts = 0;
    while out.len() < spec.terms && attempts < 200 * spec.terms.max(1) {
        attempts += 1;
        let Some(m) = draw_monomial(meta, spec, rng) else {
            continue;
        };
        let mag = rng.gen_range(0.5..=1.0) * spec.scale;
        let phase = rng.gen_range(0.0..std::f64::consts::TAU);
        let c = C64::from_polar(mag, phase);
        if spec.real {
            let partner = m.conjugate_key();
            if partner == m {
                out.push((m, C64::new(c.re, 0.0)));
            } else {
                out.push((m, c));
                out.push((partner, c.conj()));
            }
        } else {
            out.push((m, c));
        }
    }
    Series::from_terms(meta.clone(), out).expect("generated monomials respect the meta")
}
