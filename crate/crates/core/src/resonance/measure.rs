use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{for_each_query, threshold_unchecked, ResonanceConfig};
use crate::error::{config_err, Result};
use crate::model::{FrequencyMap, SiteLattice};

/// One row of the measure table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureRow {
    pub eta_tilde: f64,
    pub fraction: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub samples: usize,
    /// `fraction / η̃^{1/2}`.
    pub c_hat: f64,
}

/// Resonant fractions over a list of `η̃` values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureTable {
    pub rows: Vec<MeasureRow>,
    /// Least-squares slope of `log fraction` against `log η̃` over rows with
    /// a positive fraction.
    pub slope: Option<f64>,
    /// Constant fitted on the two largest `η̃`: the largest `c_hat` there.
    pub c_fit: f64,
    /// Whether `fraction ≤ c_fit·η̃^{1/2}` holds on every row.
    pub bound_holds: bool,
    pub query_count: usize,
    pub pruned_count: u64,
    pub seed: u64,
}

impl MeasureTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("eta_tilde,fraction,ci_low,ci_high,samples\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.eta_tilde, r.fraction, r.ci_low, r.ci_high, r.samples
            ));
        }
        out
    }
}

/// 95% Wilson score interval for `hits` successes in `n` trials.
pub fn wilson_interval(hits: usize, n: usize) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959_963_984_540_054_f64;
    let nf = n as f64;
    let p = hits as f64 / nf;
    let denom = 1.0 + z * z / nf;
    let centre = (p + z * z / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z * z / (4.0 * nf * nf)).sqrt() / denom;
    ((centre - half).clamp(0.0, p), (centre + half).clamp(p, 1.0))
}

/// Least-squares `(slope, intercept)` of `ln y` against `ln x` over pairs with
/// `x, y > 0`; `None` with fewer than two such pairs.
pub fn fit_power_law(xs: &[f64], ys: &[f64]) -> Option<(f64, f64)> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

/// A query reduced to a sparse combination of frequencies and its threshold
/// at `η̃ = 1`.
struct Compact {
    terms: Vec<(usize, f64)>,
    base: f64,
}

/// Uniform Monte-Carlo estimate of the resonant fraction of the box for each
/// `η̃`. Sample `i` uses its own stream of a generator seeded by `seed`, so
/// the table does not depend on the worker count.
pub fn measure_estimate(
    lattice: &SiteLattice,
    freq: &FrequencyMap,
    cfg: &ResonanceConfig,
    param_box: [f64; 2],
    etas: &[f64],
    samples: usize,
    seed: u64,
) -> Result<MeasureTable> {
    if samples < 100 {
        return Err(config_err("measure.samples", "must be at least 100"));
    }
    if etas.is_empty() || etas.iter().any(|&e| !(e > 0.0 && e < 1.0)) {
        return Err(config_err("measure.etas", "needs values in (0, 1)"));
    }
    ResonanceConfig {
        eta_tilde: etas[0],
        ..cfg.clone()
    }
    .validate(lattice.n())?;
    let n = lattice.n();
    let n_cutoff = lattice.low_cutoff;
    let margin = freq.shifts.as_ref().map_or(0.0, |s| {
        s.d_omega
            .iter()
            .chain(&s.d_big_omega)
            .fold(0.0f64, |m, v| m.max(v.abs()))
    });
    let mut compact = Vec::new();
    let pruned = for_each_query(lattice, cfg.m_order, cfg.k_max, param_box, margin, |q| {
        let mut terms: Vec<(usize, f64)> =
            q.k.iter()
                .enumerate()
                .filter(|(_, &k)| k != 0)
                .map(|(i, &k)| (i, f64::from(k)))
                .collect();
        terms.extend(
            q.l_low
                .iter()
                .chain(&q.l_high)
                .map(|&(s, c)| (n + s as usize, f64::from(c))),
        );
        compact.push(Compact {
            terms,
            base: threshold_unchecked(
                q.k_abs(),
                q.l_low_abs(),
                1.0,
                n_cutoff,
                cfg.m_order,
                cfg.tau,
            ),
        });
    });
    let sites = lattice.retained.len();
    let [lo, hi] = param_box;
    let ratios: Vec<f64> = (0..samples)
        .into_par_iter()
        .map(|i| -> Result<f64> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let xi: Vec<f64> = (0..sites).map(|_| rng.gen_range(lo..hi)).collect();
            let (omega, big) = freq.eval(&xi)?;
            let all: Vec<f64> = omega.into_iter().chain(big).collect();
            Ok(compact.iter().fold(f64::INFINITY, |m, q| {
                let d: f64 = q.terms.iter().map(|&(j, c)| c * all[j]).sum();
                m.min(d.abs() / q.base)
            }))
        })
        .collect::<Result<_>>()?;
    let mut rows: Vec<MeasureRow> = etas
        .iter()
        .map(|&eta| {
            let hits = ratios.iter().filter(|&&r| r < eta).count();
            let (ci_low, ci_high) = wilson_interval(hits, samples);
            let fraction = hits as f64 / samples as f64;
            MeasureRow {
                eta_tilde: eta,
                fraction,
                ci_low,
                ci_high,
                samples,
                c_hat: fraction / eta.sqrt(),
            }
        })
        .collect();
    rows.sort_by(|a, b| b.eta_tilde.total_cmp(&a.eta_tilde));
    let xs: Vec<f64> = rows.iter().map(|r| r.eta_tilde).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.fraction).collect();
    let slope = fit_power_law(&xs, &ys).map(|(s, _)| s);
    let c_fit = rows.iter().take(2).map(|r| r.c_hat).fold(0.0, f64::max);
    let bound_holds = rows
        .iter()
        .all(|r| r.fraction <= c_fit * r.eta_tilde.sqrt() * (1.0 + 1e-12));
    Ok(MeasureTable {
        rows,
        slope,
        c_fit,
        bound_holds,
        query_count: compact.len(),
        pruned_count: pruned,
        seed,
    })
}
