use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::blocks::{BlockNorms, ModulusTables};
use super::{DegreeContribution, DomainParams, NormReport, ParameterGrid};
use crate::error::{Error, Result};
use crate::series::{Monomial, ParamSeries, Series};

/// Controls the sampled lower bounds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TameOptions {
    /// Random nonnegative test vectors per degree (single-site vectors are
    /// always tried in addition).
    pub samples: usize,
    pub seed: u64,
}

impl Default for TameOptions {
    fn default() -> Self {
        TameOptions {
            samples: 24,
            seed: 0x5eed,
        }
    }
}

/// A nonnegative z-only polynomial in flattened variables: slot `s` is `q_s`,
/// slot `S + s` is `q̄_s`.
struct PosPoly {
    terms: Vec<(Vec<(usize, u16)>, f64)>,
}

impl PosPoly {
    fn new(table: &BTreeMap<Monomial, f64>, sites: usize) -> Self {
        let terms = table
            .iter()
            .filter(|(_, &c)| c > 0.0)
            .map(|(m, &c)| {
                let vars = m
                    .beta
                    .iter()
                    .map(|&(s, p)| (s as usize, p))
                    .chain(m.gamma.iter().map(|&(s, p)| (sites + s as usize, p)))
                    .collect();
                (vars, c)
            })
            .collect();
        PosPoly { terms }
    }

    fn value(&self, z: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(vars, c)| {
                vars.iter()
                    .fold(*c, |acc, &(v, p)| acc * z[v].powi(p as i32))
            })
            .sum()
    }

    fn gradient(&self, z: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; z.len()];
        for (vars, c) in &self.terms {
            for (i, &(v, p)) in vars.iter().enumerate() {
                let mut t = c * p as f64 * z[v].powi(p as i32 - 1);
                for (j, &(w, e)) in vars.iter().enumerate() {
                    if j != i {
                        t *= z[w].powi(e as i32);
                    }
                }
                g[v] += t;
            }
        }
        g
    }

    /// Per output component `v`: `Σ_{t∋v} c_t e_v Π_{rest} ⟨w⟩^{-a}` with one
    /// rest factor (the heaviest) carrying `⟨w⟩^{-b}` instead.
    fn component_bounds(&self, weights: &[f64], a: f64, b: f64) -> Vec<f64> {
        let mut out = vec![0.0; weights.len()];
        let mut rest: Vec<f64> = Vec::new();
        for (vars, c) in &self.terms {
            for (i, &(v, p)) in vars.iter().enumerate() {
                rest.clear();
                for (j, &(w, e)) in vars.iter().enumerate() {
                    let cnt = if j == i { e - 1 } else { e };
                    for _ in 0..cnt {
                        rest.push(weights[w]);
                    }
                }
                let mut bound = c * p as f64;
                if let Some(idx) = rest
                    .iter()
                    .enumerate()
                    .max_by(|x, y| x.1.total_cmp(y.1))
                    .map(|(k, _)| k)
                {
                    for (k, w) in rest.iter().enumerate() {
                        bound *= w.powf(-if k == idx { b } else { a });
                    }
                }
                out[v] += bound;
            }
        }
        out
    }

    /// `Σ_t c_t Π_{w∈t} ⟨w⟩^{-a}`: bound for the scalar form.
    fn scalar_bound(&self, weights: &[f64], a: f64) -> f64 {
        self.terms
            .iter()
            .map(|(vars, c)| {
                vars.iter()
                    .fold(*c, |acc, &(w, e)| acc * weights[w].powf(-a * e as f64))
            })
            .sum()
    }
}

/// Norm of a flattened `(q, q̄)` vector: `‖q‖_a + ‖q̄‖_a`.
fn flat_norm(v: &[f64], weights: &[f64], a: f64) -> f64 {
    let s = weights.len() / 2;
    let part = |r: std::ops::Range<usize>| {
        r.map(|i| v[i] * v[i] * weights[i].powf(2.0 * a))
            .sum::<f64>()
            .sqrt()
    };
    part(0..s) + part(s..2 * s)
}

fn test_vectors(weights: &[f64], p: u32, opts: &TameOptions, h: u32) -> Vec<Vec<f64>> {
    let len = weights.len();
    let s = len / 2;
    let mut out = Vec::new();
    for v in 0..s {
        let mut z = vec![0.0; len];
        z[v] = 1.0;
        out.push(z.clone());
        z[v] = 0.0;
        z[s + v] = 1.0;
        out.push(z.clone());
        z[v] = 1.0;
        out.push(z);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ (h as u64).wrapping_mul(0x9e37_79b9));
    for _ in 0..opts.samples {
        let decay = rng.gen_range(0.0..(p as f64 + 2.0));
        let z: Vec<f64> = (0..len)
            .map(|i| rng.gen_range(0.0..1.0) * weights[i].powf(-decay))
            .collect();
        out.push(z);
    }
    out
}

struct DegreeNorms {
    y: f64,
    x: f64,
    zp: f64,
    zd: f64,
    y_lo: f64,
    x_lo: f64,
    zp_lo: f64,
    zd_lo: f64,
}

fn degree_norms(
    t: &ModulusTables,
    h: u32,
    weights_site: &[f64],
    dp: &DomainParams,
    opts: &TameOptions,
) -> DegreeNorms {
    let sites = weights_site.len();
    let weights: Vec<f64> = weights_site
        .iter()
        .chain(weights_site.iter())
        .copied()
        .collect();
    let filter = |m: &BTreeMap<Monomial, f64>| -> BTreeMap<Monomial, f64> {
        m.iter()
            .filter(|(k, _)| k.z_degree() == h)
            .map(|(k, v)| (k.clone(), *v))
            .collect()
    };
    let zpoly = PosPoly::new(&filter(&t.z), sites);
    let ypolys: Vec<PosPoly> =
        t.y.iter()
            .map(|m| PosPoly::new(&filter(m), sites))
            .collect();
    let xpolys: Vec<PosPoly> =
        t.x.iter()
            .map(|m| PosPoly::new(&filter(m), sites))
            .collect();
    let (p, d) = (dp.p as f64, dp.dbase as f64);

    let max_scalar = |polys: &[PosPoly]| {
        polys
            .iter()
            .map(|q| q.scalar_bound(&weights, d))
            .fold(0.0, f64::max)
    };
    let y = max_scalar(&ypolys);
    let x = max_scalar(&xpolys);
    let (zp, zd) = match h {
        0 => (0.0, 0.0),
        _ => {
            let bp = zpoly.component_bounds(&weights, d, p);
            let bd = zpoly.component_bounds(&weights, d, d);
            (
                flat_norm(&bp, &weights, p + 2.0),
                flat_norm(&bd, &weights, d),
            )
        }
    };

    let mut lo = DegreeNorms {
        y,
        x,
        zp,
        zd,
        y_lo: 0.0,
        x_lo: 0.0,
        zp_lo: 0.0,
        zd_lo: 0.0,
    };
    if h == 0 {
        lo.y_lo = y;
        lo.x_lo = x;
        return lo;
    }
    if h == 1 {
        lo.zp_lo = zp;
        lo.zd_lo = zd;
    }
    for z in test_vectors(&weights, dp.p, opts, h) {
        let np = flat_norm(&z, &weights, p);
        let nd = flat_norm(&z, &weights, d);
        if nd == 0.0 {
            continue;
        }
        let denom_v = nd.powi(h as i32);
        for q in &ypolys {
            lo.y_lo = lo.y_lo.max(q.value(&z) / denom_v);
        }
        for q in &xpolys {
            lo.x_lo = lo.x_lo.max(q.value(&z) / denom_v);
        }
        if h >= 2 {
            let g = zpoly.gradient(&z);
            let dp_den = np * nd.powi(h as i32 - 2);
            let dd_den = nd.powi(h as i32 - 1);
            lo.zp_lo = lo.zp_lo.max(flat_norm(&g, &weights, p + 2.0) / dp_den);
            lo.zd_lo = lo.zd_lo.max(flat_norm(&g, &weights, d) / dd_den);
        }
    }
    // Guard against rounding in the comparison of equal quantities.
    lo.y_lo = lo.y_lo.min(lo.y);
    lo.x_lo = lo.x_lo.min(lo.x);
    lo.zp_lo = lo.zp_lo.min(lo.zp);
    lo.zd_lo = lo.zd_lo.min(lo.zd);
    lo
}

fn contribution(h: u32, n: &DegreeNorms, r: f64) -> DegreeContribution {
    let rh = r.powi(h as i32);
    let rz = if h == 0 { 0.0 } else { r.powi(h as i32 - 1) };
    let weighted = |y: f64, x: f64, z: f64| y * rh + x * rh / (r * r) + z * rz / r;
    DegreeContribution {
        h,
        y_norm: n.y,
        x_norm: n.x,
        z_tame: n.zp,
        z_d: n.zd,
        z_tame_lower: n.zp_lo,
        weighted_upper: weighted(n.y, n.x, n.zp.max(n.zd)),
        weighted_lower: weighted(n.y_lo, n.x_lo, n.zp_lo.max(n.zd_lo)),
    }
}

/// p-tame operator norm of `W_z` for a series homogeneous in z of degree `h`.
///
/// `value_upper` is the weighted-ℓ¹ majorant computed from the modulus;
/// `value_lower` is the best ratio found on nonnegative test vectors. The
/// single breakdown entry also carries the d-operator and x/y variants.
pub fn tame_operator_norm(
    family: &dyn ParamSeries,
    dp: &DomainParams,
    grid: &ParameterGrid,
    opts: &TameOptions,
) -> Result<NormReport> {
    let w0 = family.at(&grid.samples[0])?;
    let degrees = w0.z_degrees();
    if degrees.len() > 1 {
        return Err(Error::NotHomogeneous(degrees));
    }
    let Some(&h) = degrees.first() else {
        return Ok(NormReport {
            value_upper: 0.0,
            value_lower: 0.0,
            breakdown: vec![],
        });
    };
    let b = BlockNorms::compute(family, dp.s, grid)?;
    let t = ModulusTables::from_blocks(&b, dp.r);
    let n = degree_norms(&t, h, &w0.table().weights(), dp, opts);
    let c = contribution(h, &n, dp.r);
    Ok(NormReport {
        value_upper: n.zp,
        value_lower: n.zp_lo,
        breakdown: vec![c],
    })
}

/// `|||X_W|||^T = Σ_h (|||W_y||| r^h + |||W_x||| r^{h−2} + max(T_p, T_d) r^{h−2})`.
pub fn vector_field_tame_norm(
    family: &dyn ParamSeries,
    dp: &DomainParams,
    grid: &ParameterGrid,
    opts: &TameOptions,
) -> Result<NormReport> {
    let w0: Series = family.at(&grid.samples[0])?;
    let b = BlockNorms::compute(family, dp.s, grid)?;
    let t = ModulusTables::from_blocks(&b, dp.r);
    let mut degrees: Vec<u32> = b.blocks.keys().map(Monomial::z_degree).collect();
    degrees.sort_unstable();
    degrees.dedup();
    let weights = w0.table().weights();
    let mut report = NormReport::zero();
    for h in degrees {
        let n = degree_norms(&t, h, &weights, dp, opts);
        let c = contribution(h, &n, dp.r);
        report.value_upper += c.weighted_upper;
        report.value_lower += c.weighted_lower;
        report.breakdown.push(c);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::{SeriesMeta, Site, SiteTable, C64};
    use std::sync::Arc;

    fn meta() -> SeriesMeta {
        let table = SiteTable::new(
            2,
            vec![Site::new(vec![1, 0]), Site::new(vec![0, 1])],
            vec![
                Site::new(vec![0, 0]),
                Site::new(vec![2, 1]),
                Site::new(vec![-1, 0]),
            ],
        )
        .unwrap();
        SeriesMeta::new(Arc::new(table), 8, 8)
    }

    #[test]
    fn single_action_term() {
        // Ω q_j q̄_j: exact tame norm Ω⟨j⟩², majorant at most twice that.
        let omega = 5.0;
        let s = Series::monomial(meta(), Monomial::action(2, 1), C64::new(omega, 0.0)).unwrap();
        let dp = DomainParams::new(0.3, 0.4, 3, 2).unwrap();
        let r =
            tame_operator_norm(&s, &dp, &ParameterGrid::fixed(), &TameOptions::default()).unwrap();
        let exact = omega * 5.0;
        assert!((r.value_lower - exact).abs() < 1e-9 * exact, "{r:?}");
        assert!(r.value_upper >= exact && r.value_upper <= 2.0 * exact + 1e-9);
    }

    #[test]
    fn zero_series() {
        let s = Series::zero(meta());
        let dp = DomainParams::new(0.3, 0.4, 3, 2).unwrap();
        let r =
            tame_operator_norm(&s, &dp, &ParameterGrid::fixed(), &TameOptions::default()).unwrap();
        assert_eq!(r.value_upper, 0.0);
        let v = vector_field_tame_norm(&s, &dp, &ParameterGrid::fixed(), &TameOptions::default())
            .unwrap();
        assert_eq!(v.value_upper, 0.0);
    }

    #[test]
    fn rejects_mixed_degrees() {
        let s = Series::from_terms(
            meta(),
            [
                (Monomial::action(2, 0), C64::new(1.0, 0.0)),
                (Monomial::q(2, 0), C64::new(1.0, 0.0)),
            ],
        )
        .unwrap();
        let dp = DomainParams::new(0.3, 0.4, 3, 2).unwrap();
        assert!(matches!(
            tame_operator_norm(&s, &dp, &ParameterGrid::fixed(), &TameOptions::default()),
            Err(Error::NotHomogeneous(_))
        ));
    }

    #[test]
    fn linear_actions_enter_through_y_only() {
        let s = Series::normal_form(meta(), &[1.0, -3.0], &[0.0; 3]).unwrap();
        let dp = DomainParams::new(0.3, 0.4, 3, 2).unwrap();
        let v = vector_field_tame_norm(&s, &dp, &ParameterGrid::fixed(), &TameOptions::default())
            .unwrap();
        assert_eq!(v.breakdown.len(), 1);
        assert_eq!(v.breakdown[0].h, 0);
        assert_eq!(v.value_upper, 3.0);
        assert_eq!(v.value_lower, 3.0);
    }
}
