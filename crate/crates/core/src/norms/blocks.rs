use std::collections::BTreeMap;

use rustc_hash::FxHashMap;
use smallvec::SmallVec;

use super::{DomainParams, ParameterGrid};
use crate::error::{Error, Result};
use crate::series::{Monomial, ParamSeries, Series, C64};

/// Weighted Fourier norms of one `(α, β, γ)` block.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct BlockEntry {
    /// `sup_{ξ, j} Σ_k (|c_k| + |∂_{ξ_j} c_k|) e^{|k|s}`.
    pub x: f64,
    /// Same sum weighted by `|k_i|`, per angle `i`.
    pub xk: SmallVec<[f64; 4]>,
}

/// Block norms of a series keyed by the monomial with `k = 0`.
#[derive(Clone, Debug, Default)]
pub struct BlockNorms {
    pub blocks: BTreeMap<Monomial, BlockEntry>,
    pub n: usize,
}

fn block_key(m: &Monomial) -> Monomial {
    let mut b = m.clone();
    for k in b.k.iter_mut() {
        *k = 0;
    }
    b
}

type Sums = FxHashMap<Monomial, (f64, SmallVec<[f64; 4]>)>;

fn add_weighted(acc: &mut Sums, m: &Monomial, c: f64, s: f64) {
    let w = c * (m.fourier_order() as f64 * s).exp();
    let e = acc
        .entry(block_key(m))
        .or_insert_with(|| (0.0, SmallVec::from_elem(0.0, m.n())));
    e.0 += w;
    for (i, k) in m.k.iter().enumerate() {
        e.1[i] += k.unsigned_abs() as f64 * w;
    }
}

impl BlockNorms {
    /// Block norms over a parameter grid, with `∂_ξ` by central differences.
    pub fn compute(family: &dyn ParamSeries, s: f64, grid: &ParameterGrid) -> Result<Self> {
        let mut out: BTreeMap<Monomial, BlockEntry> = BTreeMap::new();
        let mut n = 0;
        for xi in &grid.samples {
            let base = family.at(xi)?;
            n = base.n();
            let mut values = Sums::default();
            for (m, c) in base.iter() {
                add_weighted(&mut values, m, c.norm(), s);
            }
            // Derivative sums: the largest over the derivative directions.
            let mut deriv = Sums::default();
            if !family.is_constant() {
                for j in 0..grid.sites.len() {
                    let mut plus = xi.clone();
                    let mut minus = xi.clone();
                    plus[j] += grid.step;
                    minus[j] -= grid.step;
                    let sp = family.at(&plus)?;
                    let sm = family.at(&minus)?;
                    let diff = sp.sub(&sm)?;
                    let mut dj = Sums::default();
                    for (m, c) in diff.iter() {
                        add_weighted(&mut dj, m, c.norm() / (2.0 * grid.step), s);
                    }
                    for (k, (v, vk)) in dj {
                        let e = deriv
                            .entry(k)
                            .or_insert_with(|| (0.0, SmallVec::from_elem(0.0, vk.len())));
                        e.0 = e.0.max(v);
                        for (a, b) in e.1.iter_mut().zip(vk) {
                            *a = a.max(b);
                        }
                    }
                }
            }
            for (k, (v, vk)) in deriv {
                let e = values
                    .entry(k)
                    .or_insert_with(|| (0.0, SmallVec::from_elem(0.0, vk.len())));
                e.0 += v;
                for (a, b) in e.1.iter_mut().zip(vk) {
                    *a += b;
                }
            }
            for (k, (v, vk)) in values {
                let e = out.entry(k).or_insert_with(|| BlockEntry {
                    x: 0.0,
                    xk: SmallVec::from_elem(0.0, vk.len()),
                });
                e.x = e.x.max(v);
                for (a, b) in e.xk.iter_mut().zip(vk) {
                    *a = a.max(b);
                }
            }
        }
        Ok(BlockNorms { blocks: out, n })
    }
}

/// `sup_{ξ, j} Σ_k (|Ŵ(k)| + |∂_{ξ_j} Ŵ(k)|) e^{|k|s}` for a pure Fourier
/// series.
pub fn analytic_x_norm(family: &dyn ParamSeries, s: f64, grid: &ParameterGrid) -> Result<f64> {
    for xi in &grid.samples {
        let w = family.at(xi)?;
        if w.iter().any(|(m, _)| m.alpha_abs() > 0 || m.z_degree() > 0) {
            return Err(Error::NotPureFourier);
        }
    }
    let b = BlockNorms::compute(family, s, grid)?;
    Ok(b.blocks.values().map(|e| e.x).fold(0.0, f64::max))
}

/// Nonnegative z-only coefficient tables derived from block norms: the
/// modulus itself and the moduli of `W_{y_i}` and `W_{x_i}`.
#[derive(Clone, Debug, Default)]
pub(crate) struct ModulusTables {
    /// `Σ_α X_{αβγ} r^{2|α|}` keyed by the z-part.
    pub z: BTreeMap<Monomial, f64>,
    /// Per angle `i`: `Σ_α α_i X_{αβγ} r^{2|α|−2}`.
    pub y: Vec<BTreeMap<Monomial, f64>>,
    /// Per angle `i`: `Σ_α X^{(k_i)}_{αβγ} r^{2|α|}`.
    pub x: Vec<BTreeMap<Monomial, f64>>,
}

fn z_part(m: &Monomial) -> Monomial {
    let mut z = m.clone();
    for a in z.alpha.iter_mut() {
        *a = 0;
    }
    z
}

impl ModulusTables {
    pub fn from_blocks(b: &BlockNorms, r: f64) -> Self {
        let mut t = ModulusTables {
            z: BTreeMap::new(),
            y: vec![BTreeMap::new(); b.n],
            x: vec![BTreeMap::new(); b.n],
        };
        let r2 = r * r;
        for (key, e) in &b.blocks {
            let a = key.alpha_abs() as i32;
            let zk = z_part(key);
            *t.z.entry(zk.clone()).or_insert(0.0) += e.x * r2.powi(a);
            for i in 0..b.n {
                let ai = key.alpha[i];
                if ai > 0 {
                    *t.y[i].entry(zk.clone()).or_insert(0.0) += ai as f64 * e.x * r2.powi(a - 1);
                }
                if e.xk[i] > 0.0 {
                    *t.x[i].entry(zk.clone()).or_insert(0.0) += e.xk[i] * r2.powi(a);
                }
            }
        }
        t
    }
}

/// The modulus: each block replaced by its weighted norm, giving a z-only
/// series with nonnegative real coefficients.
pub fn modulus(
    family: &dyn ParamSeries,
    dp: &DomainParams,
    grid: &ParameterGrid,
) -> Result<Series> {
    let meta = family.at(&grid.samples[0])?.meta().clone();
    let b = BlockNorms::compute(family, dp.s, grid)?;
    let t = ModulusTables::from_blocks(&b, dp.r);
    Series::from_terms(meta, t.z.into_iter().map(|(m, v)| (m, C64::new(v, 0.0))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::{SeriesMeta, Site, SiteTable};
    use std::sync::Arc;

    fn meta() -> SeriesMeta {
        let table = SiteTable::new(
            1,
            vec![Site::new(vec![1]), Site::new(vec![2])],
            vec![Site::new(vec![0]), Site::new(vec![3])],
        )
        .unwrap();
        SeriesMeta::new(Arc::new(table), 8, 8)
    }

    #[test]
    fn single_character() {
        let s = Series::monomial(meta(), Monomial::fourier(&[2, -1]), C64::new(0.0, -1.5)).unwrap();
        let v = analytic_x_norm(&s, 0.3, &ParameterGrid::fixed()).unwrap();
        assert!((v - 1.5 * (0.9f64).exp()).abs() < 1e-14);
    }

    #[test]
    fn zero_series_has_zero_norm() {
        let s = Series::zero(meta());
        assert_eq!(
            analytic_x_norm(&s, 0.3, &ParameterGrid::fixed()).unwrap(),
            0.0
        );
    }

    #[test]
    fn rejects_non_fourier_input() {
        let s = Series::monomial(meta(), Monomial::y(2, 0), C64::new(1.0, 0.0)).unwrap();
        assert!(matches!(
            analytic_x_norm(&s, 0.3, &ParameterGrid::fixed()),
            Err(Error::NotPureFourier)
        ));
    }

    #[test]
    fn affine_coefficients_add_slope() {
        // c(ξ) = 2 + 3ξ_0 − 0.5ξ_1 on e^{i x_1}: value at ξ plus max |slope|.
        let m = meta();
        let fam = move |xi: &[f64]| {
            Series::monomial(
                m.clone(),
                Monomial::fourier(&[1, 0]),
                C64::new(2.0 + 3.0 * xi[0] - 0.5 * xi[1], 0.0),
            )
        };
        let grid = ParameterGrid {
            sites: vec![Site::new(vec![0]), Site::new(vec![3])],
            samples: vec![vec![0.1, 0.2], vec![0.4, 0.0]],
            step: 1e-4,
        };
        let v = analytic_x_norm(&fam, 0.5, &grid).unwrap();
        let expected = (2.0 + 3.0 * 0.4 + 3.0) * (0.5f64).exp();
        assert!((v - expected).abs() < 1e-9, "{v} vs {expected}");
    }

    #[test]
    fn modulus_of_single_monomial() {
        let mono = Monomial::new(&[1, 0], &[1, 0], &[(0, 1)], &[(1, 2)]).unwrap();
        let s = Series::monomial(meta(), mono, C64::new(3.0, 4.0)).unwrap();
        let dp = DomainParams::new(0.2, 0.5, 3, 1).unwrap();
        let m = modulus(&s, &dp, &ParameterGrid::fixed()).unwrap();
        assert_eq!(m.len(), 1);
        let (key, c) = m.iter().next().unwrap();
        assert_eq!(key.alpha_abs(), 0);
        assert!(key.k.iter().all(|&k| k == 0));
        assert!((c.re - 5.0 * (0.2f64).exp() * 0.25).abs() < 1e-14);
        assert_eq!(c.im, 0.0);
    }
}
