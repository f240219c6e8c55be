//! Sparse Fourier–Taylor series `Σ c·e^{i⟨k,x⟩} y^α q^β q̄^γ`.

mod eval;
mod io;
mod monomial;
mod ops;
mod point;
pub mod random;
mod site;

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::sync::Arc;

pub use eval::{vector_field, CompiledSeries};
pub use io::{SeriesDocument, SeriesMetaRecord, TermRecord};
pub use monomial::{Exps, Monomial};
pub use ops::{multiply, poisson_bracket, poisson_bracket_pruned, Prune};
pub use point::{EvalPoint, PhasePoint, Tangent};
pub use site::{Site, SiteTable};

use crate::error::{Error, Result};

pub type C64 = num_complex::Complex64;

/// Variables and truncation caps shared by every series of a computation.
#[derive(Clone, Debug)]
pub struct SeriesMeta {
    pub table: Arc<SiteTable>,
    pub degree_cap: u32,
    pub fourier_cap: u32,
}

impl SeriesMeta {
    pub fn new(table: Arc<SiteTable>, degree_cap: u32, fourier_cap: u32) -> Self {
        SeriesMeta {
            table,
            degree_cap,
            fourier_cap,
        }
    }

    pub fn n(&self) -> usize {
        self.table.n()
    }

    pub fn with_caps(&self, degree_cap: u32, fourier_cap: u32) -> Self {
        SeriesMeta {
            table: self.table.clone(),
            degree_cap,
            fourier_cap,
        }
    }

    pub fn admits(&self, m: &Monomial) -> bool {
        m.degree() <= self.degree_cap && m.fourier_order() <= self.fourier_cap
    }
}

impl PartialEq for SeriesMeta {
    fn eq(&self, other: &Self) -> bool {
        self.degree_cap == other.degree_cap
            && self.fourier_cap == other.fourier_cap
            && (Arc::ptr_eq(&self.table, &other.table) || *self.table == *other.table)
    }
}

/// A value together with the ℓ¹ mass of the coefficients dropped while
/// producing it.
#[derive(Clone, Debug)]
pub struct Truncated<T> {
    pub value: T,
    pub dropped_mass: f64,
}

/// Canonical sparse series. Keys are unique, coefficients nonzero, and every
/// monomial respects the caps of `meta`.
#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    meta: SeriesMeta,
    terms: BTreeMap<Monomial, C64>,
}

impl Series {
    pub fn zero(meta: SeriesMeta) -> Self {
        Series {
            meta,
            terms: BTreeMap::new(),
        }
    }

    /// Builds a series, summing repeated keys. Monomials outside the caps or
    /// referring to unknown variables are rejected.
    pub fn from_terms<I>(meta: SeriesMeta, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Monomial, C64)>,
    {
        let mut s = Series::zero(meta);
        for (m, c) in terms {
            s.check_monomial(&m)?;
            if !s.meta.admits(&m) {
                return Err(Error::InvalidTerm(format!(
                    "monomial of degree {} and Fourier order {} exceeds caps ({}, {})",
                    m.degree(),
                    m.fourier_order(),
                    s.meta.degree_cap,
                    s.meta.fourier_cap
                )));
            }
            s.accumulate(m, c);
        }
        s.prune();
        Ok(s)
    }

    /// Like [`Series::from_terms`] but drops monomials outside the caps and
    /// reports their mass.
    pub fn from_terms_truncating<I>(meta: SeriesMeta, terms: I) -> Result<Truncated<Self>>
    where
        I: IntoIterator<Item = (Monomial, C64)>,
    {
        let mut s = Series::zero(meta);
        let mut dropped = BTreeMap::new();
        for (m, c) in terms {
            s.check_monomial(&m)?;
            if s.meta.admits(&m) {
                s.accumulate(m, c);
            } else {
                *dropped.entry(m).or_insert(C64::new(0.0, 0.0)) += c;
            }
        }
        s.prune();
        let dropped_mass = dropped.values().map(|c: &C64| c.norm()).sum();
        Ok(Truncated {
            value: s,
            dropped_mass,
        })
    }

    pub fn monomial(meta: SeriesMeta, m: Monomial, c: C64) -> Result<Self> {
        Series::from_terms(meta, [(m, c)])
    }

    pub fn constant(meta: SeriesMeta, c: C64) -> Self {
        let n = meta.n();
        let mut s = Series::zero(meta);
        s.accumulate(Monomial::one(n), c);
        s.prune();
        s
    }

    /// `Σ ω_i y_i + Σ Ω_j q_j q̄_j`.
    pub fn normal_form(meta: SeriesMeta, omega: &[f64], big_omega: &[f64]) -> Result<Self> {
        let n = meta.n();
        if omega.len() != n || big_omega.len() != meta.table.len() {
            return Err(Error::Dimension(format!(
                "frequencies of length ({}, {}) for {} angles and {} sites",
                omega.len(),
                big_omega.len(),
                n,
                meta.table.len()
            )));
        }
        let terms = omega
            .iter()
            .enumerate()
            .map(|(i, &w)| (Monomial::y(n, i), C64::new(w, 0.0)))
            .chain(
                big_omega
                    .iter()
                    .enumerate()
                    .map(|(s, &w)| (Monomial::action(n, s as u32), C64::new(w, 0.0))),
            )
            .collect::<Vec<_>>();
        Series::from_terms(meta, terms)
    }

    fn check_monomial(&self, m: &Monomial) -> Result<()> {
        if m.n() != self.meta.n() || m.alpha.len() != self.meta.n() {
            return Err(Error::Dimension(format!(
                "monomial has {} angles, series has {}",
                m.n(),
                self.meta.n()
            )));
        }
        let len = self.meta.table.len() as u32;
        for &(slot, _) in m.beta.iter().chain(m.gamma.iter()) {
            if slot >= len {
                return Err(Error::InvalidTerm(format!("site slot {slot} out of range")));
            }
        }
        Ok(())
    }

    pub(crate) fn accumulate(&mut self, m: Monomial, c: C64) {
        *self.terms.entry(m).or_insert(C64::new(0.0, 0.0)) += c;
    }

    pub(crate) fn prune(&mut self) {
        self.terms.retain(|_, c| c.re != 0.0 || c.im != 0.0);
    }

    pub(crate) fn from_sorted_unchecked(meta: SeriesMeta, terms: Vec<(Monomial, C64)>) -> Self {
        let terms = terms
            .into_iter()
            .filter(|(_, c)| c.re != 0.0 || c.im != 0.0)
            .collect();
        Series { meta, terms }
    }

    pub fn meta(&self) -> &SeriesMeta {
        &self.meta
    }

    pub fn table(&self) -> &SiteTable {
        &self.meta.table
    }

    pub fn n(&self) -> usize {
        self.meta.n()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Monomial, &C64)> {
        self.terms.iter()
    }

    pub fn get(&self, m: &Monomial) -> C64 {
        self.terms.get(m).copied().unwrap_or(C64::new(0.0, 0.0))
    }

    /// ℓ¹ mass `Σ|c|`.
    pub fn l1_mass(&self) -> f64 {
        self.terms.values().map(|c| c.norm()).sum()
    }

    pub fn max_degree(&self) -> Option<u32> {
        self.terms.keys().map(Monomial::degree).max()
    }

    pub fn min_degree(&self) -> Option<u32> {
        self.terms.keys().map(Monomial::degree).min()
    }

    /// Sorted distinct z-degrees present.
    pub fn z_degrees(&self) -> Vec<u32> {
        let mut v: Vec<u32> = self.terms.keys().map(Monomial::z_degree).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    pub fn add(&self, other: &Series) -> Result<Series> {
        self.check_meta(other)?;
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.accumulate(m.clone(), *c);
        }
        out.prune();
        Ok(out)
    }

    pub fn sub(&self, other: &Series) -> Result<Series> {
        self.check_meta(other)?;
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.accumulate(m.clone(), -*c);
        }
        out.prune();
        Ok(out)
    }

    pub fn scale(&self, c: C64) -> Series {
        let mut out = Series {
            meta: self.meta.clone(),
            terms: self.terms.iter().map(|(m, v)| (m.clone(), v * c)).collect(),
        };
        out.prune();
        out
    }

    pub fn neg(&self) -> Series {
        Series {
            meta: self.meta.clone(),
            terms: self.terms.iter().map(|(m, v)| (m.clone(), -v)).collect(),
        }
    }

    pub fn map_coeffs(&self, f: impl Fn(&Monomial, C64) -> C64) -> Series {
        let mut out = Series {
            meta: self.meta.clone(),
            terms: self
                .terms
                .iter()
                .map(|(m, v)| (m.clone(), f(m, *v)))
                .collect(),
        };
        out.prune();
        out
    }

    pub fn filter(&self, pred: impl Fn(&Monomial, &C64) -> bool) -> Series {
        Series {
            meta: self.meta.clone(),
            terms: self
                .terms
                .iter()
                .filter(|(m, c)| pred(m, c))
                .map(|(m, c)| (m.clone(), *c))
                .collect(),
        }
    }

    /// Splits into (matching, rest).
    pub fn partition(&self, pred: impl Fn(&Monomial, &C64) -> bool) -> (Series, Series) {
        let mut yes = Series::zero(self.meta.clone());
        let mut no = Series::zero(self.meta.clone());
        for (m, c) in &self.terms {
            if pred(m, c) {
                yes.terms.insert(m.clone(), *c);
            } else {
                no.terms.insert(m.clone(), *c);
            }
        }
        (yes, no)
    }

    /// Drops monomials of degree above `degree_cap` or Fourier order above
    /// `fourier_cap`. The metadata is left unchanged.
    pub fn truncate(&self, degree_cap: u32, fourier_cap: u32) -> Truncated<Series> {
        let (kept, dropped) =
            self.partition(|m, _| m.degree() <= degree_cap && m.fourier_order() <= fourier_cap);
        Truncated {
            value: kept,
            dropped_mass: dropped.l1_mass(),
        }
    }

    /// Re-homes the series on metadata with the same variables but other caps,
    /// dropping what no longer fits.
    pub fn recap(&self, meta: SeriesMeta) -> Result<Truncated<Series>> {
        if *meta.table != *self.meta.table {
            return Err(Error::MetaMismatch("different variable tables".into()));
        }
        let t = self.truncate(meta.degree_cap, meta.fourier_cap);
        Ok(Truncated {
            value: Series {
                meta,
                terms: t.value.terms,
            },
            dropped_mass: t.dropped_mass,
        })
    }

    /// Largest `|c(k,α,β,γ) − conj(c(−k,α,γ,β))|`; zero iff the series is real
    /// on points with `q̄ = conj(q)` and real `x`, `y`.
    pub fn reality_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for (m, c) in &self.terms {
            let partner = self.get(&m.conjugate_key());
            worst = worst.max((c - partner.conj()).norm());
        }
        worst
    }

    /// Terms whose momentum residual is nonzero.
    pub fn momentum_violations(&self) -> Vec<(Monomial, Vec<i64>)> {
        self.terms
            .keys()
            .filter_map(|m| {
                let r = m.momentum_residual(&self.meta.table);
                if r.iter().any(|&v| v != 0) {
                    Some((m.clone(), r))
                } else {
                    None
                }
            })
            .collect()
    }

    pub fn check_meta(&self, other: &Series) -> Result<()> {
        if self.meta != other.meta {
            return Err(Error::MetaMismatch(format!(
                "caps ({}, {}) vs ({}, {}) or differing site tables",
                self.meta.degree_cap,
                self.meta.fourier_cap,
                other.meta.degree_cap,
                other.meta.fourier_cap
            )));
        }
        Ok(())
    }

    /// A total order on series used to make bracket evaluation order
    /// independent of argument order.
    pub(crate) fn canonical_cmp(&self, other: &Series) -> Ordering {
        self.terms.len().cmp(&other.terms.len()).then_with(|| {
            for ((ma, ca), (mb, cb)) in self.terms.iter().zip(other.terms.iter()) {
                let o = ma
                    .cmp(mb)
                    .then(ca.re.to_bits().cmp(&cb.re.to_bits()))
                    .then(ca.im.to_bits().cmp(&cb.im.to_bits()));
                if o != Ordering::Equal {
                    return o;
                }
            }
            Ordering::Equal
        })
    }

    pub(crate) fn terms_vec(&self) -> Vec<(Monomial, C64)> {
        self.terms.iter().map(|(m, c)| (m.clone(), *c)).collect()
    }
}

/// Anything that yields a series for a given parameter vector `ξ`.
pub trait ParamSeries: Sync {
    fn at(&self, xi: &[f64]) -> Result<Series>;
    /// Whether the coefficients do not depend on `ξ`.
    fn is_constant(&self) -> bool {
        false
    }
}

impl ParamSeries for Series {
    fn at(&self, _xi: &[f64]) -> Result<Series> {
        Ok(self.clone())
    }
    fn is_constant(&self) -> bool {
        true
    }
}

impl<F> ParamSeries for F
where
    F: Fn(&[f64]) -> Result<Series> + Sync,
{
    fn at(&self, xi: &[f64]) -> Result<Series> {
        self(xi)
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn meta_1d() -> SeriesMeta {
        let table = SiteTable::new(
            1,
            vec![Site::new(vec![1])],
            vec![
                Site::new(vec![-2]),
                Site::new(vec![-1]),
                Site::new(vec![0]),
                Site::new(vec![2]),
            ],
        )
        .unwrap();
        SeriesMeta::new(Arc::new(table), 8, 6)
    }

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn exact_cancellation_removes_key() {
        let m = meta_1d();
        let a = Series::monomial(m.clone(), Monomial::q(1, 0), c(1.0)).unwrap();
        let b = Series::monomial(m, Monomial::q(1, 0), c(-1.0)).unwrap();
        assert!(a.add(&b).unwrap().is_empty());
    }

    #[test]
    fn doubling_an_action() {
        let m = meta_1d();
        let a = Series::monomial(m.clone(), Monomial::y(1, 0), c(1.0)).unwrap();
        let s = a.add(&a).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s.get(&Monomial::y(1, 0)), c(2.0));
    }

    #[test]
    fn meta_mismatch_is_rejected() {
        let m = meta_1d();
        let a = Series::constant(m.clone(), c(1.0));
        let b = Series::constant(m.with_caps(4, 6), c(1.0));
        assert!(matches!(a.add(&b), Err(Error::MetaMismatch(_))));
    }

    #[test]
    fn caps_are_enforced_on_construction() {
        let m = meta_1d().with_caps(2, 1);
        let cubic = Monomial::new(&[0], &[0], &[(0, 3)], &[]).unwrap();
        assert!(Series::monomial(m.clone(), cubic.clone(), c(1.0)).is_err());
        let t = Series::from_terms_truncating(m, [(cubic, c(-3.0))]).unwrap();
        assert!(t.value.is_empty());
        assert_eq!(t.dropped_mass, 3.0);
    }

    #[test]
    fn truncate_identity_when_caps_are_large() {
        let m = meta_1d();
        let s = Series::from_terms(
            m,
            [
                (Monomial::y(1, 0), c(1.0)),
                (Monomial::new(&[2], &[1], &[(1, 2)], &[]).unwrap(), c(0.5)),
            ],
        )
        .unwrap();
        let t = s.truncate(100, 100);
        assert_eq!(t.value, s);
        assert_eq!(t.dropped_mass, 0.0);
    }

    #[test]
    fn truncate_to_zero_degree_keeps_constant() {
        let m = meta_1d();
        let n = 1;
        let mut y2 = Monomial::one(n);
        y2.alpha[0] = 2;
        let s = Series::from_terms(
            m,
            [
                (Monomial::one(n), c(4.0)),
                (Monomial::y(n, 0), c(1.0)),
                (y2, c(-2.0)),
            ],
        )
        .unwrap();
        let t = s.truncate(0, 100);
        assert_eq!(t.value.len(), 1);
        assert_eq!(t.value.get(&Monomial::one(n)), c(4.0));
        assert_eq!(t.dropped_mass, 3.0);
    }

    #[test]
    fn reality_defect_detects_missing_partner() {
        let m = meta_1d();
        let s = Series::from_terms(
            m.clone(),
            [
                (
                    Monomial::new(&[1], &[0], &[(0, 1)], &[]).unwrap(),
                    C64::new(1.0, 2.0),
                ),
                (
                    Monomial::new(&[-1], &[0], &[], &[(0, 1)]).unwrap(),
                    C64::new(1.0, -2.0),
                ),
            ],
        )
        .unwrap();
        assert_eq!(s.reality_defect(), 0.0);
        let t = Series::monomial(m, Monomial::q(1, 0), c(1.0)).unwrap();
        assert_eq!(t.reality_defect(), 1.0);
    }
}
