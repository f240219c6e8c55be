use smallvec::SmallVec;

use super::site::SiteTable;
use crate::error::{Error, Result};

/// Sparse exponent map over normal-site slots, sorted by slot, no zero powers.
pub type Exps = SmallVec<[(u32, u16); 4]>;

/// The exponent data of a monomial `e^{i⟨k,x⟩} y^α q^β q̄^γ`.
///
/// Ordering is lexicographic over `(k, α, β, γ)` with `β`, `γ` sorted by slot,
/// which fixes serialization order and equality.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Monomial {
    pub k: SmallVec<[i32; 4]>,
    pub alpha: SmallVec<[u16; 4]>,
    pub beta: Exps,
    pub gamma: Exps,
}

impl Monomial {
    /// The constant monomial for `n` angles.
    pub fn one(n: usize) -> Self {
        Monomial {
            k: SmallVec::from_elem(0, n),
            alpha: SmallVec::from_elem(0, n),
            beta: Exps::new(),
            gamma: Exps::new(),
        }
    }

    pub fn new(
        k: &[i32],
        alpha: &[u16],
        beta: &[(u32, u16)],
        gamma: &[(u32, u16)],
    ) -> Result<Self> {
        if k.len() != alpha.len() {
            return Err(Error::Dimension(format!(
                "k has length {} but alpha has length {}",
                k.len(),
                alpha.len()
            )));
        }
        Ok(Monomial {
            k: k.iter().copied().collect(),
            alpha: alpha.iter().copied().collect(),
            beta: canonical_exps(beta),
            gamma: canonical_exps(gamma),
        })
    }

    pub fn y(n: usize, i: usize) -> Self {
        let mut m = Monomial::one(n);
        m.alpha[i] = 1;
        m
    }

    pub fn fourier(k: &[i32]) -> Self {
        let mut m = Monomial::one(k.len());
        m.k = k.iter().copied().collect();
        m
    }

    pub fn q(n: usize, slot: u32) -> Self {
        let mut m = Monomial::one(n);
        m.beta.push((slot, 1));
        m
    }

    pub fn qbar(n: usize, slot: u32) -> Self {
        let mut m = Monomial::one(n);
        m.gamma.push((slot, 1));
        m
    }

    /// `q_j q̄_j`.
    pub fn action(n: usize, slot: u32) -> Self {
        let mut m = Monomial::one(n);
        m.beta.push((slot, 1));
        m.gamma.push((slot, 1));
        m
    }

    pub fn n(&self) -> usize {
        self.k.len()
    }

    pub fn alpha_abs(&self) -> u32 {
        self.alpha.iter().map(|&a| a as u32).sum()
    }

    pub fn beta_abs(&self) -> u32 {
        exps_abs(&self.beta)
    }

    pub fn gamma_abs(&self) -> u32 {
        exps_abs(&self.gamma)
    }

    /// z-degree `|β| + |γ|`.
    pub fn z_degree(&self) -> u32 {
        self.beta_abs() + self.gamma_abs()
    }

    /// Total degree `2|α| + |β| + |γ|`.
    pub fn degree(&self) -> u32 {
        2 * self.alpha_abs() + self.z_degree()
    }

    /// Fourier order `|k| = Σ|k_i|`.
    pub fn fourier_order(&self) -> u32 {
        self.k.iter().map(|k| k.unsigned_abs()).sum()
    }

    pub fn is_constant(&self) -> bool {
        self.k.iter().all(|&k| k == 0)
            && self.alpha.iter().all(|&a| a == 0)
            && self.beta.is_empty()
            && self.gamma.is_empty()
    }

    /// `k = 0` and `β = γ`: the monomial depends on the actions only.
    pub fn is_normal(&self) -> bool {
        self.k.iter().all(|&k| k == 0) && self.beta == self.gamma
    }

    pub fn power_q(&self, slot: u32) -> u16 {
        exps_get(&self.beta, slot)
    }

    pub fn power_qbar(&self, slot: u32) -> u16 {
        exps_get(&self.gamma, slot)
    }

    /// Product monomial: exponents add.
    pub fn mul(&self, other: &Monomial) -> Monomial {
        Monomial {
            k: self.k.iter().zip(&other.k).map(|(a, b)| a + b).collect(),
            alpha: self
                .alpha
                .iter()
                .zip(&other.alpha)
                .map(|(a, b)| a + b)
                .collect(),
            beta: exps_add(&self.beta, &other.beta),
            gamma: exps_add(&self.gamma, &other.gamma),
        }
    }

    /// The monomial with `(k, α, γ, β)`: the key of the complex-conjugate term
    /// after negating `k`.
    pub fn conjugate_key(&self) -> Monomial {
        Monomial {
            k: self.k.iter().map(|k| -k).collect(),
            alpha: self.alpha.clone(),
            beta: self.gamma.clone(),
            gamma: self.beta.clone(),
        }
    }

    /// `β − γ` as a sparse signed map over slots.
    pub fn l_vector(&self) -> SmallVec<[(u32, i32); 4]> {
        let mut out = SmallVec::new();
        let (mut i, mut j) = (0, 0);
        let (b, g) = (&self.beta, &self.gamma);
        while i < b.len() || j < g.len() {
            if j >= g.len() || (i < b.len() && b[i].0 < g[j].0) {
                out.push((b[i].0, b[i].1 as i32));
                i += 1;
            } else if i >= b.len() || g[j].0 < b[i].0 {
                out.push((g[j].0, -(g[j].1 as i32)));
                j += 1;
            } else {
                let v = b[i].1 as i32 - g[j].1 as i32;
                if v != 0 {
                    out.push((b[i].0, v));
                }
                i += 1;
                j += 1;
            }
        }
        out
    }

    /// `Σ k_i j_i + Σ_j (β_j − γ_j) j`.
    pub fn momentum_residual(&self, table: &SiteTable) -> Vec<i64> {
        let mut out = vec![0i64; table.d()];
        for (ki, site) in self.k.iter().zip(table.tangential()) {
            for (o, c) in out.iter_mut().zip(site.coords()) {
                *o += *ki as i64 * *c as i64;
            }
        }
        for &(slot, p) in &self.beta {
            for (o, c) in out.iter_mut().zip(table.site(slot).coords()) {
                *o += p as i64 * *c as i64;
            }
        }
        for &(slot, p) in &self.gamma {
            for (o, c) in out.iter_mut().zip(table.site(slot).coords()) {
                *o -= p as i64 * *c as i64;
            }
        }
        out
    }

    pub fn satisfies_momentum(&self, table: &SiteTable) -> bool {
        self.momentum_residual(table).iter().all(|&v| v == 0)
    }
}

pub(crate) fn canonical_exps(e: &[(u32, u16)]) -> Exps {
    let mut v: Exps = e.iter().copied().filter(|&(_, p)| p > 0).collect();
    v.sort_unstable_by_key(|&(s, _)| s);
    let mut out = Exps::new();
    for (s, p) in v {
        match out.last_mut() {
            Some(last) if last.0 == s => last.1 += p,
            _ => out.push((s, p)),
        }
    }
    out
}

pub(crate) fn exps_abs(e: &Exps) -> u32 {
    e.iter().map(|&(_, p)| p as u32).sum()
}

pub(crate) fn exps_get(e: &Exps, slot: u32) -> u16 {
    match e.binary_search_by_key(&slot, |&(s, _)| s) {
        Ok(i) => e[i].1,
        Err(_) => 0,
    }
}

pub(crate) fn exps_add(a: &Exps, b: &Exps) -> Exps {
    let mut out = Exps::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        if j >= b.len() || (i < a.len() && a[i].0 < b[j].0) {
            out.push(a[i]);
            i += 1;
        } else if i >= a.len() || b[j].0 < a[i].0 {
            out.push(b[j]);
            j += 1;
        } else {
            out.push((a[i].0, a[i].1 + b[j].1));
            i += 1;
            j += 1;
        }
    }
    out
}

/// Lowers the power of `slot` by one. The caller guarantees it is present.
pub(crate) fn exps_dec(e: &mut Exps, slot: u32) {
    let i = e
        .binary_search_by_key(&slot, |&(s, _)| s)
        .expect("exponent present");
    if e[i].1 == 1 {
        e.remove(i);
    } else {
        e[i].1 -= 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::site::Site;

    #[test]
    fn degree_counts_actions_twice() {
        let m = Monomial::new(&[1, 0], &[1, 2], &[(0, 1)], &[(3, 2)]).unwrap();
        assert_eq!(m.degree(), 2 * 3 + 3);
        assert_eq!(m.z_degree(), 3);
        assert_eq!(m.fourier_order(), 1);
    }

    #[test]
    fn canonical_exponents_merge_and_sort() {
        let e = canonical_exps(&[(3, 1), (1, 2), (3, 2), (2, 0)]);
        assert_eq!(e.as_slice(), &[(1, 2), (3, 3)]);
    }

    #[test]
    fn l_vector_cancels_equal_powers() {
        let m = Monomial::new(&[], &[], &[(0, 2), (2, 1)], &[(0, 2), (1, 1)]).unwrap();
        assert_eq!(m.l_vector().as_slice(), &[(1, -1), (2, 1)]);
    }

    #[test]
    fn momentum_of_symmetric_monomial_vanishes() {
        let table = SiteTable::new(
            2,
            vec![Site::new(vec![1, 0])],
            vec![Site::new(vec![-1, 0]), Site::new(vec![0, 1])],
        )
        .unwrap();
        let m = Monomial::new(&[0], &[1], &[(0, 1), (1, 2)], &[(0, 1), (1, 2)]).unwrap();
        assert_eq!(m.momentum_residual(&table), vec![0, 0]);
    }

    #[test]
    fn momentum_tangential_plus_normal() {
        let table =
            SiteTable::new(2, vec![Site::new(vec![1, 0])], vec![Site::new(vec![-1, 0])]).unwrap();
        let m = Monomial::new(&[1], &[0], &[(0, 1)], &[]).unwrap();
        assert_eq!(m.momentum_residual(&table), vec![0, 0]);
        let m = Monomial::new(&[1], &[0], &[], &[(0, 1)]).unwrap();
        assert_eq!(m.momentum_residual(&table), vec![2, 0]);
    }
}
