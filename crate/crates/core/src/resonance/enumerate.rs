use serde::{Deserialize, Serialize};

use super::{QueryClass, ResonanceQuery};
use crate::model::SiteLattice;

/// Materialized enumeration.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct QuerySet {
    pub queries: Vec<ResonanceQuery>,
    pub pruned_count: u64,
}

/// Enumerates all queries with `|k| ≤ k_max`, `|l̃| + |l̂| ≤ M + 2`,
/// `|l̂| ≤ 2`, one representative per `±` pair.
pub fn enumerate_queries(
    lattice: &SiteLattice,
    m_order: u32,
    k_max: u32,
    param_box: [f64; 2],
) -> QuerySet {
    let mut queries = Vec::new();
    let pruned_count = for_each_query(lattice, m_order, k_max, param_box, 0.0, |q| {
        queries.push(q.clone())
    });
    QuerySet {
        queries,
        pruned_count,
    }
}

/// Affine form `c0 + Σ c·ξ` bounded over the parameter box.
#[derive(Clone, Copy, Default)]
struct Range {
    c0: f64,
    lo: f64,
    hi: f64,
}

impl Range {
    fn add_term(&mut self, coeff: i32, sq: i64, box_: [f64; 2]) {
        let c = f64::from(coeff);
        self.c0 += c * sq as f64;
        let (a, b) = (c * box_[0], c * box_[1]);
        self.lo += a.min(b);
        self.hi += a.max(b);
    }
}

/// Streams the queries that can be small somewhere in the box, returning the
/// number of queries discarded because `|divisor| ≥ 1` on the whole box.
/// `margin` bounds the size of any frequency correction.
pub fn for_each_query(
    lattice: &SiteLattice,
    m_order: u32,
    k_max: u32,
    param_box: [f64; 2],
    margin: f64,
    mut f: impl FnMut(&ResonanceQuery),
) -> u64 {
    let n = lattice.n();
    let ks = all_k(n, k_max);
    let k_ranges: Vec<Range> = ks
        .iter()
        .map(|k| {
            let mut r = Range::default();
            for (i, &c) in k.iter().enumerate() {
                r.add_term(c, lattice.tangential[i].norm2_sq(), param_box);
            }
            r
        })
        .collect();
    let k_abs: Vec<u32> = ks
        .iter()
        .map(|k| k.iter().map(|c| c.unsigned_abs()).sum())
        .collect();

    let mut pruned = 0u64;
    let mut query = ResonanceQuery {
        k: vec![0; n],
        l_low: Vec::new(),
        l_high: Vec::new(),
        class: QueryClass::L0,
    };
    let mut l: Vec<(u32, i32)> = Vec::new();
    let budget = m_order + 2;
    walk_l(lattice, 0, budget, 2, &mut l, &mut |l| {
        let mut lr = Range::default();
        let mut l_abs = 0;
        for &(s, c) in l {
            lr.add_term(c, lattice.normal[s as usize].norm2_sq(), param_box);
            l_abs += c.unsigned_abs();
        }
        let l_positive = l.first().map(|&(_, c)| c > 0);
        query.l_low.clear();
        query.l_high.clear();
        for &(s, c) in l {
            if lattice.is_low[s as usize] {
                query.l_low.push((s, c));
            } else {
                query.l_high.push((s, c));
            }
        }
        query.class = QueryClass::of(&query.l_high).expect("high budget is 2");
        for (ki, k) in ks.iter().enumerate() {
            // One representative of ±(k, l): first nonzero entry positive.
            let positive = match k.iter().find(|&&c| c != 0) {
                Some(&c) => c > 0,
                None => match l_positive {
                    Some(p) => p,
                    None => continue,
                },
            };
            if !positive {
                continue;
            }
            let kr = &k_ranges[ki];
            let slack = margin * f64::from(k_abs[ki] + l_abs);
            let lo = kr.c0 + lr.c0 + kr.lo + lr.lo - slack;
            let hi = kr.c0 + lr.c0 + kr.hi + lr.hi + slack;
            if lo >= 1.0 || hi <= -1.0 {
                pruned += 1;
                continue;
            }
            query.k.copy_from_slice(k);
            f(&query);
        }
    });
    pruned
}

fn all_k(n: usize, k_max: u32) -> Vec<Vec<i32>> {
    let mut out = Vec::new();
    let mut cur = vec![0i32; n];
    fn rec(i: usize, rem: i32, cur: &mut Vec<i32>, out: &mut Vec<Vec<i32>>) {
        if i == cur.len() {
            out.push(cur.clone());
            return;
        }
        for c in -rem..=rem {
            cur[i] = c;
            rec(i + 1, rem - c.abs(), cur, out);
        }
        cur[i] = 0;
    }
    rec(0, k_max as i32, &mut cur, &mut out);
    out
}

/// Sparse integer vectors over the normal slots from `slot` on, with total
/// size at most `budget` and at most `high` on high sites.
fn walk_l(
    lattice: &SiteLattice,
    slot: usize,
    budget: u32,
    high: u32,
    l: &mut Vec<(u32, i32)>,
    f: &mut dyn FnMut(&[(u32, i32)]),
) {
    f(l);
    for s in slot..lattice.normal.len() {
        let is_low = lattice.is_low[s];
        let cap = if is_low { budget } else { budget.min(high) };
        for mag in 1..=cap {
            for sign in [1, -1] {
                l.push((s as u32, sign * mag as i32));
                let high_left = if is_low { high } else { high - mag };
                walk_l(lattice, s + 1, budget - mag, high_left, l, f);
                l.pop();
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_sites, ModelConfig};

    #[test]
    fn k_vectors_in_the_l1_ball() {
        assert_eq!(all_k(1, 2).len(), 5);
        assert_eq!(all_k(2, 1).len(), 5);
        assert_eq!(all_k(2, 2).len(), 13);
    }

    #[test]
    fn l_vectors_are_distinct() {
        let l = build_sites(&ModelConfig {
            d: 1,
            j_max: 2.0,
            tangential: vec![vec![1]],
            low_cutoff: 1.0,
            ..ModelConfig::default()
        })
        .unwrap();
        let mut seen = std::collections::BTreeSet::new();
        let mut v = Vec::new();
        walk_l(&l, 0, 2, 2, &mut v, &mut |l| {
            assert!(seen.insert(l.to_vec()));
        });
        // Four sites, |l| ≤ 2: 1 + 8 + (4·2 + C(4,2)·4) = 41.
        assert_eq!(seen.len(), 41);
    }
}
