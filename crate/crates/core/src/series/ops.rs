use std::cmp::Ordering;

use rayon::prelude::*;
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use super::monomial::{exps_dec, Monomial};
use super::{Series, SeriesMeta, Truncated, C64};
use crate::error::Result;

/// Work is split into chunks of this many left-hand terms. The chunking never
/// depends on the worker count, and partial results are merged in chunk
/// order, so sums are bit-identical however many threads run.
const CHUNK: usize = 256;

type Acc = FxHashMap<Monomial, C64>;

struct Indexed {
    terms: Vec<(Monomial, C64)>,
    degree: Vec<u32>,
}

impl Indexed {
    fn new(s: &Series) -> Self {
        let terms = s.terms_vec();
        let degree = terms.iter().map(|(m, _)| m.degree()).collect();
        Indexed { terms, degree }
    }
}

/// Chunks processed in parallel before their results are merged; bounds the
/// number of partial accumulators alive at once.
const BATCH: usize = 16;

/// Runs `f` over the chunks of `0..len` and merges the partial sums in chunk
/// order.
fn run_chunks<F>(meta: &SeriesMeta, len: usize, f: F) -> Truncated<Series>
where
    F: Fn(usize) -> (Acc, f64) + Sync,
{
    let chunks = len.div_ceil(CHUNK);
    let mut acc = Acc::default();
    let mut dropped = 0.0;
    let mut first = true;
    for start in (0..chunks).step_by(BATCH) {
        let parts: Vec<(Acc, f64)> = (start..(start + BATCH).min(chunks))
            .into_par_iter()
            .map(&f)
            .collect();
        for (part, d) in parts {
            dropped += d;
            if first {
                acc = part;
                first = false;
                continue;
            }
            // Merge in a fixed order: the chunk's entries sorted by key.
            let mut entries: Vec<_> = part.into_iter().collect();
            entries.sort_unstable_by(|a, b| a.0.cmp(&b.0));
            for (m, c) in entries {
                *acc.entry(m).or_insert(C64::new(0.0, 0.0)) += c;
            }
        }
    }
    let mut terms: Vec<_> = acc.into_iter().collect();
    terms.sort_unstable_by(|a, b| a.0.cmp(&b.0));
    Truncated {
        value: Series::from_sorted_unchecked(meta.clone(), terms),
        dropped_mass: dropped,
    }
}

fn fourier_sum(a: &Monomial, b: &Monomial) -> u32 {
    a.k.iter()
        .zip(&b.k)
        .map(|(x, y)| (x + y).unsigned_abs())
        .sum()
}

/// Product of two series. Terms beyond the caps are dropped; the reported
/// mass is the ℓ¹ sum of the dropped pairwise contributions.
pub fn multiply(a: &Series, b: &Series) -> Result<Truncated<Series>> {
    a.check_meta(b)?;
    let meta = a.meta().clone();
    let left = Indexed::new(a);
    let right = Indexed::new(b);
    Ok(run_chunks(&meta, left.terms.len(), |ci| {
        let chunk = &left.terms[ci * CHUNK..((ci + 1) * CHUNK).min(left.terms.len())];
        let mut acc = Acc::default();
        let mut dropped = 0.0;
        for (off, (ma, ca)) in chunk.iter().enumerate() {
            let da = left.degree[ci * CHUNK + off];
            for ((mb, cb), &db) in right.terms.iter().zip(&right.degree) {
                let c = ca * cb;
                if da + db > meta.degree_cap || fourier_sum(ma, mb) > meta.fourier_cap {
                    dropped += c.norm();
                    continue;
                }
                *acc.entry(ma.mul(mb)).or_insert(C64::new(0.0, 0.0)) += c;
            }
        }
        (acc, dropped)
    }))
}

/// Inverted index of a series by the variables its terms depend on.
struct VarIndex {
    by_q: Vec<Vec<u32>>,
    by_qbar: Vec<Vec<u32>>,
    by_y: Vec<Vec<u32>>,
    by_k: Vec<Vec<u32>>,
}

impl VarIndex {
    fn new(terms: &[(Monomial, C64)], n: usize, sites: usize) -> Self {
        let mut ix = VarIndex {
            by_q: vec![Vec::new(); sites],
            by_qbar: vec![Vec::new(); sites],
            by_y: vec![Vec::new(); n],
            by_k: vec![Vec::new(); n],
        };
        for (t, (m, _)) in terms.iter().enumerate() {
            let t = t as u32;
            for &(s, _) in &m.beta {
                ix.by_q[s as usize].push(t);
            }
            for &(s, _) in &m.gamma {
                ix.by_qbar[s as usize].push(t);
            }
            for i in 0..n {
                if m.alpha[i] > 0 {
                    ix.by_y[i].push(t);
                }
                if m.k[i] != 0 {
                    ix.by_k[i].push(t);
                }
            }
        }
        ix
    }
}

fn raw_bracket(u: &Series, v: &Series, prune: Prune) -> Truncated<Series> {
    let meta = u.meta().clone();
    let n = meta.n();
    let left = Indexed::new(u);
    let right = Indexed::new(v);
    let index = VarIndex::new(&right.terms, n, meta.table.len());
    let i_unit = C64::new(0.0, 1.0);

    run_chunks(&meta, left.terms.len(), |ci| {
        let chunk = &left.terms[ci * CHUNK..((ci + 1) * CHUNK).min(left.terms.len())];
        let mut acc = Acc::default();
        let mut dropped = 0.0;
        let mut seen = vec![u32::MAX; right.terms.len()];
        let mut cand: Vec<u32> = Vec::new();
        let mut contrib: Vec<(Kind, C64)> = Vec::new();
        for (off, (ma, ca)) in chunk.iter().enumerate() {
            let ia = (ci * CHUNK + off) as u32;
            let da = left.degree[ia as usize];
            cand.clear();
            let mut push = |list: &Vec<u32>, cand: &mut Vec<u32>| {
                for &t in list {
                    if seen[t as usize] != ia {
                        seen[t as usize] = ia;
                        cand.push(t);
                    }
                }
            };
            for &(s, _) in &ma.beta {
                push(&index.by_qbar[s as usize], &mut cand);
            }
            for &(s, _) in &ma.gamma {
                push(&index.by_q[s as usize], &mut cand);
            }
            for i in 0..n {
                if ma.k[i] != 0 {
                    push(&index.by_y[i], &mut cand);
                }
                if ma.alpha[i] > 0 {
                    push(&index.by_k[i], &mut cand);
                }
            }
            cand.sort_unstable();
            for &t in &cand {
                let (mb, cb) = &right.terms[t as usize];
                let cc = ca * cb;
                contrib.clear();
                for i in 0..n {
                    let w =
                        ma.k[i] as i64 * mb.alpha[i] as i64 - ma.alpha[i] as i64 * mb.k[i] as i64;
                    if w != 0 {
                        contrib.push((Kind::Y(i), i_unit * (w as f64) * cc));
                    }
                }
                for_each_z_slot(ma, |s, ba, ga| {
                    let w = ba as i64 * mb.power_qbar(s) as i64 - ga as i64 * mb.power_q(s) as i64;
                    if w != 0 {
                        contrib.push((Kind::Z(s), i_unit * (w as f64) * cc));
                    }
                });
                if contrib.is_empty() {
                    continue;
                }
                let db = right.degree[t as usize];
                if da + db - 2 > meta.degree_cap || fourier_sum(ma, mb) > meta.fourier_cap {
                    dropped += contrib.iter().map(|(_, c)| c.norm()).sum::<f64>();
                    continue;
                }
                let prod = ma.mul(mb);
                let prunable = da + db - 2 >= prune.min_degree;
                for &(kind, c) in &contrib {
                    if prunable && c.norm() < prune.floor {
                        dropped += c.norm();
                        continue;
                    }
                    let mut m = prod.clone();
                    match kind {
                        Kind::Y(i) => m.alpha[i] -= 1,
                        Kind::Z(s) => {
                            exps_dec(&mut m.beta, s);
                            exps_dec(&mut m.gamma, s);
                        }
                    }
                    *acc.entry(m).or_insert(C64::new(0.0, 0.0)) += c;
                }
            }
        }
        (acc, dropped)
    })
}

#[derive(Clone, Copy)]
enum Kind {
    Y(usize),
    Z(u32),
}

/// Calls `f(slot, β_slot, γ_slot)` for every slot where `β` or `γ` is nonzero.
fn for_each_z_slot(m: &Monomial, mut f: impl FnMut(u32, u16, u16)) {
    let (b, g) = (&m.beta, &m.gamma);
    let (mut i, mut j) = (0, 0);
    while i < b.len() || j < g.len() {
        if j >= g.len() || (i < b.len() && b[i].0 < g[j].0) {
            f(b[i].0, b[i].1, 0);
            i += 1;
        } else if i >= b.len() || g[j].0 < b[i].0 {
            f(g[j].0, 0, g[j].1);
            j += 1;
        } else {
            f(b[i].0, b[i].1, g[j].1);
            i += 1;
            j += 1;
        }
    }
}

/// Poisson bracket
/// `{U,V} = ⟨U_x,V_y⟩ − ⟨U_y,V_x⟩ + i Σ_j (U_{q_j} V_{q̄_j} − U_{q̄_j} V_{q_j})`,
/// truncated to the caps.
///
/// The evaluation order is fixed by a canonical ordering of the two
/// arguments, so `{V,U}` is exactly `−{U,V}` coefficient by coefficient.
pub fn poisson_bracket(u: &Series, v: &Series) -> Result<Truncated<Series>> {
    poisson_bracket_pruned(u, v, Prune::default())
}

/// Which single bracket contributions may be discarded.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Prune {
    /// Contributions of modulus below this are dropped...
    pub floor: f64,
    /// ...when they land on monomials of at least this degree.
    pub min_degree: u32,
}

/// Poisson bracket that also drops the contributions selected by `prune`;
/// their mass is added to the reported dropped mass.
pub fn poisson_bracket_pruned(u: &Series, v: &Series, prune: Prune) -> Result<Truncated<Series>> {
    u.check_meta(v)?;
    if u.is_empty() || v.is_empty() {
        return Ok(Truncated {
            value: Series::zero(u.meta().clone()),
            dropped_mass: 0.0,
        });
    }
    Ok(match u.canonical_cmp(v) {
        Ordering::Less => raw_bracket(u, v, prune),
        Ordering::Greater => {
            let t = raw_bracket(v, u, prune);
            Truncated {
                value: t.value.neg(),
                dropped_mass: t.dropped_mass,
            }
        }
        Ordering::Equal => Truncated {
            value: Series::zero(u.meta().clone()),
            dropped_mass: 0.0,
        },
    })
}
