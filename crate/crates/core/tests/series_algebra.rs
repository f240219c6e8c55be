use std::collections::BTreeMap;
use std::sync::Arc;

use kamstick_core::series::random::{random_series, RandomSeriesSpec};
use kamstick_core::series::{
    multiply, poisson_bracket, Monomial, Series, SeriesMeta, Site, SiteTable, C64,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn meta(degree_cap: u32) -> SeriesMeta {
    let table = SiteTable::new(
        2,
        vec![Site::new(vec![1, 0]), Site::new(vec![0, 1])],
        vec![
            Site::new(vec![0, 0]),
            Site::new(vec![-1, 0]),
            Site::new(vec![0, -1]),
            Site::new(vec![1, 1]),
            Site::new(vec![-1, -1]),
            Site::new(vec![1, -1]),
        ],
    )
    .unwrap();
    SeriesMeta::new(Arc::new(table), degree_cap, 12)
}

fn rand_series(seed: u64, degree: u32, terms: usize, momentum: bool) -> Series {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spec = RandomSeriesSpec {
        momentum,
        ..RandomSeriesSpec::mixed(degree, terms)
    };
    random_series(&meta(24), &spec, &mut rng)
}

/// Naive product: every pair, accumulated into an ordered map.
fn naive_product(a: &Series, b: &Series) -> BTreeMap<Monomial, C64> {
    let mut out = BTreeMap::new();
    for (ma, ca) in a.iter() {
        for (mb, cb) in b.iter() {
            *out.entry(ma.mul(mb)).or_insert(C64::new(0.0, 0.0)) += ca * cb;
        }
    }
    out
}

enum Var {
    X(usize),
    Y(usize),
    Q(u32),
    Qbar(u32),
}

/// Partial derivative computed term by term.
fn derivative(a: &Series, v: &Var) -> Vec<(Monomial, C64)> {
    let mut out = Vec::new();
    for (m, c) in a.iter() {
        let mut m2 = m.clone();
        let factor = match *v {
            Var::X(i) => {
                if m.k[i] == 0 {
                    continue;
                }
                C64::new(0.0, m.k[i] as f64)
            }
            Var::Y(i) => {
                if m.alpha[i] == 0 {
                    continue;
                }
                m2.alpha[i] -= 1;
                C64::new(m.alpha[i] as f64, 0.0)
            }
            Var::Q(s) => {
                let p = m.power_q(s);
                if p == 0 {
                    continue;
                }
                let beta: Vec<_> = m
                    .beta
                    .iter()
                    .map(|&(t, e)| if t == s { (t, e - 1) } else { (t, e) })
                    .collect();
                m2 = Monomial::new(&m.k, &m.alpha, &beta, &m.gamma).unwrap();
                C64::new(p as f64, 0.0)
            }
            Var::Qbar(s) => {
                let p = m.power_qbar(s);
                if p == 0 {
                    continue;
                }
                let gamma: Vec<_> = m
                    .gamma
                    .iter()
                    .map(|&(t, e)| if t == s { (t, e - 1) } else { (t, e) })
                    .collect();
                m2 = Monomial::new(&m.k, &m.alpha, &m.beta, &gamma).unwrap();
                C64::new(p as f64, 0.0)
            }
        };
        out.push((m2, factor * c));
    }
    out
}

/// Bracket assembled from derivative series and naive products.
fn naive_bracket(u: &Series, v: &Series) -> BTreeMap<Monomial, C64> {
    let mut out: BTreeMap<Monomial, C64> = BTreeMap::new();
    let mut add_products = |a: Vec<(Monomial, C64)>, b: Vec<(Monomial, C64)>, w: C64| {
        for (ma, ca) in &a {
            for (mb, cb) in &b {
                *out.entry(ma.mul(mb)).or_insert(C64::new(0.0, 0.0)) += w * ca * cb;
            }
        }
    };
    let one = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    for k in 0..u.n() {
        add_products(derivative(u, &Var::X(k)), derivative(v, &Var::Y(k)), one);
        add_products(derivative(u, &Var::Y(k)), derivative(v, &Var::X(k)), -one);
    }
    for s in 0..u.table().len() as u32 {
        add_products(derivative(u, &Var::Q(s)), derivative(v, &Var::Qbar(s)), i);
        add_products(derivative(u, &Var::Qbar(s)), derivative(v, &Var::Q(s)), -i);
    }
    out
}

fn max_rel_diff(a: &Series, b: &BTreeMap<Monomial, C64>) -> f64 {
    let scale = a.l1_mass().max(1e-300);
    let mut worst = 0.0f64;
    for (m, c) in b {
        worst = worst.max((a.get(m) - c).norm());
    }
    for (m, c) in a.iter() {
        if !b.contains_key(m) {
            worst = worst.max(c.norm());
        }
    }
    worst / scale
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn add_commutes(s1 in any::<u64>(), s2 in any::<u64>()) {
        let a = rand_series(s1, 5, 15, false);
        let b = rand_series(s2, 5, 15, false);
        prop_assert_eq!(a.add(&b).unwrap(), b.add(&a).unwrap());
    }

    #[test]
    fn product_matches_double_loop(s1 in any::<u64>(), s2 in any::<u64>()) {
        let a = rand_series(s1, 5, 12, false);
        let b = rand_series(s2, 5, 12, false);
        let p = multiply(&a, &b).unwrap();
        prop_assert_eq!(p.dropped_mass, 0.0);
        prop_assert!(max_rel_diff(&p.value, &naive_product(&a, &b)) < 1e-14);
    }

    #[test]
    fn bracket_matches_derivative_oracle(s1 in any::<u64>(), s2 in any::<u64>()) {
        let a = rand_series(s1, 5, 12, false);
        let b = rand_series(s2, 5, 12, false);
        let br = poisson_bracket(&a, &b).unwrap();
        prop_assert_eq!(br.dropped_mass, 0.0);
        prop_assert!(max_rel_diff(&br.value, &naive_bracket(&a, &b)) < 1e-14);
    }

    #[test]
    fn bracket_is_exactly_antisymmetric(s1 in any::<u64>(), s2 in any::<u64>()) {
        let a = rand_series(s1, 5, 20, false);
        let b = rand_series(s2, 5, 20, false);
        let ab = poisson_bracket(&a, &b).unwrap().value;
        let ba = poisson_bracket(&b, &a).unwrap().value;
        prop_assert_eq!(ab, ba.neg());
    }

    #[test]
    fn bracket_with_itself_vanishes(s1 in any::<u64>()) {
        let a = rand_series(s1, 5, 20, false);
        prop_assert!(poisson_bracket(&a, &a).unwrap().value.is_empty());
    }

    #[test]
    fn leibniz_rule(s1 in any::<u64>(), s2 in any::<u64>(), s3 in any::<u64>()) {
        let u = rand_series(s1, 4, 8, false);
        let v = rand_series(s2, 4, 8, false);
        let w = rand_series(s3, 4, 8, false);
        let lhs = poisson_bracket(&multiply(&u, &v).unwrap().value, &w).unwrap().value;
        let r1 = multiply(&u, &poisson_bracket(&v, &w).unwrap().value).unwrap().value;
        let r2 = multiply(&poisson_bracket(&u, &w).unwrap().value, &v).unwrap().value;
        let rhs = r1.add(&r2).unwrap();
        let diff = lhs.sub(&rhs).unwrap().l1_mass();
        prop_assert!(diff <= 1e-12 * (lhs.l1_mass() + rhs.l1_mass()).max(1e-300));
    }

    #[test]
    fn momentum_rule_is_closed(s1 in any::<u64>(), s2 in any::<u64>()) {
        let u = rand_series(s1, 5, 15, true);
        let v = rand_series(s2, 5, 15, true);
        prop_assert!(u.momentum_violations().is_empty());
        prop_assert!(v.momentum_violations().is_empty());
        prop_assert!(multiply(&u, &v).unwrap().value.momentum_violations().is_empty());
        prop_assert!(poisson_bracket(&u, &v).unwrap().value.momentum_violations().is_empty());
    }

    #[test]
    fn truncation_reports_l1_difference(s1 in any::<u64>(), cap in 0u32..6, fcap in 0u32..4) {
        let a = rand_series(s1, 6, 30, false);
        let t = a.truncate(cap, fcap);
        let dropped = a.sub(&t.value).unwrap();
        prop_assert!((t.dropped_mass - dropped.l1_mass()).abs() <= 1e-15 * a.l1_mass());
        for (m, _) in t.value.iter() {
            prop_assert!(m.degree() <= cap && m.fourier_order() <= fcap);
        }
    }
}

#[test]
fn jacobi_identity_on_random_triples() {
    for seed in 0..40u64 {
        let u = rand_series(3 * seed, 5, 6, false);
        let v = rand_series(3 * seed + 1, 5, 6, false);
        let w = rand_series(3 * seed + 2, 5, 6, false);
        let b = |a: &Series, c: &Series| poisson_bracket(a, c).unwrap().value;
        let t1 = b(&u, &b(&v, &w));
        let t2 = b(&v, &b(&w, &u));
        let t3 = b(&w, &b(&u, &v));
        let total = t1.add(&t2).unwrap().add(&t3).unwrap();
        let scale = t1.l1_mass() + t2.l1_mass() + t3.l1_mass();
        assert!(total.l1_mass() <= 1e-12 * scale.max(1e-300), "seed {seed}");
    }
}

#[test]
fn bracket_results_do_not_depend_on_thread_count() {
    let a = rand_series(91, 5, 600, false);
    let b = rand_series(92, 5, 600, false);
    let one = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap();
    let three = rayon::ThreadPoolBuilder::new()
        .num_threads(3)
        .build()
        .unwrap();
    let r1 = one.install(|| poisson_bracket(&a, &b).unwrap().value);
    let r3 = three.install(|| poisson_bracket(&a, &b).unwrap().value);
    assert_eq!(r1.to_text(), r3.to_text());
}
