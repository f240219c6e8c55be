use std::sync::Arc;

use kamstick_core::norms::{
    bracket_ratio, modulus, phase_norm_ordering, sample_domain_point, tame_operator_norm,
    vector_field_tame_norm, weighted_l2, BracketConstantReport, DomainParams, ParameterGrid,
    TameOptions,
};
use kamstick_core::series::random::{random_series, RandomSeriesSpec};
use kamstick_core::series::{CompiledSeries, EvalPoint, Series, SeriesMeta, Site, SiteTable, C64};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn meta() -> SeriesMeta {
    let table = SiteTable::new(
        2,
        vec![Site::new(vec![1, 0]), Site::new(vec![0, 1])],
        vec![
            Site::new(vec![0, 0]),
            Site::new(vec![-1, 0]),
            Site::new(vec![0, -1]),
            Site::new(vec![1, 1]),
            Site::new(vec![2, -1]),
        ],
    )
    .unwrap();
    SeriesMeta::new(Arc::new(table), 8, 6)
}

fn dp() -> DomainParams {
    DomainParams::new(0.5, 0.3, 3, 1).unwrap()
}

fn norm(s: &Series, dp: &DomainParams) -> f64 {
    vector_field_tame_norm(s, dp, &ParameterGrid::fixed(), &TameOptions::default())
        .unwrap()
        .value_upper
}

fn random(seed: u64, terms: usize) -> Series {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_series(&meta(), &RandomSeriesSpec::mixed(4, terms), &mut rng)
}

#[test]
fn tame_norm_is_a_seminorm() {
    let d = dp();
    for seed in 0..20 {
        let u = random(seed, 15);
        let v = random(100 + seed, 15);
        let (nu, nv) = (norm(&u, &d), norm(&v, &d));
        assert!(norm(&u.add(&v).unwrap(), &d) <= (nu + nv) * (1.0 + 1e-12));
        for lambda in [
            C64::new(3.0, 0.0),
            C64::new(0.0, -0.25),
            C64::new(-1.5, 2.0),
        ] {
            let scaled = norm(&u.scale(lambda), &d);
            assert!((scaled - lambda.norm() * nu).abs() <= 1e-12 * scaled.max(1.0));
        }
    }
}

#[test]
fn modulus_dominates_the_series() {
    let d = dp();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for seed in 0..10 {
        let u = random(seed, 20);
        let m = CompiledSeries::new(&modulus(&u, &d, &ParameterGrid::fixed()).unwrap());
        let cu = CompiledSeries::new(&u);
        for _ in 0..20 {
            let w = sample_domain_point(u.table(), &d, 0.9, &mut rng);
            let abs = EvalPoint {
                x: w.x.iter().map(|_| C64::new(0.0, 0.0)).collect(),
                y: w.y.iter().map(|_| C64::new(0.0, 0.0)).collect(),
                q: w.q.iter().map(|c| C64::new(c.norm(), 0.0)).collect(),
                qbar: w.qbar.iter().map(|c| C64::new(c.norm(), 0.0)).collect(),
            };
            let lhs = cu.value(&w).unwrap().norm();
            let rhs = m.value(&abs).unwrap().re;
            assert!(lhs <= rhs * (1.0 + 1e-12), "{lhs} > {rhs}");
        }
    }
}

#[test]
fn sampled_vector_field_stays_below_tame_bound() {
    let d = dp();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for seed in 0..20 {
        let u = random(seed, 20);
        let r = phase_norm_ordering(&u, &d, 50, 0.95, &TameOptions::default(), &mut rng).unwrap();
        assert_eq!(r.violations, 0, "{r:?}");
        assert!(r.sampled_sup > 0.0);
    }
}

#[test]
fn gradient_obeys_tame_operator_bound() {
    // ‖(W_h)_z(w)‖_{p+2} ≤ T_p ‖z‖_p ‖z‖_d^{h−2} for homogeneous W_h.
    let d = dp();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for h in 2..=4 {
        let u = random_series(&meta(), &RandomSeriesSpec::pure_z(h, 12), &mut rng);
        let t =
            tame_operator_norm(&u, &d, &ParameterGrid::fixed(), &TameOptions::default()).unwrap();
        assert!(t.value_lower <= t.value_upper);
        let cu = CompiledSeries::new(&u);
        let w8 = u.table().weights();
        for _ in 0..30 {
            let w = sample_domain_point(u.table(), &d, 0.9, &mut rng);
            let g = cu.gradient(&w).unwrap();
            let lhs = weighted_l2(&g.dq, &w8, f64::from(d.p) + 2.0)
                + weighted_l2(&g.dqbar, &w8, f64::from(d.p) + 2.0);
            let zp = weighted_l2(&w.q, &w8, d.p.into()) + weighted_l2(&w.qbar, &w8, d.p.into());
            let zd =
                weighted_l2(&w.q, &w8, d.dbase.into()) + weighted_l2(&w.qbar, &w8, d.dbase.into());
            let rhs = t.value_upper * zp * zd.powi(h as i32 - 2);
            assert!(lhs <= rhs * (1.0 + 1e-12), "h={h}: {lhs} > {rhs}");
        }
    }
}

#[test]
fn bracket_inequality_holds_with_one_constant() {
    // One C serves every setting; the σ-factor is right when the per-setting
    // constants do not grow as the shrinkage gets smaller.
    let d = dp();
    let reports: Vec<BracketConstantReport> = [(0.1, 0.05), (0.2, 0.1), (0.25, 0.15)]
        .into_iter()
        .map(|(sigma, sigma_r)| {
            let ratios = (0..100)
                .filter_map(|i| {
                    bracket_ratio(
                        &random(1000 + i, 10),
                        &random(2000 + i, 10),
                        &d,
                        sigma,
                        sigma_r,
                        &TameOptions::default(),
                    )
                    .unwrap()
                })
                .collect();
            BracketConstantReport::new(sigma, sigma_r, ratios)
        })
        .collect();
    let c = reports.iter().map(|r| r.c).fold(0.0, f64::max);
    assert!(reports.iter().all(|r| r.ratios.len() == 100));
    assert!(c > 0.0 && c.is_finite());
    for w in reports.windows(2) {
        assert!(w[0].c <= 1.2 * w[1].c, "{} vs {}", w[0].c, w[1].c);
    }
}
