use std::collections::BTreeSet;
use std::sync::Arc;

use kamstick_core::model::{assemble_hamiltonian, build_sites, Hamiltonian};
use kamstick_core::normal_form::{
    compose_transform, compose_transform_eval, lie_transform, order2_step, partial_normal_form,
    read_frequencies, solve_homological, Direction, DivisorPolicy, FlowOptions, LieOptions,
    NormalFormConfig, PartialConfig,
};
use kamstick_core::norms::{
    sample_domain_point, vector_field_tame_norm, DomainParams, ParameterGrid,
};
use kamstick_core::resonance::fit_power_law;
use kamstick_core::series::random::{random_series, RandomSeriesSpec};
use kamstick_core::series::{
    vector_field, CompiledSeries, EvalPoint, Monomial, PhasePoint, Series, SeriesMeta, Site,
    SiteTable, C64,
};
use kamstick_core::Error;
use rand::{Rng, SeedableRng};

mod common;
use common::{desk, desk_model, desk_xi};
use rand_chacha::ChaCha8Rng;

fn small_meta(degree_cap: u32, fourier_cap: u32) -> SeriesMeta {
    let table = SiteTable::new(
        2,
        vec![Site::new(vec![1, 0]), Site::new(vec![0, 1])],
        vec![
            Site::new(vec![0, 0]),
            Site::new(vec![-1, 0]),
            Site::new(vec![0, -1]),
            Site::new(vec![1, 1]),
        ],
    )
    .unwrap();
    SeriesMeta::new(Arc::new(table), degree_cap, fourier_cap)
}

fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

fn rel_err(a: C64, b: C64) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

#[test]
fn homological_residual_on_random_input() {
    let meta = small_meta(6, 6);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..10 {
        let r = random_series(&meta, &RandomSeriesSpec::mixed(4, 40), &mut rng);
        let omega: Vec<f64> = (0..2).map(|_| rng.gen_range(1.0..3.0)).collect();
        let big: Vec<f64> = (0..4).map(|_| rng.gen_range(0.5..9.0)).collect();
        let out = solve_homological(&r, &omega, &big, &DivisorPolicy::default()).unwrap();
        assert!(out.residual <= 1e-10, "{}", out.residual);
        let solved: BTreeSet<_> = out.f.iter().map(|(m, _)| m.clone()).collect();
        let left: BTreeSet<_> = out.unresolved.iter().map(|(m, _)| m.clone()).collect();
        let all: BTreeSet<_> = r.iter().map(|(m, _)| m.clone()).collect();
        assert!(solved.is_disjoint(&left));
        assert_eq!(&solved | &left, all);
        for (m, _) in out.unresolved.iter() {
            assert!(
                m.is_normal(),
                "only D = 0 terms stay at generic frequencies"
            );
        }
    }
}

#[test]
fn lie_transform_matches_hand_expansion() {
    // H = y_0², F = c e^{i x_0} q_0³: {H, F} = −2ic y_0 e^{i x_0} q_0³,
    // {{H, F}, F} = −2c² e^{2i x_0} q_0⁶ and the third bracket vanishes.
    let meta = small_meta(8, 4);
    let h = Series::monomial(
        meta.clone(),
        Monomial::new(&[0, 0], &[2, 0], &[], &[]).unwrap(),
        re(1.0),
    )
    .unwrap();
    let c = C64::new(0.2, -0.1);
    let f = Series::monomial(
        meta.clone(),
        Monomial::new(&[1, 0], &[0, 0], &[(0, 3)], &[]).unwrap(),
        c,
    )
    .unwrap();
    let out = lie_transform(&h, &f, &LieOptions::default()).unwrap();
    let expected = Series::from_terms(
        meta,
        [
            (Monomial::new(&[0, 0], &[2, 0], &[], &[]).unwrap(), re(1.0)),
            (
                Monomial::new(&[1, 0], &[1, 0], &[(0, 3)], &[]).unwrap(),
                C64::new(0.0, -2.0) * c,
            ),
            (
                Monomial::new(&[2, 0], &[0, 0], &[(0, 6)], &[]).unwrap(),
                -c * c,
            ),
        ],
    )
    .unwrap();
    assert!(out.value.sub(&expected).unwrap().l1_mass() < 1e-16);
    assert_eq!(out.iterations, 3);
    assert_eq!(out.dropped_mass, 0.0);
}

/// Time-1 flow of `f` by classical Runge–Kutta on the uncompiled vector field.
fn flow_oracle(f: &Series, w: &EvalPoint, steps: usize) -> EvalPoint {
    let h = 1.0 / steps as f64;
    let mut w = w.clone();
    for _ in 0..steps {
        let k1 = vector_field(f, &w).unwrap();
        let k2 = vector_field(f, &w.add_scaled(h / 2.0, &k1)).unwrap();
        let k3 = vector_field(f, &w.add_scaled(h / 2.0, &k2)).unwrap();
        let k4 = vector_field(f, &w.add_scaled(h, &k3)).unwrap();
        let s = k1
            .add_scaled(2.0, &k2)
            .add_scaled(2.0, &k3)
            .add_scaled(1.0, &k4);
        w = w.add_scaled(h / 6.0, &s);
    }
    w
}

#[test]
fn lie_transform_equals_composition_with_flow() {
    let meta = small_meta(16, 24);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let dp = DomainParams::new(0.2, 0.3, 2, 1).unwrap();
    for _ in 0..4 {
        let h = random_series(
            &meta,
            &RandomSeriesSpec {
                max_fourier: 1,
                ..RandomSeriesSpec::mixed(4, 12)
            },
            &mut rng,
        );
        let f = random_series(
            &meta,
            &RandomSeriesSpec {
                min_z: 3,
                max_z: 4,
                max_alpha: 0,
                max_fourier: 1,
                scale: 0.3,
                ..RandomSeriesSpec::mixed(4, 6)
            },
            &mut rng,
        );
        let lie = lie_transform(&h, &f, &LieOptions::default()).unwrap();
        for _ in 0..5 {
            let w = sample_domain_point(meta.table.as_ref(), &dp, 0.5, &mut rng);
            let lhs = lie.value.evaluate(&w).unwrap();
            let rhs = h.evaluate(&flow_oracle(&f, &w, 400)).unwrap();
            assert!(rel_err(lhs, rhs) < 1e-8, "{lhs} vs {rhs}");
        }
    }
}

fn toy_hamiltonian(p: Series) -> Hamiltonian {
    let meta = p.meta().clone();
    let n = Series::normal_form(meta, &[1.3, 2.7], &[0.55, 1.9, 3.1, 4.45]).unwrap();
    Hamiltonian { n, p }
}

#[test]
fn order2_removes_a_single_term_in_one_sweep() {
    let meta = small_meta(6, 6);
    let c = C64::new(3e-6, 1e-6);
    let m = Monomial::new(&[1, 0], &[1, 0], &[], &[]).unwrap();
    let p = Series::from_terms(meta, [(m.conjugate_key(), c.conj()), (m, c)]).unwrap();
    let ham = toy_hamiltonian(p);
    let cfg = NormalFormConfig {
        sweeps: 1,
        ..NormalFormConfig::default()
    };
    let out = order2_step(&ham, &[], &cfg).unwrap();
    assert_eq!(out.generators.len(), 1);
    assert!(out.log.residual_mass <= 1e-10);
    assert!(out.log.max_homological_residual <= 1e-10);
    let check = out.n_breve.add(&out.r_breve).unwrap();
    assert!(check
        .iter()
        .all(|(m, c)| !(m.degree() <= 2 && !m.is_normal()) || c.norm() <= 1e-10));
}

#[test]
fn order2_is_identity_on_high_order_perturbations() {
    let meta = small_meta(6, 6);
    let p = Series::from_terms(
        meta,
        [
            (Monomial::new(&[0, 0], &[2, 0], &[], &[]).unwrap(), re(0.1)),
            (
                Monomial::new(&[1, 0], &[0, 0], &[(1, 2)], &[(2, 1)]).unwrap(),
                re(0.01),
            ),
        ],
    )
    .unwrap();
    let ham = toy_hamiltonian(p.clone());
    let out = order2_step(&ham, &[], &NormalFormConfig::default()).unwrap();
    assert!(out.generators.is_empty());
    assert_eq!(out.r_breve, p);
    assert!(out
        .shifts
        .d_omega
        .iter()
        .chain(&out.shifts.d_big_omega)
        .all(|&s| s == 0.0));
}

#[test]
fn order2_reports_divisor_collapse() {
    let meta = small_meta(6, 6);
    // q_1 q̄_2 with Ω_1 = Ω_2: D = 0.
    let m = Monomial::new(&[0, 0], &[0, 0], &[(1, 1)], &[(2, 1)]).unwrap();
    let p =
        Series::from_terms(meta.clone(), [(m.conjugate_key(), re(1e-6)), (m, re(1e-6))]).unwrap();
    let n = Series::normal_form(meta, &[1.3, 2.7], &[0.55, 1.9, 1.9, 4.45]).unwrap();
    let err = order2_step(&Hamiltonian { n, p }, &[], &NormalFormConfig::default()).unwrap_err();
    assert!(matches!(err, Error::DivisorCollapse { count: 2, .. }));
}

#[test]
fn frequency_shifts_scale_linearly_in_eps() {
    let epsilons = [1e-4, 1e-5, 1e-6];
    let mut sizes = Vec::new();
    for &eps in &epsilons {
        let cfg = desk_model(eps);
        let l = build_sites(&cfg).unwrap();
        let xi = desk_xi(&l);
        let dp = DomainParams::new(0.5, 0.5, 3, 2).unwrap();
        let (ham, _) = assemble_hamiltonian(&cfg, &l, &xi, &dp).unwrap();
        let out = order2_step(&ham, &xi, &NormalFormConfig::default()).unwrap();
        assert!(out.log.residual_mass <= 1e-10);
        let s = &out.shifts;
        sizes.push(
            s.d_omega
                .iter()
                .chain(&s.d_big_omega)
                .fold(0.0f64, |m, v| m.max(v.abs())),
        );
    }
    let (slope, _) = fit_power_law(&epsilons, &sizes).unwrap();
    assert!((slope - 1.0).abs() < 0.1, "slope {slope}");
}

#[test]
fn desk_order2_leaves_no_low_order_terms() {
    let d = desk();
    assert!(d.o2.log.residual_mass <= 1e-10);
    assert!(d.o2.log.max_homological_residual <= 1e-10);
    let (omega, big) = read_frequencies(&d.o2.n_breve);
    let (omega0, big0) = read_frequencies(&d.ham.n);
    for (i, (a, b)) in omega.iter().zip(&omega0).enumerate() {
        assert_eq!(a - b, d.o2.shifts.d_omega[i]);
    }
    assert_eq!(big.len(), big0.len());
}

#[test]
fn zero_order_window_leaves_z_empty() {
    let d = desk();
    let pcfg = PartialConfig {
        m_order: 0,
        ..PartialConfig::default()
    };
    let out = partial_normal_form(&d.o2, &d.lattice, &pcfg, &NormalFormConfig::default()).unwrap();
    assert!(out.z.is_empty());
    assert!(out.generators.is_empty());
}

#[test]
fn integrable_term_lands_in_z() {
    let d = desk();
    let meta = d.ham.meta().clone();
    let y2 = Series::monomial(
        meta.clone(),
        Monomial::new(&[0, 0], &[2, 0], &[], &[]).unwrap(),
        re(0.01),
    )
    .unwrap();
    let ham = Hamiltonian {
        n: d.ham.n.clone(),
        p: y2.clone(),
    };
    let nf = NormalFormConfig::default();
    let o2 = order2_step(&ham, &[], &nf).unwrap();
    let out = partial_normal_form(&o2, &d.lattice, &PartialConfig::default(), &nf).unwrap();
    assert_eq!(out.z, y2);
    assert!(out.p.is_empty() && out.q.is_empty() && out.unresolved.is_empty());
}

#[test]
fn desk_decomposition_satisfies_class_invariants() {
    let d = desk();
    let is_low = &d.lattice.is_low;
    let hm = |m: &Monomial| kamstick_core::normal_form::high_mode_count(m, is_low);
    for (m, _) in d.pnf.z.iter() {
        assert!(m.is_normal() && hm(m) <= 2 && (4..=4).contains(&m.degree()));
    }
    for (m, _) in d.pnf.p.iter() {
        assert!(m.degree() >= 5 && hm(m) <= 2);
    }
    for (m, _) in d.pnf.q.iter() {
        assert!(hm(m) >= 3);
    }
    assert!(!d.pnf.z.is_empty() && !d.pnf.p.is_empty() && !d.pnf.q.is_empty());
    assert!(d.pnf.log.max_homological_residual <= 1e-10);
}

#[test]
fn momentum_rule_holds_through_the_pipeline() {
    let d = desk();
    let mut all: Vec<&Series> = vec![&d.ham.p, &d.o2.n_breve, &d.o2.r_breve];
    all.extend(&d.o2.generators);
    all.extend(&d.pnf.generators);
    all.extend([&d.pnf.z, &d.pnf.p, &d.pnf.q, &d.pnf.unresolved]);
    for s in all {
        assert!(s.momentum_violations().is_empty());
    }
}

fn conjugacy_errors(h0: &Series, hf: &Series, gens: &[Series], seed: u64) -> (f64, f64) {
    let c0 = CompiledSeries::new(h0);
    let cf = CompiledSeries::new(hf);
    let dp = DomainParams::new(0.1, 0.05, 3, 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut identity = 0.0f64;
    for _ in 0..20 {
        let w = sample_domain_point(h0.table(), &dp, 0.5, &mut rng);
        let psi =
            compose_transform_eval(gens, &w, Direction::Forward, &FlowOptions::default()).unwrap();
        let expected = c0.value(&psi.point).unwrap();
        worst = worst.max(rel_err(cf.value(&w).unwrap(), expected));
        identity = identity.max(rel_err(cf.value(&w).unwrap(), c0.value(&w).unwrap()));
    }
    (worst, identity)
}

#[test]
fn transformed_hamiltonians_are_conjugate() {
    let d = desk();
    let h1 = d.o2.n_breve.add(&d.o2.r_breve).unwrap();
    let (err, id) = conjugacy_errors(&d.ham.total(), &h1, &d.o2.generators, 1);
    assert!(err < 1e-8, "order-2 step: {err}");
    assert!(
        id > 100.0 * err,
        "identity map is not distinguishable: {id} vs {err}"
    );
    let (err, id) = conjugacy_errors(&h1, &d.pnf.total().unwrap(), &d.pnf.generators, 2);
    assert!(err < 1e-8, "partial step: {err}");
    assert!(
        id > 100.0 * err,
        "identity map is not distinguishable: {id} vs {err}"
    );
}

#[test]
fn composed_transform_round_trips_and_respects_displacement_bound() {
    let d = desk();
    let gens: Vec<Series> =
        d.o2.generators
            .iter()
            .chain(&d.pnf.generators)
            .cloned()
            .collect();
    let dp = NormalFormConfig::default().norm_domain;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let bound: f64 = gens
        .iter()
        .map(|g| {
            vector_field_tame_norm(g, &dp, &ParameterGrid::fixed(), &Default::default())
                .unwrap()
                .value_upper
        })
        .sum();
    let opts = FlowOptions {
        domain: Some(dp),
        ..FlowOptions::default()
    };
    for _ in 0..5 {
        let w = sample_domain_point(d.ham.n.table(), &dp, 0.5, &mut rng);
        let fwd = compose_transform_eval(&gens, &w, Direction::Forward, &opts).unwrap();
        assert!(fwd.displacement <= bound, "{} > {bound}", fwd.displacement);
        let back = compose_transform_eval(&gens, &fwd.point, Direction::Inverse, &opts).unwrap();
        assert!(back.point.max_abs_diff(&w) < 1e-8);
    }
    let real = PhasePoint::new(
        vec![0.3, 1.2],
        vec![1e-4, -2e-4],
        vec![C64::new(1e-3, -2e-3); d.ham.n.table().len()],
    );
    let there =
        compose_transform(&gens, &real, Direction::Forward, &FlowOptions::default()).unwrap();
    let back =
        compose_transform(&gens, &there, Direction::Inverse, &FlowOptions::default()).unwrap();
    assert!(back.to_eval().max_abs_diff(&real.to_eval()) < 1e-8);
}

#[test]
fn transform_leaving_domain_is_reported() {
    let d = desk();
    let dp = DomainParams::new(0.5, 0.01, 3, 2).unwrap();
    let w = PhasePoint::new(
        vec![0.0, 0.0],
        vec![0.0, 0.0],
        vec![C64::new(1.0, 0.0); d.ham.n.table().len()],
    );
    let opts = FlowOptions {
        domain: Some(dp),
        ..FlowOptions::default()
    };
    let err = compose_transform(&d.o2.generators, &w, Direction::Forward, &opts).unwrap_err();
    assert!(matches!(err, Error::OutsideDomain(_)));
}

#[test]
fn z_part_is_integrable() {
    let d = desk();
    let z = CompiledSeries::new(&d.pnf.z);
    let sites = d.ham.n.table().len();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..5 {
        let q: Vec<C64> = (0..sites)
            .map(|_| C64::from_polar(rng.gen_range(0.0..0.05), rng.gen_range(0.0..6.0)))
            .collect();
        let w = PhasePoint::new(vec![0.4, 2.0], vec![1e-3, -5e-4], q.clone());
        let v = z.vector_field(&w.to_eval()).unwrap();
        // Rotate every phase and shift the angles.
        let rotated = PhasePoint::new(
            vec![1.7, 5.1],
            w.y.clone(),
            q.iter()
                .map(|c| c * C64::from_polar(1.0, rng.gen_range(0.0..6.0)))
                .collect(),
        );
        let vr = z.vector_field(&rotated.to_eval()).unwrap();
        let scale = v.max_abs();
        for i in 0..2 {
            assert!(v.dy[i].norm() <= 1e-14 * scale);
            assert!((v.dx[i] - vr.dx[i]).norm() <= 1e-12 * scale);
        }
        for s in 0..sites {
            // d|q_s|²/dt = 2 Re(q̄_s q̇_s) vanishes.
            assert!((q[s].conj() * v.dq[s]).re.abs() <= 1e-14 * scale);
        }
    }
}

#[test]
fn tame_norms_stay_bounded_across_transforms() {
    let d = desk();
    let cfg = NormalFormConfig::default();
    let log = &d.o2.log;
    assert!(log.norms_after.value_upper <= 2.0 * log.norms_before.value_upper);
    let after = d.pnf.total().unwrap().sub(&d.pnf.n_breve).unwrap();
    let dp = cfg.norm_domain.with_r(PartialConfig::default().rho);
    let norm = |s: &Series| {
        vector_field_tame_norm(s, &dp, &ParameterGrid::fixed(), &cfg.tame)
            .unwrap()
            .value_upper
    };
    assert!(norm(&after) <= 2.0 * norm(&d.o2.r_breve));
}

#[test]
fn remainder_norm_decays_with_rho() {
    let d = desk();
    let cfg = NormalFormConfig::default();
    let rhos = [0.1, 0.05, 0.025];
    let mut p_norms = Vec::new();
    let mut ratios = Vec::new();
    for &rho in &rhos {
        let dp = cfg.norm_domain.with_r(rho);
        let norm = |s: &Series| {
            vector_field_tame_norm(s, &dp, &ParameterGrid::fixed(), &cfg.tame)
                .unwrap()
                .value_upper
        };
        let p = norm(&d.pnf.p);
        p_norms.push(p);
        ratios.push(p / norm(&d.o2.r_breve));
    }
    let (slope, _) = fit_power_law(&rhos, &p_norms).unwrap();
    assert!(slope >= 2.0 - 0.5, "slope {slope}");
    let (ratio_slope, _) = fit_power_law(&rhos, &ratios).unwrap();
    assert!(ratio_slope > 0.0, "ratio slope {ratio_slope}");
    eprintln!("P-norm slope {slope}, ratio slope {ratio_slope}");
}
