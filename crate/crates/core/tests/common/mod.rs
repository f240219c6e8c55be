//! Desk-scale model shared by the integration tests.

#![allow(dead_code)]

use std::sync::OnceLock;

use kamstick_core::model::{
    assemble_hamiltonian, build_sites, Hamiltonian, ModelConfig, SiteLattice,
};
use kamstick_core::normal_form::{
    order2_step, partial_normal_form, NormalFormConfig, Order2Output, PartialConfig,
    PartialNormalFormOutput,
};
use kamstick_core::norms::DomainParams;
use kamstick_core::series::Series;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn desk_model(eps: f64) -> ModelConfig {
    ModelConfig {
        eps,
        torus_actions: vec![0.01, 0.01],
        ..ModelConfig::default()
    }
}

pub struct Desk {
    pub lattice: SiteLattice,
    pub ham: Hamiltonian,
    pub o2: Order2Output,
    pub pnf: PartialNormalFormOutput,
    /// `N + P`.
    pub original: Series,
    /// `N̆ + Z + P + Q` plus unresolved terms.
    pub transformed: Series,
    /// Order-2 generators followed by the partial-stage generators.
    pub generators: Vec<Series>,
}

pub fn desk_xi(l: &SiteLattice) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    (0..l.retained.len())
        .map(|_| rng.gen_range(0.0..1.0))
        .collect()
}

pub fn desk() -> &'static Desk {
    static DESK: OnceLock<Desk> = OnceLock::new();
    DESK.get_or_init(|| {
        let cfg = desk_model(1e-4);
        let lattice = build_sites(&cfg).unwrap();
        let xi = desk_xi(&lattice);
        let dp = DomainParams::new(0.5, 0.5, 3, 2).unwrap();
        let (ham, _) = assemble_hamiltonian(&cfg, &lattice, &xi, &dp).unwrap();
        let nf = NormalFormConfig::default();
        let o2 = order2_step(&ham, &xi, &nf).unwrap();
        let pnf = partial_normal_form(&o2, &lattice, &PartialConfig::default(), &nf).unwrap();
        let generators = o2
            .generators
            .iter()
            .chain(&pnf.generators)
            .cloned()
            .collect();
        Desk {
            original: ham.total(),
            transformed: pnf.total().unwrap(),
            generators,
            lattice,
            ham,
            o2,
            pnf,
        }
    })
}
