//! Splitting integration of truncated Hamiltonians and the stickiness
//! experiment near invariant tori.

mod integrator;
mod stickiness;

pub use integrator::{
    default_dt, energy_drift, integrate, IntegratorOptions, Sample, SplitHamiltonian, Trajectory,
};
pub use stickiness::{
    max_distance_gap, sample_on_sphere, stickiness_ensemble, stickiness_experiment,
    stickiness_from, torus_distance, DistanceSample, IntegrationPath, NormalFormRun,
    StickinessConfig, StickinessReport,
};
