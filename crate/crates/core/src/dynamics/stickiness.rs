use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::integrator::{
    default_dt, energy_drift, integrate_split, IntegratorOptions, SplitHamiltonian,
};
use crate::error::{config_err, Result};
use crate::normal_form::{compose_transform, Direction, FlowOptions};
use crate::norms::weighted_l2;
use crate::series::{PhasePoint, Series, C64};

/// `‖y‖_∞^{1/2} + ‖q‖_p`: distance from `w` to the torus `{y = 0, z = 0}`.
/// The angles play no role.
pub fn torus_distance(w: &PhasePoint, weights: &[f64], p: u32) -> f64 {
    let y = w.y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    y.sqrt() + weighted_l2(&w.q, weights, f64::from(p))
}

/// A point at torus distance exactly `delta`: random angles, and a random
/// split of `delta` between the action and normal-mode parts.
pub fn sample_on_sphere<R: Rng>(
    n: usize,
    weights: &[f64],
    p: u32,
    delta: f64,
    rng: &mut R,
) -> PhasePoint {
    let x = (0..n).map(|_| rng.gen_range(0.0..TAU)).collect();
    let share = if weights.is_empty() {
        1.0
    } else if n == 0 {
        0.0
    } else {
        rng.gen_range(0.05..0.95)
    };
    let mut y: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let ymax = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if ymax > 0.0 {
        let target = (share * delta).powi(2);
        y.iter_mut().for_each(|v| *v *= target / ymax);
    }
    let mut q: Vec<C64> = weights
        .iter()
        .map(|w| {
            C64::from_polar(
                rng.gen_range(0.1..1.0) / w.powi(p as i32),
                rng.gen_range(0.0..TAU),
            )
        })
        .collect();
    let qn = weighted_l2(&q, weights, f64::from(p));
    if qn > 0.0 {
        let target = (1.0 - share) * delta;
        q.iter_mut().for_each(|v| *v *= target / qn);
    }
    PhasePoint::new(x, y, q)
}

/// What is integrated and where distances are measured.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntegrationPath {
    /// The normal-form Hamiltonian, with distances read off directly.
    Transformed,
    /// The original Hamiltonian from `Ψ(w₀)`, with distances measured at
    /// `Ψ^{-1}(w(t))`.
    Original,
    /// The original Hamiltonian from `w₀` with no coordinate change: the
    /// control run.
    Disabled,
}

/// The pieces of a finished normal-form run needed for the experiment.
#[derive(Clone, Copy, Debug)]
pub struct NormalFormRun<'a> {
    /// `N + P` in the original coordinates.
    pub original: &'a Series,
    /// `N̆ + Z + P + Q` (plus any unresolved terms).
    pub transformed: &'a Series,
    /// Generators in order of application; `original ∘ Ψ = transformed`.
    pub generators: &'a [Series],
    /// Radius of the normal-form domain, if known; `delta` must lie below it.
    pub rho: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StickinessConfig {
    pub delta: f64,
    pub m_order: u32,
    /// Regularity index of the distance.
    pub p: u32,
    /// Length of each time direction; `None` means `delta^{-M}`.
    pub horizon: Option<f64>,
    /// Time between distance samples.
    pub sample_interval: f64,
    pub path: IntegrationPath,
    pub integrator: IntegratorOptions,
    /// Runge–Kutta steps per generator flow on the `Original` path.
    pub flow_steps: usize,
    pub seed: u64,
}

impl Default for StickinessConfig {
    fn default() -> Self {
        StickinessConfig {
            delta: 0.05,
            m_order: 2,
            p: 2,
            horizon: None,
            sample_interval: 1.0,
            path: IntegrationPath::Transformed,
            integrator: IntegratorOptions::default(),
            flow_steps: 16,
            seed: 0,
        }
    }
}

impl StickinessConfig {
    pub fn horizon(&self) -> f64 {
        self.horizon
            .unwrap_or_else(|| self.delta.powi(-(self.m_order as i32)))
    }

    pub fn validate(&self, rho: Option<f64>) -> Result<()> {
        if !(self.delta > 0.0) {
            return Err(config_err("dynamics.delta", "must be positive"));
        }
        if let Some(rho) = rho {
            if self.delta >= rho {
                return Err(config_err(
                    "dynamics.delta",
                    format!("must lie below the normal-form radius {rho}"),
                ));
            }
        }
        let t = self.horizon();
        if !(t > 0.0) || !t.is_finite() {
            return Err(config_err(
                "dynamics.horizon",
                "must be positive and finite",
            ));
        }
        if !(self.sample_interval > 0.0) {
            return Err(config_err("dynamics.sample_interval", "must be positive"));
        }
        if self.flow_steps == 0 {
            return Err(config_err("dynamics.flow_steps", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceSample {
    pub t: f64,
    pub distance: f64,
    pub energy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StickinessReport {
    pub delta: f64,
    pub m_order: u32,
    pub horizon: f64,
    pub path: IntegrationPath,
    pub seed: u64,
    pub dt: f64,
    /// Initial point in normal-form coordinates.
    pub initial: PhasePoint,
    pub initial_distance: f64,
    pub max_distance: f64,
    /// Sample time of smallest `|t|` with distance above `2 δ`.
    pub first_violation_time: Option<f64>,
    pub violated: bool,
    /// Largest relative energy drift of the two directions.
    pub energy_drift: f64,
    /// `max |d(t) − d(0)| / max |t|` over the samples.
    pub distance_drift_rate: f64,
    pub max_reality_defect: f64,
    pub rejected_steps: usize,
    /// Samples from `−horizon` to `horizon`.
    pub samples: Vec<DistanceSample>,
    /// Errors of either direction; the samples before the failure are kept.
    pub failures: Vec<String>,
}

impl StickinessReport {
    /// `t,distance,energy` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,distance,energy\n");
        for s in &self.samples {
            out.push_str(&format!("{:e},{:e},{:e}\n", s.t, s.distance, s.energy));
        }
        out
    }
}

struct DirectionRun {
    samples: Vec<DistanceSample>,
    energy_drift: f64,
    reality_defect: f64,
    rejected: usize,
    failure: Option<String>,
}

/// Runs the experiment from a point drawn on the `δ`-sphere with `cfg.seed`,
/// forward and backward in time.
pub fn stickiness_experiment(
    run: &NormalFormRun<'_>,
    cfg: &StickinessConfig,
) -> Result<StickinessReport> {
    cfg.validate(run.rho)?;
    let table = run.transformed.table();
    let weights = table.weights();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let w0 = sample_on_sphere(run.transformed.n(), &weights, cfg.p, cfg.delta, &mut rng);
    stickiness_from(run, cfg, &w0)
}

/// Runs the experiment from a given initial point in normal-form coordinates.
pub fn stickiness_from(
    run: &NormalFormRun<'_>,
    cfg: &StickinessConfig,
    w0: &PhasePoint,
) -> Result<StickinessReport> {
    cfg.validate(run.rho)?;
    let weights = run.transformed.table().weights();
    let horizon = cfg.horizon();
    let dt = cfg
        .integrator
        .dt
        .unwrap_or_else(|| default_dt(run.transformed));
    let stride = ((cfg.sample_interval / dt).round() as usize).max(1);
    let opts = IntegratorOptions {
        dt: Some(dt),
        stride,
        ..cfg.integrator.clone()
    };
    let flow = FlowOptions {
        steps: cfg.flow_steps,
        domain: None,
    };
    let (h, start) = match cfg.path {
        IntegrationPath::Transformed => (run.transformed, w0.clone()),
        IntegrationPath::Original => (
            run.original,
            compose_transform(run.generators, w0, Direction::Forward, &flow)?,
        ),
        IntegrationPath::Disabled => (run.original, w0.clone()),
    };
    let split = SplitHamiltonian::new(h)?;
    let distance = |w: &PhasePoint| -> Result<f64> {
        match cfg.path {
            IntegrationPath::Original => {
                let back = compose_transform(run.generators, w, Direction::Inverse, &flow)?;
                Ok(torus_distance(&back, &weights, cfg.p))
            }
            _ => Ok(torus_distance(w, &weights, cfg.p)),
        }
    };
    let one_way = |t_end: f64| -> Result<DirectionRun> {
        let tr = integrate_split(&split, h, &start, t_end, &opts)?;
        let samples = tr
            .samples
            .iter()
            .map(|s| {
                Ok(DistanceSample {
                    t: s.t,
                    distance: distance(&s.point)?,
                    energy: s.energy,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(DirectionRun {
            samples,
            energy_drift: energy_drift(&tr),
            reality_defect: tr.max_reality_defect,
            rejected: tr.rejected_steps,
            failure: tr.failure,
        })
    };
    let (fwd, bwd) = rayon::join(|| one_way(horizon), || one_way(-horizon));
    let (fwd, bwd) = (fwd?, bwd?);
    let mut samples: Vec<DistanceSample> = bwd.samples.iter().skip(1).rev().cloned().collect();
    samples.extend(fwd.samples.iter().cloned());
    let d0 = torus_distance(w0, &weights, cfg.p);
    let max_distance = samples.iter().fold(0.0f64, |m, s| m.max(s.distance));
    let first_violation_time = fwd
        .samples
        .iter()
        .find(|s| s.distance > 2.0 * cfg.delta)
        .into_iter()
        .chain(bwd.samples.iter().find(|s| s.distance > 2.0 * cfg.delta))
        .map(|s| s.t)
        .min_by(|a, b| a.abs().total_cmp(&b.abs()));
    let reached = samples.iter().fold(0.0f64, |m, s| m.max(s.t.abs()));
    let deviation = samples
        .iter()
        .fold(0.0f64, |m, s| m.max((s.distance - d0).abs()));
    Ok(StickinessReport {
        delta: cfg.delta,
        m_order: cfg.m_order,
        horizon,
        path: cfg.path,
        seed: cfg.seed,
        dt,
        initial: w0.clone(),
        initial_distance: d0,
        max_distance,
        first_violation_time,
        violated: max_distance > 2.0 * cfg.delta,
        energy_drift: fwd.energy_drift.max(bwd.energy_drift),
        distance_drift_rate: if reached > 0.0 {
            deviation / reached
        } else {
            0.0
        },
        max_reality_defect: fwd.reality_defect.max(bwd.reality_defect),
        rejected_steps: fwd.rejected + bwd.rejected,
        samples,
        failures: fwd.failure.into_iter().chain(bwd.failure).collect(),
    })
}

/// One experiment per seed, run concurrently; reports come back in seed
/// order.
pub fn stickiness_ensemble(
    run: &NormalFormRun<'_>,
    cfg: &StickinessConfig,
    seeds: &[u64],
) -> Result<Vec<StickinessReport>> {
    seeds
        .par_iter()
        .map(|&seed| {
            stickiness_experiment(
                run,
                &StickinessConfig {
                    seed,
                    ..cfg.clone()
                },
            )
        })
        .collect()
}

/// Largest distance gap between two reports at matching sample times.
pub fn max_distance_gap(a: &StickinessReport, b: &StickinessReport) -> Option<f64> {
    if a.samples.len() != b.samples.len() {
        return None;
    }
    let mut gap = 0.0f64;
    for (u, v) in a.samples.iter().zip(&b.samples) {
        if (u.t - v.t).abs() > 1e-9 * (1.0 + u.t.abs()) {
            return None;
        }
        gap = gap.max((u.distance - v.distance).abs());
    }
    Some(gap)
}
