use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};
use crate::normal_form::read_frequencies;
use crate::series::{CompiledSeries, EvalPoint, PhasePoint, Series, C64};

/// Settings of the splitting integrator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegratorOptions {
    /// Step size; `None` selects [`default_dt`].
    pub dt: Option<f64>,
    /// Steps between stored samples.
    pub stride: usize,
    /// A step is rejected and retried with two half steps when the energy
    /// changes by more than this fraction of the initial energy.
    pub energy_guard: f64,
    /// Bisections allowed for a rejected step before giving up.
    pub max_halvings: u32,
    /// Convergence tolerance of the implicit-midpoint fixed point, relative
    /// to `1 + max |w|`.
    pub midpoint_tol: f64,
    pub midpoint_max_iter: usize,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        IntegratorOptions {
            dt: None,
            stride: 100,
            energy_guard: 1e-4,
            max_halvings: 6,
            midpoint_tol: 1e-15,
            midpoint_max_iter: 50,
        }
    }
}

/// One stored state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub point: PhasePoint,
    /// Real part of `H` at the point.
    pub energy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub dt: f64,
    pub steps: usize,
    pub rejected_steps: usize,
    /// Largest `max(|Im x|, |Im y|, |q̄ − conj q|)` produced by a single step
    /// before the state is projected back to real form.
    pub max_reality_defect: f64,
    pub samples: Vec<Sample>,
    /// Set when the run stopped early; the samples up to that point are kept.
    pub failure: Option<String>,
}

/// `min(0.01, 2π / (50 · max Ω_j))`, read from the quadratic part of `h`.
pub fn default_dt(h: &Series) -> f64 {
    let (_, big) = read_frequencies(h);
    let w = big.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if w > 0.0 {
        0.01f64.min(std::f64::consts::TAU / (50.0 * w))
    } else {
        0.01
    }
}

/// `max |H(w(t)) − H(w(0))| / |H(w(0))|` over the samples; the absolute
/// drift is returned when `H(w(0)) = 0`.
pub fn energy_drift(traj: &Trajectory) -> f64 {
    let Some(first) = traj.samples.first() else {
        return 0.0;
    };
    let e0 = first.energy;
    let drift = traj
        .samples
        .iter()
        .fold(0.0f64, |m, s| m.max((s.energy - e0).abs()));
    if e0 != 0.0 {
        drift / e0.abs()
    } else {
        drift
    }
}

/// `H` split into the exactly solvable part `⟨ω, y⟩ + Σ Ω_j q_j q̄_j` and the
/// rest.
pub struct SplitHamiltonian {
    omega: Vec<f64>,
    big_omega: Vec<f64>,
    full: CompiledSeries,
    rest: CompiledSeries,
    rest_is_zero: bool,
}

impl SplitHamiltonian {
    pub fn new(h: &Series) -> Result<Self> {
        let (omega, big_omega) = read_frequencies(h);
        let n = Series::normal_form(h.meta().clone(), &omega, &big_omega)?;
        let rest = h.sub(&n)?.filter(|m, _| !m.is_constant());
        Ok(SplitHamiltonian {
            omega,
            big_omega,
            full: CompiledSeries::new(h),
            rest_is_zero: rest.is_empty(),
            rest: CompiledSeries::new(&rest),
        })
    }

    pub fn energy(&self, w: &EvalPoint) -> Result<f64> {
        Ok(self.full.value(w)?.re)
    }

    /// Exact flow of the quadratic normal part: `x += ω t`, `q ← e^{iΩt} q`.
    fn normal_flow(&self, w: &mut EvalPoint, t: f64) {
        for (x, o) in w.x.iter_mut().zip(&self.omega) {
            *x += o * t;
        }
        for ((q, qb), o) in w.q.iter_mut().zip(w.qbar.iter_mut()).zip(&self.big_omega) {
            let r = C64::from_polar(1.0, o * t);
            *q *= r;
            *qb *= r.conj();
        }
    }

    /// Implicit midpoint step `w₁ = w₀ + h X_R((w₀ + w₁)/2)` by fixed-point
    /// iteration.
    fn midpoint(&self, w: &EvalPoint, h: f64, opts: &IntegratorOptions) -> Result<EvalPoint> {
        if self.rest_is_zero {
            return Ok(w.clone());
        }
        let mut next = w.add_scaled(h, &self.rest.vector_field(w)?);
        for _ in 0..opts.midpoint_max_iter {
            let cand = w.add_scaled(h, &self.rest.vector_field(&w.midpoint(&next))?);
            let change = cand.max_abs_diff(&next);
            let scale = 1.0 + point_max_abs(&cand);
            next = cand;
            if change <= opts.midpoint_tol * scale {
                return Ok(next);
            }
        }
        Err(Error::Integration {
            time: f64::NAN,
            reason: format!(
                "implicit midpoint did not converge in {} iterations",
                opts.midpoint_max_iter
            ),
        })
    }

    /// Symmetric composition: half normal flow, midpoint step, half normal
    /// flow.
    fn strang(&self, w: &EvalPoint, h: f64, opts: &IntegratorOptions) -> Result<EvalPoint> {
        let mut a = w.clone();
        self.normal_flow(&mut a, h / 2.0);
        let mut b = self.midpoint(&a, h, opts)?;
        self.normal_flow(&mut b, h / 2.0);
        Ok(b)
    }
}

fn point_max_abs(w: &EvalPoint) -> f64 {
    w.x.iter()
        .chain(&w.y)
        .chain(&w.q)
        .chain(&w.qbar)
        .fold(0.0, |m, c| m.max(c.norm()))
}

/// Restores `Im x = Im y = 0` and `q̄ = conj q`, returning the defect removed.
/// Angles are reduced to `[0, 2π)`.
fn project_real(w: &mut EvalPoint) -> f64 {
    let mut defect = 0.0f64;
    for v in w.x.iter_mut().chain(w.y.iter_mut()) {
        defect = defect.max(v.im.abs());
        v.im = 0.0;
    }
    for x in &mut w.x {
        x.re = x.re.rem_euclid(std::f64::consts::TAU);
    }
    for (q, qb) in w.q.iter().zip(w.qbar.iter_mut()) {
        defect = defect.max((*qb - q.conj()).norm());
        *qb = q.conj();
    }
    defect
}

struct Stepper<'a> {
    h: &'a SplitHamiltonian,
    opts: &'a IntegratorOptions,
    e_scale: f64,
    rejected: usize,
    defect: f64,
}

impl Stepper<'_> {
    fn step(&mut self, w: &EvalPoint, e: f64, dt: f64, level: u32) -> Result<(EvalPoint, f64)> {
        let mut next = self.h.strang(w, dt, self.opts)?;
        self.defect = self.defect.max(project_real(&mut next));
        let e1 = self.h.energy(&next)?;
        if (e1 - e).abs() <= self.opts.energy_guard * self.e_scale {
            return Ok((next, e1));
        }
        if level == self.opts.max_halvings {
            return Err(Error::Integration {
                time: f64::NAN,
                reason: format!(
                    "energy jump {:e} exceeds the guard after {level} halvings",
                    (e1 - e).abs() / self.e_scale
                ),
            });
        }
        self.rejected += 1;
        let (mid, em) = self.step(w, e, dt / 2.0, level + 1)?;
        self.step(&mid, em, dt / 2.0, level + 1)
    }
}

/// Integrates `ẇ = X_H(w)` from `w0` over `[0, t_end]`; a negative `t_end`
/// runs backward in time. The quadratic normal part is advanced exactly and
/// the rest by the implicit midpoint rule in a symmetric composition, so the
/// method is symplectic, time-reversible and of second order.
pub fn integrate(
    h: &Series,
    w0: &PhasePoint,
    t_end: f64,
    opts: &IntegratorOptions,
) -> Result<Trajectory> {
    let split = SplitHamiltonian::new(h)?;
    integrate_split(&split, h, w0, t_end, opts)
}

pub(crate) fn integrate_split(
    split: &SplitHamiltonian,
    h: &Series,
    w0: &PhasePoint,
    t_end: f64,
    opts: &IntegratorOptions,
) -> Result<Trajectory> {
    if w0.x.len() != h.n() || w0.y.len() != h.n() || w0.q.len() != h.table().len() {
        return Err(Error::Dimension(format!(
            "point of shape ({}, {}, {}) for a Hamiltonian with {} angles and {} sites",
            w0.x.len(),
            w0.y.len(),
            w0.q.len(),
            h.n(),
            h.table().len()
        )));
    }
    let dt_abs = opts.dt.unwrap_or_else(|| default_dt(h));
    if !(dt_abs > 0.0) || !dt_abs.is_finite() {
        return Err(config_err("dynamics.dt", "must be positive"));
    }
    if opts.stride == 0 {
        return Err(config_err("dynamics.stride", "must be positive"));
    }
    if !t_end.is_finite() {
        return Err(config_err("dynamics.horizon", "must be finite"));
    }
    let steps = (t_end.abs() / dt_abs).round() as usize;
    let dt = if steps == 0 {
        0.0
    } else {
        t_end / steps as f64
    };
    let mut w = w0.to_eval();
    let mut e = split.energy(&w)?;
    let mut stepper = Stepper {
        h: split,
        opts,
        e_scale: if e != 0.0 { e.abs() } else { 1.0 },
        rejected: 0,
        defect: 0.0,
    };
    let sample = |t: f64, w: &EvalPoint, e: f64| Sample {
        t,
        point: w.to_phase().0,
        energy: e,
    };
    let mut samples = vec![sample(0.0, &w, e)];
    let mut failure = None;
    for i in 1..=steps {
        match stepper.step(&w, e, dt, 0) {
            Ok((next, e1)) => {
                w = next;
                e = e1;
            }
            Err(err) => {
                let t = (i - 1) as f64 * dt;
                failure = Some(match err {
                    Error::Integration { reason, .. } => {
                        Error::Integration { time: t, reason }.to_string()
                    }
                    other => other.to_string(),
                });
                break;
            }
        }
        if i % opts.stride == 0 || i == steps {
            samples.push(sample(i as f64 * dt, &w, e));
        }
    }
    Ok(Trajectory {
        dt,
        steps,
        rejected_steps: stepper.rejected,
        max_reality_defect: stepper.defect,
        samples,
        failure,
    })
}
