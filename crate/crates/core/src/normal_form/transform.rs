use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};
use crate::norms::{weighted_phase_norm, DomainParams, ZVec};
use crate::series::{CompiledSeries, EvalPoint, PhasePoint, Series, Tangent};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// `Ψ = X_{F_1}^1 ∘ ⋯ ∘ X_{F_k}^1`: normal-form coordinates to original
    /// coordinates, so that `H_final = H ∘ Ψ`.
    Forward,
    /// `Ψ^{-1}`.
    Inverse,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowOptions {
    /// Classical Runge–Kutta steps per unit time.
    pub steps: usize,
    /// When set, every intermediate point must stay in `D(s, r, r)`.
    pub domain: Option<DomainParams>,
}

impl Default for FlowOptions {
    fn default() -> Self {
        FlowOptions {
            steps: 200,
            domain: None,
        }
    }
}

/// Result of moving a point through the composed transformation.
#[derive(Clone, Debug, PartialEq)]
pub struct Transformed {
    pub point: EvalPoint,
    /// Weighted phase norm of `Ψ(w) − w` (zero without a domain).
    pub displacement: f64,
}

fn check_domain(w: &EvalPoint, dp: &DomainParams, weights: &[f64]) -> Result<()> {
    if let Some(x) = w.x.iter().find(|x| x.im.abs() >= dp.s) {
        return Err(Error::OutsideDomain(format!(
            "|Im x| = {} ≥ s = {}",
            x.im.abs(),
            dp.s
        )));
    }
    if let Some(y) = w.y.iter().find(|y| y.norm() >= dp.r * dp.r) {
        return Err(Error::OutsideDomain(format!(
            "|y| = {} ≥ r² = {}",
            y.norm(),
            dp.r * dp.r
        )));
    }
    let z = ZVec {
        q: w.q.clone(),
        qbar: w.qbar.clone(),
    }
    .norm(weights, f64::from(dp.p));
    if z >= dp.r {
        return Err(Error::OutsideDomain(format!("‖z‖_p = {z} ≥ r = {}", dp.r)));
    }
    Ok(())
}

fn rk4_flow(
    f: &CompiledSeries,
    w: &EvalPoint,
    t: f64,
    steps: usize,
    check: &dyn Fn(&EvalPoint) -> Result<()>,
) -> Result<EvalPoint> {
    let h = t / steps as f64;
    let mut w = w.clone();
    for _ in 0..steps {
        let k1 = f.vector_field(&w)?;
        let k2 = f.vector_field(&w.add_scaled(h / 2.0, &k1))?;
        let k3 = f.vector_field(&w.add_scaled(h / 2.0, &k2))?;
        let k4 = f.vector_field(&w.add_scaled(h, &k3))?;
        let sum: Tangent = k1
            .add_scaled(2.0, &k2)
            .add_scaled(2.0, &k3)
            .add_scaled(1.0, &k4);
        w = w.add_scaled(h / 6.0, &sum);
        check(&w)?;
    }
    Ok(w)
}

/// Applies the composed time-1 generator flows to a complexified point.
pub fn compose_transform_eval(
    generators: &[Series],
    w: &EvalPoint,
    direction: Direction,
    opts: &FlowOptions,
) -> Result<Transformed> {
    if opts.steps == 0 {
        return Err(config_err("normal_form.flow_steps", "must be positive"));
    }
    let Some(first) = generators.first() else {
        return Ok(Transformed {
            point: w.clone(),
            displacement: 0.0,
        });
    };
    let table = first.table();
    let weights = table.weights();
    let check = |p: &EvalPoint| match &opts.domain {
        Some(dp) => check_domain(p, dp, &weights),
        None => Ok(()),
    };
    check(w)?;
    let compiled: Vec<CompiledSeries> = generators.iter().map(CompiledSeries::new).collect();
    let mut cur = w.clone();
    match direction {
        Direction::Forward => {
            for f in compiled.iter().rev() {
                cur = rk4_flow(f, &cur, 1.0, opts.steps, &check)?;
            }
        }
        Direction::Inverse => {
            for f in &compiled {
                cur = rk4_flow(f, &cur, -1.0, opts.steps, &check)?;
            }
        }
    }
    let displacement = match &opts.domain {
        Some(dp) => weighted_phase_norm(&cur.diff(w), table, dp)?,
        None => 0.0,
    };
    Ok(Transformed {
        point: cur,
        displacement,
    })
}

/// Applies the composed transformation to a real point; the angles of the
/// result are wrapped to `[0, 2π)`.
pub fn compose_transform(
    generators: &[Series],
    w: &PhasePoint,
    direction: Direction,
    opts: &FlowOptions,
) -> Result<PhasePoint> {
    let t = compose_transform_eval(generators, &w.to_eval(), direction, opts)?;
    Ok(t.point.to_phase().0)
}
