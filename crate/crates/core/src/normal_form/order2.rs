use super::{
    lie_transform, max_coefficient, prune, read_frequencies, solve_homological, tame_upper,
    DivisorPolicy, LieOptions, NormalFormConfig, NormalFormLog, Stage, StepRecord,
};
use crate::error::{config_err, Error, Result};
use crate::model::{FrequencyShifts, Hamiltonian};
use crate::series::{Monomial, Series, C64};

/// Result of the order-2 step: `H ∘ Ψ = N̆ + R̆`.
#[derive(Clone, Debug)]
pub struct Order2Output {
    /// Constant plus `⟨ω̆, y⟩ + Σ Ω̆_j q_j q̄_j`, with real coefficients.
    pub n_breve: Series,
    /// Everything else; non-normal terms of order ≤ 2 only up to the
    /// reported residual.
    pub r_breve: Series,
    pub shifts: FrequencyShifts,
    /// Generators in the order they were applied.
    pub generators: Vec<Series>,
    pub log: NormalFormLog,
}

fn is_low_order(m: &Monomial) -> bool {
    m.degree() <= 2
}

/// Quadratic normal part of `h` with real coefficients.
fn normal_part(h: &Series) -> Series {
    h.filter(|m, _| is_low_order(m) && m.is_normal())
        .map_coeffs(|_, c| C64::new(c.re, 0.0))
}

/// Removes the non-normal terms of order `2|α| + |β| + |γ| ≤ 2` by a fixed
/// number of sweeps. Each sweep solves the homological equation with the
/// frequencies corrected so far, transforms, and reads the corrected
/// frequencies off the `k = 0` quadratic part.
pub fn order2_step(ham: &Hamiltonian, xi: &[f64], cfg: &NormalFormConfig) -> Result<Order2Output> {
    if cfg.sweeps == 0 {
        return Err(config_err("normal_form.sweeps", "must be at least 1"));
    }
    let (omega0, big0) = read_frequencies(&ham.n);
    let mut h = ham.total();
    let norms_before = tame_upper(&ham.p, cfg)?;
    let policy = DivisorPolicy {
        floor: cfg.divisor_floor,
        resonance: None,
    };
    let lie_opts = LieOptions {
        allow_low_degree: true,
        ..cfg.lie.clone()
    };
    let mut generators = Vec::new();
    let mut steps = Vec::new();
    let mut dropped = 0.0;
    let mut max_res = 0.0f64;
    let mut displacement = 0.0;
    let floor = cfg.prune_relative * max_coefficient(&ham.p);
    let mut pruned = 0.0;
    for sweep in 0..cfg.sweeps {
        let target = h.filter(|m, _| is_low_order(m) && !m.is_normal());
        if target.is_empty() {
            break;
        }
        let (omega, big) = read_frequencies(&h);
        let solve = solve_homological(&target, &omega, &big, &policy)?;
        if solve.f.is_empty() {
            let min_divisor = target
                .iter()
                .map(|(m, _)| super::term_divisor(m, &omega, &big).abs())
                .fold(f64::INFINITY, f64::min);
            return Err(Error::DivisorCollapse {
                count: target.len(),
                min_divisor,
            });
        }
        max_res = max_res.max(solve.residual);
        let lie = lie_transform(&h, &solve.f, &lie_opts)?;
        dropped += lie.dropped_mass;
        let gnorm = tame_upper(&solve.f, cfg)?.value_upper;
        displacement += gnorm;
        steps.push(StepRecord {
            index: sweep as u32,
            targeted_terms: target.len(),
            targeted_mass: target.l1_mass(),
            solved_terms: solve.f.len(),
            unresolved_terms: solve.unresolved.len(),
            min_divisor: solve.min_divisor.is_finite().then_some(solve.min_divisor),
            max_divisor: (solve.max_divisor > 0.0).then_some(solve.max_divisor),
            homological_residual: solve.residual,
            generator_terms: solve.f.len(),
            generator_norm: gnorm,
            lie_iterations: lie.iterations,
            dropped_mass: lie.dropped_mass,
        });
        generators.push(solve.f);
        let (kept, gone) = prune(lie.value, floor);
        pruned += gone;
        h = kept;
    }
    let n_breve = normal_part(&h);
    let r_breve = h.sub(&n_breve)?;
    let (omega, big) = read_frequencies(&n_breve);
    let shifts = FrequencyShifts {
        d_omega: omega.iter().zip(&omega0).map(|(a, b)| a - b).collect(),
        d_big_omega: big.iter().zip(&big0).map(|(a, b)| a - b).collect(),
        reference_xi: xi.to_vec(),
    };
    let residual_mass = r_breve
        .filter(|m, _| is_low_order(m) && !m.is_normal())
        .l1_mass();
    let log = NormalFormLog {
        stage: Stage::Order2,
        frequency_shifts: Some(shifts.clone()),
        norms_before,
        norms_after: tame_upper(&r_breve, cfg)?,
        transform_displacement: displacement,
        dropped_mass: dropped,
        pruned_mass: pruned,
        steps,
        residual_mass,
        max_homological_residual: max_res,
    };
    Ok(Order2Output {
        n_breve,
        r_breve,
        shifts,
        generators,
        log,
    })
}
