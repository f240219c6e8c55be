//! Truncated lattice Hamiltonian of the beam equation
//! `u_tt + (−Δ + M_ξ)² u + ε f(u) = 0` on the torus `T^d`.

mod action_angle;
mod nonlinearity;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use action_angle::{to_action_angle, ActionAngle};
pub use nonlinearity::build_nonlinearity;

use crate::error::{config_err, Error, Result};
use crate::norms::{vector_field_tame_norm, DomainParams, NormReport, ParameterGrid, TameOptions};
use crate::series::{Series, SeriesMeta, Site, SiteTable, C64};

/// Truncation and physical parameters of the model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Spatial dimension.
    pub d: usize,
    /// Retain sites with `|j|₂ ≤ j_max`.
    pub j_max: f64,
    /// Tangential sites, in order.
    pub tangential: Vec<Vec<i32>>,
    pub eps: f64,
    /// Nonlinearity `f(u) = u^{f_power}`.
    pub f_power: u32,
    pub degree_cap: u32,
    pub fourier_cap: u32,
    /// Interval for every `ξ_j`.
    pub param_box: [f64; 2],
    /// Sites with `|j|₂ ≤ low_cutoff` are low modes.
    pub low_cutoff: f64,
    /// Actions of the reference torus on the tangential sites. Empty means
    /// all zero.
    pub torus_actions: Vec<f64>,
    /// Largest admissible `|||X_P|||^T` of the built perturbation.
    pub smallness_threshold: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            d: 2,
            j_max: 3.0,
            tangential: vec![vec![1, 0], vec![0, 1]],
            eps: 1e-4,
            f_power: 3,
            degree_cap: 6,
            fourier_cap: 8,
            param_box: [0.0, 1.0],
            low_cutoff: 2.0,
            torus_actions: Vec::new(),
            smallness_threshold: 1.0,
        }
    }
}

impl ModelConfig {
    pub fn n(&self) -> usize {
        self.tangential.len()
    }

    pub fn actions(&self) -> Vec<f64> {
        if self.torus_actions.is_empty() {
            vec![0.0; self.n()]
        } else {
            self.torus_actions.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(config_err("model.d", "must be at least 1"));
        }
        if !(self.j_max >= 0.0 && self.j_max.is_finite()) {
            return Err(config_err("model.j_max", "must be a nonnegative number"));
        }
        if self.tangential.is_empty() {
            return Err(config_err("model.tangential", "needs at least one site"));
        }
        for t in &self.tangential {
            if t.len() != self.d {
                return Err(config_err(
                    "model.tangential",
                    format!("site {t:?} does not have {} coordinates", self.d),
                ));
            }
        }
        if !(self.eps >= 0.0 && self.eps.is_finite()) {
            return Err(config_err("model.eps", "must be a nonnegative number"));
        }
        if self.f_power < 2 {
            return Err(config_err("model.f_power", "must be at least 2"));
        }
        if self.f_power + 1 > self.degree_cap {
            return Err(config_err(
                "model.degree_cap",
                format!("must be at least f_power + 1 = {}", self.f_power + 1),
            ));
        }
        let [lo, hi] = self.param_box;
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(config_err(
                "model.param_box",
                "must be an interval [lo, hi] with lo < hi",
            ));
        }
        if !(self.low_cutoff >= 0.0) {
            return Err(config_err("model.low_cutoff", "must be nonnegative"));
        }
        if !self.torus_actions.is_empty() && self.torus_actions.len() != self.n() {
            return Err(config_err(
                "model.torus_actions",
                format!("needs {} entries (one per tangential site)", self.n()),
            ));
        }
        if self.torus_actions.iter().any(|&a| !(a >= 0.0)) {
            return Err(config_err(
                "model.torus_actions",
                "actions must be nonnegative",
            ));
        }
        if !(self.smallness_threshold > 0.0) {
            return Err(config_err("model.smallness_threshold", "must be positive"));
        }
        Ok(())
    }
}

/// Retained lattice with the tangential/normal and low/high splits.
#[derive(Clone, Debug, PartialEq)]
pub struct SiteLattice {
    pub d: usize,
    /// All sites with `|j|₂ ≤ j_max`, lexicographic.
    pub retained: Vec<Site>,
    pub tangential: Vec<Site>,
    /// Retained sites outside `S`, lexicographic.
    pub normal: Vec<Site>,
    /// Position of each tangential site in `retained`.
    pub tangential_index: Vec<usize>,
    /// Position of each normal site in `retained`.
    pub normal_index: Vec<usize>,
    pub low_cutoff: f64,
    /// Per normal slot: `|j|₂ ≤ low_cutoff`.
    pub is_low: Vec<bool>,
}

fn sites_within(d: usize, j_max: f64) -> Vec<Site> {
    let r = j_max.floor() as i32;
    let bound = j_max * j_max + 1e-9;
    let mut out = Vec::new();
    let mut cur = vec![-r; d];
    loop {
        let s = Site::new(cur.clone());
        if (s.norm2_sq() as f64) <= bound {
            out.push(s);
        }
        let mut i = d;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if cur[i] < r {
                cur[i] += 1;
                for c in cur.iter_mut().skip(i + 1) {
                    *c = -r;
                }
                break;
            }
        }
    }
}

/// Enumerates the retained sites and splits them.
pub fn build_sites(cfg: &ModelConfig) -> Result<SiteLattice> {
    cfg.validate()?;
    if cfg.j_max <= cfg.low_cutoff {
        return Err(config_err("model.j_max", "must exceed model.low_cutoff"));
    }
    let retained = sites_within(cfg.d, cfg.j_max);
    let tangential: Vec<Site> = cfg.tangential.iter().cloned().map(Site::new).collect();
    let mut tangential_index = Vec::with_capacity(tangential.len());
    for (i, t) in tangential.iter().enumerate() {
        if tangential[..i].contains(t) {
            return Err(config_err(
                "model.tangential",
                format!("site {t} listed twice"),
            ));
        }
        let pos = retained.iter().position(|s| s == t).ok_or_else(|| {
            config_err(
                "model.tangential",
                format!("site {t} lies outside |j| <= j_max"),
            )
        })?;
        tangential_index.push(pos);
    }
    let mut normal = Vec::new();
    let mut normal_index = Vec::new();
    for (i, s) in retained.iter().enumerate() {
        if !tangential.contains(s) {
            normal.push(s.clone());
            normal_index.push(i);
        }
    }
    let is_low = normal
        .iter()
        .map(|s| s.norm2() <= cfg.low_cutoff + 1e-12)
        .collect();
    Ok(SiteLattice {
        d: cfg.d,
        retained,
        tangential,
        normal,
        tangential_index,
        normal_index,
        low_cutoff: cfg.low_cutoff,
        is_low,
    })
}

impl SiteLattice {
    /// Variables of the nonlinearity before the action-angle substitution:
    /// one `(q, q̄)` pair per retained site.
    pub fn full_table(&self) -> Arc<SiteTable> {
        Arc::new(SiteTable::new(self.d, Vec::new(), self.retained.clone()).expect("valid lattice"))
    }

    /// Variables after the substitution: angles/actions on `S`, `(q, q̄)` on
    /// the normal sites.
    pub fn action_angle_table(&self) -> Arc<SiteTable> {
        Arc::new(
            SiteTable::new(self.d, self.tangential.clone(), self.normal.clone())
                .expect("valid lattice"),
        )
    }

    pub fn n(&self) -> usize {
        self.tangential.len()
    }
}

/// Frequency shifts produced by the order-2 normal form at a reference
/// parameter point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencyShifts {
    pub d_omega: Vec<f64>,
    pub d_big_omega: Vec<f64>,
    pub reference_xi: Vec<f64>,
}

/// `ω_i(ξ) = |j_i|² + ξ_{j_i}`, `Ω_j(ξ) = |j|² + ξ_j`, optionally corrected
/// by constant shifts.
#[derive(Clone, Debug, PartialEq)]
pub struct FrequencyMap {
    tangential_sq: Vec<f64>,
    normal_sq: Vec<f64>,
    tangential_index: Vec<usize>,
    normal_index: Vec<usize>,
    retained: usize,
    pub shifts: Option<FrequencyShifts>,
}

impl FrequencyMap {
    pub fn new(lattice: &SiteLattice) -> Self {
        FrequencyMap {
            tangential_sq: lattice
                .tangential
                .iter()
                .map(|s| s.norm2_sq() as f64)
                .collect(),
            normal_sq: lattice.normal.iter().map(|s| s.norm2_sq() as f64).collect(),
            tangential_index: lattice.tangential_index.clone(),
            normal_index: lattice.normal_index.clone(),
            retained: lattice.retained.len(),
            shifts: None,
        }
    }

    pub fn with_shifts(mut self, shifts: FrequencyShifts) -> Self {
        self.shifts = Some(shifts);
        self
    }

    /// The affine frequencies, ignoring any shifts.
    pub fn base(&self, xi: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        if xi.len() != self.retained {
            return Err(Error::Dimension(format!(
                "ξ has {} entries for {} retained sites",
                xi.len(),
                self.retained
            )));
        }
        let omega = self
            .tangential_sq
            .iter()
            .zip(&self.tangential_index)
            .map(|(sq, &i)| sq + xi[i])
            .collect();
        let big = self
            .normal_sq
            .iter()
            .zip(&self.normal_index)
            .map(|(sq, &i)| sq + xi[i])
            .collect();
        Ok((omega, big))
    }

    /// Frequencies including the stored shifts.
    pub fn eval(&self, xi: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let (mut omega, mut big) = self.base(xi)?;
        if let Some(s) = &self.shifts {
            for (w, d) in omega.iter_mut().zip(&s.d_omega) {
                *w += d;
            }
            for (w, d) in big.iter_mut().zip(&s.d_big_omega) {
                *w += d;
            }
        }
        Ok((omega, big))
    }
}

/// `(ω(ξ), Ω(ξ))` before corrections.
pub fn frequencies(lattice: &SiteLattice, xi: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    FrequencyMap::new(lattice).base(xi)
}

/// `λ_j = |j|² + ξ_j` over the retained sites; must be positive.
pub fn eigenvalues(lattice: &SiteLattice, xi: &[f64]) -> Result<Vec<f64>> {
    if xi.len() != lattice.retained.len() {
        return Err(Error::Dimension(format!(
            "ξ has {} entries for {} retained sites",
            xi.len(),
            lattice.retained.len()
        )));
    }
    let lambda: Vec<f64> = lattice
        .retained
        .iter()
        .zip(xi)
        .map(|(s, x)| s.norm2_sq() as f64 + x)
        .collect();
    if let Some((i, l)) = lambda.iter().enumerate().find(|(_, &l)| !(l > 0.0)) {
        return Err(config_err(
            "model.param_box",
            format!(
                "eigenvalue at site {} is {l}; all eigenvalues must be positive",
                lattice.retained[i]
            ),
        ));
    }
    Ok(lambda)
}

/// `H = N + P` in action-angle variables.
#[derive(Clone, Debug)]
pub struct Hamiltonian {
    pub n: Series,
    pub p: Series,
}

impl Hamiltonian {
    pub fn total(&self) -> Series {
        self.n.add(&self.p).expect("N and P share metadata")
    }

    pub fn meta(&self) -> &SeriesMeta {
        self.n.meta()
    }
}

/// Summary of a model build.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BuildReport {
    pub retained_sites: usize,
    pub normal_sites: usize,
    pub g_terms: usize,
    pub p_terms: usize,
    pub momentum_violations: usize,
    pub odd_remainder_mass: f64,
    pub dropped_mass: f64,
    pub reality_defect: f64,
    pub tame_norm_p: NormReport,
}

/// Builds `N = ⟨ω, y⟩ + Σ Ω_j q_j q̄_j` and `P = ε G` after the action-angle
/// substitution at parameter `ξ`.
pub fn assemble_hamiltonian(
    cfg: &ModelConfig,
    lattice: &SiteLattice,
    xi: &[f64],
    dp: &DomainParams,
) -> Result<(Hamiltonian, BuildReport)> {
    let [lo, hi] = cfg.param_box;
    if xi.iter().any(|&v| v < lo || v > hi) {
        return Err(config_err(
            "model.param_box",
            "ξ lies outside the parameter box",
        ));
    }
    let g = build_nonlinearity(cfg, lattice, xi)?;
    let aa = to_action_angle(
        &g.value,
        lattice,
        &cfg.actions(),
        cfg.degree_cap,
        cfg.fourier_cap,
    )?;
    let p = aa.series.scale(C64::new(cfg.eps, 0.0));
    let (omega, big) = frequencies(lattice, xi)?;
    let n = Series::normal_form(p.meta().clone(), &omega, &big)?;
    let tame = vector_field_tame_norm(&p, dp, &ParameterGrid::fixed(), &TameOptions::default())?;
    if tame.value_upper > cfg.smallness_threshold {
        return Err(config_err(
            "model.eps",
            format!(
                "|||X_P||| = {:e} exceeds the smallness threshold {:e}",
                tame.value_upper, cfg.smallness_threshold
            ),
        ));
    }
    let report = BuildReport {
        retained_sites: lattice.retained.len(),
        normal_sites: lattice.normal.len(),
        g_terms: g.value.len(),
        p_terms: p.len(),
        momentum_violations: g.value.momentum_violations().len() + p.momentum_violations().len(),
        odd_remainder_mass: cfg.eps * aa.odd_mass,
        dropped_mass: cfg.eps * (g.dropped_mass + aa.dropped_mass),
        reality_defect: p.reality_defect(),
        tame_norm_p: tame,
    };
    Ok((Hamiltonian { n, p }, report))
}
