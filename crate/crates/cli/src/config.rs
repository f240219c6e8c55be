use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use kamstick_core::dynamics::{IntegrationPath, IntegratorOptions, StickinessConfig};
use kamstick_core::model::ModelConfig;
use kamstick_core::normal_form::{LieOptions, NormalFormConfig, PartialConfig};
use kamstick_core::norms::{DomainParams, TameOptions};
use kamstick_core::resonance::ResonanceConfig;
use serde::{Deserialize, Serialize};

/// Prefix of environment overrides: `KAMSTICK_<SECTION>__<KEY>=value`.
pub const ENV_PREFIX: &str = "KAMSTICK_";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Worker threads; 0 lets the runtime choose.
    pub workers: usize,
    pub model: ModelConfig,
    pub parameter: ParameterSection,
    pub norms: NormsSection,
    pub resonance: ResonanceConfig,
    pub measure: MeasureSection,
    pub normal_form: NormalFormSection,
    pub dynamics: DynamicsSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            workers: 0,
            model: ModelConfig {
                torus_actions: vec![0.01, 0.01],
                ..ModelConfig::default()
            },
            parameter: ParameterSection::default(),
            norms: NormsSection::default(),
            resonance: ResonanceConfig::default(),
            measure: MeasureSection::default(),
            normal_form: NormalFormSection::default(),
            dynamics: DynamicsSection::default(),
        }
    }
}

/// Choice of the parameter point `ξ`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParameterSection {
    /// Explicit `ξ`, one entry per retained site; drawn from the run seed
    /// when empty.
    pub xi: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NormsSection {
    pub s: f64,
    pub r: f64,
    pub p: u32,
    pub dbase: u32,
    /// Random test vectors per degree for the sampled lower bounds.
    pub samples: usize,
    /// Random points for the phase-norm ordering check.
    pub ordering_points: usize,
}

impl Default for NormsSection {
    fn default() -> Self {
        NormsSection {
            s: 0.5,
            r: 0.5,
            p: 3,
            dbase: 2,
            samples: TameOptions::default().samples,
            ordering_points: 50,
        }
    }
}

impl NormsSection {
    pub fn domain(&self) -> Result<DomainParams> {
        Ok(DomainParams::new(self.s, self.r, self.p, self.dbase)?)
    }

    pub fn tame(&self, seed: u64) -> TameOptions {
        TameOptions {
            samples: self.samples,
            seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeasureSection {
    pub etas: Vec<f64>,
    pub samples: usize,
}

impl Default for MeasureSection {
    fn default() -> Self {
        MeasureSection {
            etas: vec![1e-1, 1e-2, 1e-3, 1e-4],
            samples: 2000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NormalFormSection {
    pub sweeps: usize,
    pub divisor_floor: f64,
    pub lie_max_iter: usize,
    /// Order-2 stage coefficient pruning, relative to the largest
    /// perturbation coefficient.
    pub prune_relative: f64,
    /// Partial stage pruning of terms above order `M + 2`.
    pub partial_prune_relative: f64,
    /// Radius at which the partial-stage norms are logged.
    pub rho: f64,
}

impl Default for NormalFormSection {
    fn default() -> Self {
        let nf = NormalFormConfig::default();
        let pc = PartialConfig::default();
        NormalFormSection {
            sweeps: nf.sweeps,
            divisor_floor: nf.divisor_floor,
            lie_max_iter: nf.lie.max_iter,
            prune_relative: nf.prune_relative,
            partial_prune_relative: pc.prune_relative,
            rho: pc.rho,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DynamicsSection {
    pub delta: f64,
    /// Regularity index of the torus distance.
    pub p: u32,
    /// Time per direction; defaults to `delta^{-M}`.
    pub horizon: Option<f64>,
    pub sample_interval: f64,
    pub path: IntegrationPath,
    pub dt: Option<f64>,
    pub energy_guard: f64,
    pub flow_steps: usize,
    /// Initial conditions, each with its own seed derived from the run seed.
    pub trajectories: usize,
    /// Also run with the normal form disabled.
    pub control: bool,
    /// Also run the original Hamiltonian with transformed measurements.
    pub cross_validate: bool,
    /// Largest accepted relative energy drift.
    pub energy_tolerance: f64,
}

impl Default for DynamicsSection {
    fn default() -> Self {
        let s = StickinessConfig::default();
        DynamicsSection {
            delta: s.delta,
            p: s.p,
            horizon: None,
            sample_interval: s.sample_interval,
            path: s.path,
            dt: None,
            energy_guard: s.integrator.energy_guard,
            flow_steps: s.flow_steps,
            trajectories: 1,
            control: true,
            cross_validate: false,
            energy_tolerance: 1e-6,
        }
    }
}

impl RunConfig {
    /// Checks every section before any computation starts.
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.norms.domain()?;
        self.resonance.validate(self.model.n())?;
        let n = &self.normal_form;
        if n.sweeps == 0 {
            bail!("configuration error in `normal_form.sweeps`: must be at least 1");
        }
        for (key, v) in [
            ("normal_form.divisor_floor", n.divisor_floor),
            ("normal_form.prune_relative", n.prune_relative),
            (
                "normal_form.partial_prune_relative",
                n.partial_prune_relative,
            ),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                bail!("configuration error in `{key}`: must be a nonnegative number");
            }
        }
        if n.rho.is_nan() || n.rho <= 0.0 {
            bail!("configuration error in `normal_form.rho`: must be positive");
        }
        if self.measure.samples < 100 {
            bail!("configuration error in `measure.samples`: must be at least 100");
        }
        if self.measure.etas.is_empty() || self.measure.etas.iter().any(|&e| !(e > 0.0 && e < 1.0))
        {
            bail!("configuration error in `measure.etas`: needs values in (0, 1)");
        }
        if self.dynamics.trajectories == 0 {
            bail!("configuration error in `dynamics.trajectories`: must be at least 1");
        }
        if self.dynamics.energy_tolerance.is_nan() || self.dynamics.energy_tolerance <= 0.0 {
            bail!("configuration error in `dynamics.energy_tolerance`: must be positive");
        }
        self.stickiness(IntegrationPath::Transformed, 0)
            .validate(Some(self.normal_form.rho))?;
        Ok(())
    }

    pub fn normal_form_config(&self) -> Result<NormalFormConfig> {
        let n = &self.normal_form;
        Ok(NormalFormConfig {
            sweeps: n.sweeps,
            divisor_floor: n.divisor_floor,
            lie: LieOptions {
                max_iter: n.lie_max_iter,
                ..LieOptions::default()
            },
            prune_relative: n.prune_relative,
            norm_domain: self.norms.domain()?,
            tame: self.norms.tame(self.seed),
        })
    }

    pub fn partial_config(&self) -> PartialConfig {
        PartialConfig {
            m_order: self.resonance.m_order,
            rho: self.normal_form.rho,
            eta_tilde: self.resonance.eta_tilde,
            tau: self.resonance.tau,
            prune_relative: self.normal_form.partial_prune_relative,
        }
    }

    pub fn stickiness(&self, path: IntegrationPath, seed: u64) -> StickinessConfig {
        let d = &self.dynamics;
        StickinessConfig {
            delta: d.delta,
            m_order: self.resonance.m_order,
            p: d.p,
            horizon: d.horizon,
            sample_interval: d.sample_interval,
            path,
            integrator: IntegratorOptions {
                dt: d.dt,
                energy_guard: d.energy_guard,
                ..IntegratorOptions::default()
            },
            flow_steps: d.flow_steps,
            seed,
        }
    }
}

/// Parses an override value as a TOML value, falling back to a string.
fn parse_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t
            .remove("v")
            .unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

/// Sets `path` (dot separated) in `table`, creating sections as needed.
pub fn set_path(table: &mut toml::Table, path: &str, raw: &str) -> Result<()> {
    let parts: Vec<&str> = path.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        bail!("invalid override key `{path}`");
    }
    let (last, sections) = parts.split_last().expect("nonempty");
    let mut cur = table;
    for s in sections {
        let entry = cur
            .entry(s.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| anyhow!("override `{path}`: `{s}` is not a section"))?;
    }
    cur.insert(last.to_string(), parse_value(raw));
    Ok(())
}

/// Reads the configuration file (if any), applies environment overrides
/// and then `section.key=value` overrides, and deserializes the result.
pub fn load(
    path: Option<&Path>,
    env: impl IntoIterator<Item = (String, String)>,
    sets: &[String],
) -> Result<RunConfig> {
    let mut table = match path {
        Some(p) => std::fs::read_to_string(p)
            .with_context(|| format!("reading config {}", p.display()))?
            .parse::<toml::Table>()
            .with_context(|| format!("parsing config {}", p.display()))?,
        None => toml::Table::new(),
    };
    let mut env: Vec<(String, String)> = env
        .into_iter()
        .filter(|(k, _)| k.starts_with(ENV_PREFIX))
        .collect();
    env.sort();
    for (k, v) in env {
        let key = k[ENV_PREFIX.len()..].to_lowercase().replace("__", ".");
        set_path(&mut table, &key, &v).with_context(|| format!("environment variable {k}"))?;
    }
    for s in sets {
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| anyhow!("override `{s}` is not of the form section.key=value"))?;
        set_path(&mut table, k.trim(), v.trim())?;
    }
    let cfg: RunConfig = toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| anyhow!("invalid configuration: {}", e.message()))?;
    Ok(cfg)
}
