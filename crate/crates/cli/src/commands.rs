use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use kamstick_core::dynamics::{
    max_distance_gap, stickiness_ensemble, IntegrationPath, NormalFormRun, StickinessReport,
};
use kamstick_core::model::{
    assemble_hamiltonian, build_sites, BuildReport, FrequencyMap, Hamiltonian, SiteLattice,
};
use kamstick_core::normal_form::{
    order2_step, partial_normal_form, NormalFormLog, PartialNormalFormOutput,
};
use kamstick_core::norms::{
    phase_norm_ordering, vector_field_tame_norm, NormReport, OrderingReport, ParameterGrid,
};
use kamstick_core::resonance::{certify, measure_estimate};
use kamstick_core::series::Series;
use kamstick_core::Error as CoreError;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::manifest::Outputs;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

/// Shared state of one invocation.
pub struct Ctx {
    pub cfg: RunConfig,
    pub format: Format,
    /// Directory holding artifacts of earlier steps.
    pub input: PathBuf,
    pub out: Outputs,
    /// Property violations found so far; any entry makes the exit code 2.
    pub violations: Vec<String>,
}

impl Ctx {
    fn violation(&mut self, msg: String) {
        println!("violation: {msg}");
        self.violations.push(msg);
    }
}

const MODEL_N: &str = "model/n.series";
const MODEL_P: &str = "model/p.series";
const BUILD: &str = "model/build.json";
const NF_SUMMARY: &str = "normal_form/summary.json";
const NF_TRANSFORMED: &str = "normal_form/transformed.series";

#[derive(Debug, Serialize, Deserialize)]
struct BuildSummary {
    xi: Vec<f64>,
    n_terms: usize,
    report: BuildReport,
}

struct Model {
    lattice: SiteLattice,
    xi: Vec<f64>,
    ham: Hamiltonian,
}

fn read_series(dir: &Path, rel: &str) -> Result<Series> {
    let path = dir.join(rel);
    let text = std::fs::read_to_string(&path)
        .with_context(|| format!("missing input {}", path.display()))?;
    Series::from_text(&text).with_context(|| format!("reading {}", path.display()))
}

fn read_json<T: for<'de> Deserialize<'de>>(dir: &Path, rel: &str) -> Result<T> {
    let path = dir.join(rel);
    let text = std::fs::read_to_string(&path)
        .with_context(|| format!("missing input {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("reading {}", path.display()))
}

/// `ξ` from the configuration, or drawn uniformly from the box with the
/// run seed.
fn parameter_point(cfg: &RunConfig, lattice: &SiteLattice) -> Result<Vec<f64>> {
    let len = lattice.retained.len();
    if !cfg.parameter.xi.is_empty() {
        if cfg.parameter.xi.len() != len {
            bail!(
                "configuration error in `parameter.xi`: needs {len} entries (one per retained site), got {}",
                cfg.parameter.xi.len()
            );
        }
        return Ok(cfg.parameter.xi.clone());
    }
    let [lo, hi] = cfg.model.param_box;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    Ok((0..len).map(|_| rng.gen_range(lo..hi)).collect())
}

fn load_model(ctx: &Ctx) -> Result<Model> {
    let lattice = build_sites(&ctx.cfg.model)?;
    let summary: BuildSummary = read_json(&ctx.input, BUILD)?;
    let n = read_series(&ctx.input, MODEL_N)?;
    let p = read_series(&ctx.input, MODEL_P)?;
    if n.table().len() != lattice.normal.len() {
        bail!("model files do not match the configured lattice; rerun `build`");
    }
    Ok(Model {
        lattice,
        xi: summary.xi,
        ham: Hamiltonian { n, p },
    })
}

pub fn build(ctx: &mut Ctx) -> Result<()> {
    let cfg = &ctx.cfg;
    let lattice = build_sites(&cfg.model)?;
    let xi = parameter_point(cfg, &lattice)?;
    let dp = cfg.norms.domain()?;
    let (ham, report) = assemble_hamiltonian(&cfg.model, &lattice, &xi, &dp)?;
    println!(
        "build: {} retained sites, {} normal, P has {} terms, |||X_P||| <= {:.3e}, momentum violations {}",
        report.retained_sites,
        report.normal_sites,
        report.p_terms,
        report.tame_norm_p.value_upper,
        report.momentum_violations
    );
    let violations = report.momentum_violations;
    let summary = BuildSummary {
        xi,
        n_terms: ham.n.len(),
        report,
    };
    ctx.out.write(MODEL_N, ham.n.to_text().as_bytes())?;
    ctx.out.write(MODEL_P, ham.p.to_text().as_bytes())?;
    ctx.out.write_json(BUILD, &summary)?;
    if violations > 0 {
        ctx.violation(format!("{violations} terms violate the momentum rule"));
    }
    Ok(())
}

pub fn resonance(ctx: &mut Ctx) -> Result<()> {
    let lattice = build_sites(&ctx.cfg.model)?;
    let xi = match read_json::<BuildSummary>(&ctx.input, BUILD) {
        Ok(s) => s.xi,
        Err(_) => parameter_point(&ctx.cfg, &lattice)?,
    };
    let freq = FrequencyMap::new(&lattice);
    let report = certify(
        &xi,
        &lattice,
        &freq,
        &ctx.cfg.resonance,
        ctx.cfg.model.param_box,
    )?;
    println!(
        "resonance: {} queries checked, {} pruned, {} violations, min divisor/threshold {:.3e}",
        report.checked_count,
        report.pruned_count,
        report.violations.len(),
        report.min_ratio
    );
    ctx.out.write_json("resonance/certificate.json", &report)?;
    if !report.certified {
        ctx.violation(format!(
            "ξ is not ({}, N, {})-non-resonant: {} violated inequalities",
            ctx.cfg.resonance.eta_tilde,
            ctx.cfg.resonance.m_order,
            report.violations.len()
        ));
    }
    Ok(())
}

pub fn measure(ctx: &mut Ctx) -> Result<()> {
    let lattice = build_sites(&ctx.cfg.model)?;
    let freq = FrequencyMap::new(&lattice);
    let m = &ctx.cfg.measure;
    let table = measure_estimate(
        &lattice,
        &freq,
        &ctx.cfg.resonance,
        ctx.cfg.model.param_box,
        &m.etas,
        m.samples,
        ctx.cfg.seed,
    )?;
    let mut text = String::new();
    let _ = writeln!(
        text,
        "{:>10} {:>10} {:>10} {:>10} {:>8}",
        "eta", "fraction", "ci_low", "ci_high", "c_hat"
    );
    for r in &table.rows {
        let _ = writeln!(
            text,
            "{:>10.1e} {:>10.4} {:>10.4} {:>10.4} {:>8.3}",
            r.eta_tilde, r.fraction, r.ci_low, r.ci_high, r.c_hat
        );
    }
    print!("{text}");
    println!(
        "measure: fitted c = {:.3}, slope = {}, bound holds: {}",
        table.c_fit,
        table
            .slope
            .map_or_else(|| "n/a".to_string(), |s| format!("{s:.3}")),
        table.bound_holds
    );
    match ctx.format {
        Format::Csv => ctx
            .out
            .write("measure/measure.csv", table.to_csv().as_bytes())?,
        Format::Json => ctx.out.write_json("measure/measure.json", &table)?,
    }
    if !table.bound_holds {
        ctx.violation("resonant fraction exceeds c·η̃^{1/2}".into());
    }
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct NormalFormSummary {
    generators: usize,
    order2: NormalFormLog,
    partial: NormalFormLog,
    norm_z: NormReport,
    norm_p: NormReport,
    norm_q: NormReport,
    terms_z: usize,
    terms_p: usize,
    terms_q: usize,
    terms_unresolved: usize,
}

fn generator_path(i: usize) -> String {
    format!("normal_form/generators/{i:03}.series")
}

pub fn normal_form(ctx: &mut Ctx) -> Result<()> {
    let model = load_model(ctx)?;
    let nf = ctx.cfg.normal_form_config()?;
    let o2 = match order2_step(&model.ham, &model.xi, &nf) {
        Err(e @ CoreError::DivisorCollapse { .. }) => {
            ctx.violation(e.to_string());
            return Ok(());
        }
        r => r?,
    };
    let pnf: PartialNormalFormOutput =
        partial_normal_form(&o2, &model.lattice, &ctx.cfg.partial_config(), &nf)?;
    let generators: Vec<&Series> = o2.generators.iter().chain(&pnf.generators).collect();
    let out = &mut ctx.out;
    for (i, g) in generators.iter().enumerate() {
        out.write(&generator_path(i), g.to_text().as_bytes())?;
    }
    out.write(
        "normal_form/n_breve.series",
        pnf.n_breve.to_text().as_bytes(),
    )?;
    out.write("normal_form/z.series", pnf.z.to_text().as_bytes())?;
    out.write("normal_form/p.series", pnf.p.to_text().as_bytes())?;
    out.write("normal_form/q.series", pnf.q.to_text().as_bytes())?;
    out.write(
        "normal_form/unresolved.series",
        pnf.unresolved.to_text().as_bytes(),
    )?;
    out.write(NF_TRANSFORMED, pnf.total()?.to_text().as_bytes())?;
    let shifts = &o2.shifts;
    match ctx.format {
        Format::Csv => {
            let mut csv = String::from("kind,index,shift\n");
            for (i, v) in shifts.d_omega.iter().enumerate() {
                let _ = writeln!(csv, "omega,{i},{v:e}");
            }
            for (i, v) in shifts.d_big_omega.iter().enumerate() {
                let _ = writeln!(csv, "big_omega,{i},{v:e}");
            }
            out.write("normal_form/shifts.csv", csv.as_bytes())?;
        }
        Format::Json => out.write_json("normal_form/shifts.json", shifts)?,
    }
    let max_shift = shifts
        .d_omega
        .iter()
        .chain(&shifts.d_big_omega)
        .fold(0.0f64, |m, v| m.max(v.abs()));
    println!(
        "normal-form: {} generators, max frequency shift {:.3e}, Z/P/Q terms {}/{}/{}, |||X_P||| <= {:.3e} at rho = {}",
        generators.len(),
        max_shift,
        pnf.z.len(),
        pnf.p.len(),
        pnf.q.len(),
        pnf.norm_p.value_upper,
        ctx.cfg.normal_form.rho
    );
    let residual = pnf.log.residual_mass;
    let summary = NormalFormSummary {
        generators: generators.len(),
        order2: o2.log,
        partial: pnf.log,
        norm_z: pnf.norm_z,
        norm_p: pnf.norm_p,
        norm_q: pnf.norm_q,
        terms_z: pnf.z.len(),
        terms_p: pnf.p.len(),
        terms_q: pnf.q.len(),
        terms_unresolved: pnf.unresolved.len(),
    };
    out.write_json(NF_SUMMARY, &summary)?;
    if residual > 0.0 {
        ctx.violation(format!(
            "terms of order ≤ M + 2 with mass {residual:e} could not be removed"
        ));
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct NormsSummary {
    perturbation: NormReport,
    ordering: OrderingReport,
    normal_form: Option<[NormReport; 3]>,
}

fn norm_table(name: &str, r: &NormReport) -> String {
    let mut s = format!(
        "{name}: |||X|||^T in [{:.4e}, {:.4e}]\n",
        r.value_lower, r.value_upper
    );
    let _ = writeln!(
        s,
        "{:>4} {:>12} {:>12} {:>12} {:>12} {:>12}",
        "h", "W_y", "W_x", "T_p", "T_d", "weighted"
    );
    for c in &r.breakdown {
        let _ = writeln!(
            s,
            "{:>4} {:>12.4e} {:>12.4e} {:>12.4e} {:>12.4e} {:>12.4e}",
            c.h,
            c.y_norm + 0.0,
            c.x_norm + 0.0,
            c.z_tame + 0.0,
            c.z_d + 0.0,
            c.weighted_upper + 0.0
        );
    }
    s
}

pub fn norms(ctx: &mut Ctx) -> Result<()> {
    let model = load_model(ctx)?;
    let dp = ctx.cfg.norms.domain()?;
    let tame = ctx.cfg.norms.tame(ctx.cfg.seed);
    let grid = ParameterGrid::fixed();
    let p_norm = vector_field_tame_norm(&model.ham.p, &dp, &grid, &tame)?;
    print!("{}", norm_table("P", &p_norm));
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.cfg.seed);
    let ordering = phase_norm_ordering(
        &model.ham.p,
        &dp,
        ctx.cfg.norms.ordering_points,
        0.95,
        &tame,
        &mut rng,
    )?;
    println!(
        "norms: sampled sup of the weighted phase norm {:.4e} vs bound {:.4e} ({} violations)",
        ordering.sampled_sup, ordering.tame_upper, ordering.violations
    );
    let nf = if ctx.input.join(NF_SUMMARY).exists() {
        let rdp = dp.with_r(ctx.cfg.normal_form.rho);
        let mut reports = Vec::new();
        for (name, rel) in [
            ("Z", "normal_form/z.series"),
            ("P (normal form)", "normal_form/p.series"),
            ("Q", "normal_form/q.series"),
        ] {
            let s = read_series(&ctx.input, rel)?;
            let r = if s.is_empty() {
                NormReport::zero()
            } else {
                vector_field_tame_norm(&s, &rdp, &grid, &tame)?
            };
            print!("{}", norm_table(name, &r));
            reports.push(r);
        }
        let [z, p, q]: [NormReport; 3] = reports.try_into().expect("three reports");
        Some([z, p, q])
    } else {
        None
    };
    let violations = ordering.violations;
    ctx.out.write_json(
        "norms/norms.json",
        &NormsSummary {
            perturbation: p_norm,
            ordering,
            normal_form: nf,
        },
    )?;
    if violations > 0 {
        ctx.violation(format!("{violations} sampled points exceed the tame bound"));
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct SimulateSummary {
    trajectories: usize,
    delta: f64,
    horizon: f64,
    max_distance: f64,
    violated: bool,
    energy_drift: f64,
    distance_drift_rate: f64,
    control_drift_rate: Option<f64>,
    /// Control drift rate over normal-form drift rate.
    control_factor: Option<f64>,
    /// Largest distance gap between the two integration paths.
    cross_validation_gap: Option<f64>,
    failures: Vec<String>,
}

fn reports_csv(reports: &[StickinessReport]) -> String {
    let mut out = String::from("seed,t,distance,energy\n");
    for r in reports {
        for s in &r.samples {
            let _ = writeln!(out, "{},{:e},{:e},{:e}", r.seed, s.t, s.distance, s.energy);
        }
    }
    out
}

fn write_reports(ctx: &mut Ctx, name: &str, reports: &[StickinessReport]) -> Result<()> {
    match ctx.format {
        Format::Csv => ctx.out.write(
            &format!("simulate/{name}.csv"),
            reports_csv(reports).as_bytes(),
        ),
        Format::Json => ctx
            .out
            .write_json(&format!("simulate/{name}.json"), &reports),
    }
}

pub fn simulate(ctx: &mut Ctx) -> Result<()> {
    let model = load_model(ctx)?;
    let summary: serde_json::Value = read_json(&ctx.input, NF_SUMMARY)?;
    let count = summary["generators"]
        .as_u64()
        .context("normal-form summary lacks the generator count")? as usize;
    let generators = (0..count)
        .map(|i| read_series(&ctx.input, &generator_path(i)))
        .collect::<Result<Vec<_>>>()?;
    let transformed = read_series(&ctx.input, NF_TRANSFORMED)?;
    let original = model.ham.total();
    let run = NormalFormRun {
        original: &original,
        transformed: &transformed,
        generators: &generators,
        rho: Some(ctx.cfg.normal_form.rho),
    };
    let d = &ctx.cfg.dynamics;
    let seeds: Vec<u64> = (0..d.trajectories as u64)
        .map(|i| ctx.cfg.seed.wrapping_add(i))
        .collect();
    let main_path = d.path;
    let cfg = ctx.cfg.stickiness(main_path, ctx.cfg.seed);
    let main = stickiness_ensemble(&run, &cfg, &seeds)?;
    let control = if d.control && main_path != IntegrationPath::Disabled {
        let c = ctx.cfg.stickiness(IntegrationPath::Disabled, ctx.cfg.seed);
        Some(stickiness_ensemble(&run, &c, &seeds)?)
    } else {
        None
    };
    let cross = if d.cross_validate {
        let other = match main_path {
            IntegrationPath::Original => IntegrationPath::Transformed,
            _ => IntegrationPath::Original,
        };
        let c = ctx.cfg.stickiness(other, ctx.cfg.seed);
        Some(stickiness_ensemble(&run, &c, &seeds)?)
    } else {
        None
    };
    let fold = |rs: &[StickinessReport], f: fn(&StickinessReport) -> f64| {
        rs.iter().map(f).fold(0.0f64, f64::max)
    };
    let rate = fold(&main, |r| r.distance_drift_rate);
    let control_rate = control.as_ref().map(|c| fold(c, |r| r.distance_drift_rate));
    let gap = match &cross {
        Some(c) => {
            let mut g = 0.0f64;
            for (a, b) in main.iter().zip(c) {
                g = g.max(max_distance_gap(a, b).context("paths sampled at different times")?);
            }
            Some(g)
        }
        None => None,
    };
    let s = SimulateSummary {
        trajectories: main.len(),
        delta: cfg.delta,
        horizon: cfg.horizon(),
        max_distance: fold(&main, |r| r.max_distance),
        violated: main.iter().any(|r| r.violated),
        energy_drift: fold(&main, |r| r.energy_drift),
        distance_drift_rate: rate,
        control_drift_rate: control_rate,
        control_factor: control_rate.map(|c| if rate > 0.0 { c / rate } else { f64::INFINITY }),
        cross_validation_gap: gap,
        failures: main.iter().flat_map(|r| r.failures.clone()).collect(),
    };
    println!(
        "simulate: max distance {:.6e} (2δ = {:.3e}) over |t| ≤ {}, energy drift {:.3e}, drift rate {:.3e}",
        s.max_distance,
        2.0 * s.delta,
        s.horizon,
        s.energy_drift,
        s.distance_drift_rate
    );
    if let (Some(c), Some(f)) = (s.control_drift_rate, s.control_factor) {
        println!("simulate: control drift rate {c:.3e}, ratio {f:.3e}");
    }
    if let Some(g) = s.cross_validation_gap {
        println!("simulate: integration paths differ by at most {g:.3e} in distance");
    }
    write_reports(ctx, "stickiness", &main)?;
    if let Some(c) = &control {
        write_reports(ctx, "control", c)?;
    }
    if let Some(c) = &cross {
        write_reports(ctx, "cross_validation", c)?;
    }
    let tol = ctx.cfg.dynamics.energy_tolerance;
    ctx.out.write_json("simulate/summary.json", &s)?;
    if s.violated {
        ctx.violation(format!(
            "torus distance {:e} exceeds 2δ = {:e}",
            s.max_distance,
            2.0 * s.delta
        ));
    }
    if s.energy_drift > tol {
        ctx.violation(format!(
            "relative energy drift {:e} exceeds {tol:e}",
            s.energy_drift
        ));
    }
    if !s.failures.is_empty() {
        ctx.violation(format!("integration failed: {}", s.failures.join("; ")));
    }
    Ok(())
}

/// build → resonance → normal-form → norms → simulate; stops after a
/// certification failure.
pub fn pipeline(ctx: &mut Ctx) -> Result<()> {
    ctx.input = ctx.out.dir().to_path_buf();
    build(ctx)?;
    resonance(ctx)?;
    if !ctx.violations.is_empty() {
        return Ok(());
    }
    normal_form(ctx)?;
    if !ctx.input.join(NF_SUMMARY).exists() {
        return Ok(());
    }
    norms(ctx)?;
    simulate(ctx)
}
