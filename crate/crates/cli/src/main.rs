use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

mod commands;
mod config;
mod manifest;

use commands::{Ctx, Format};
use manifest::{now, Outputs, RunManifest};

/// Build, normalize and simulate truncated beam-lattice Hamiltonians.
#[derive(Debug, Parser)]
#[command(name = "kamstick", version)]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for every random choice; overrides the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; overrides the configuration (0 means all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Directory receiving the outputs.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Directory holding the outputs of earlier steps (defaults to the output directory).
    #[arg(long, global = true)]
    input: Option<PathBuf>,
    /// Format of tabular payloads.
    #[arg(long, global = true, value_enum, default_value = "json")]
    format: Format,
    /// Configuration override `section.key=value`; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    sets: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Assemble the truncated Hamiltonian at a parameter point.
    Build,
    /// Compute the order-2 and partial normal forms.
    NormalForm,
    /// Certify non-resonance of the parameter point.
    Resonance,
    /// Estimate the measure of resonant parameters.
    Measure,
    /// Report tame norms of the perturbation and the normal-form parts.
    Norms,
    /// Integrate trajectories and measure the distance to the torus.
    Simulate,
    /// Run build, resonance, normal-form, norms and simulate in order.
    Pipeline,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Build => "build",
            Command::NormalForm => "normal-form",
            Command::Resonance => "resonance",
            Command::Measure => "measure",
            Command::Norms => "norms",
            Command::Simulate => "simulate",
            Command::Pipeline => "pipeline",
        }
    }
}

fn run(cli: Cli) -> Result<i32> {
    let started = now();
    let mut cfg = config::load(cli.config.as_deref(), std::env::vars(), &cli.sets)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(w) = cli.workers {
        cfg.workers = w;
    }
    cfg.validate()?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build_global()
        .context("starting the worker pool")?;
    let out = Outputs::new(&cli.out_dir)?;
    let mut ctx = Ctx {
        input: cli.input.clone().unwrap_or_else(|| cli.out_dir.clone()),
        cfg: cfg.clone(),
        format: cli.format,
        out,
        violations: Vec::new(),
    };
    match cli.command {
        Command::Build => commands::build(&mut ctx)?,
        Command::NormalForm => commands::normal_form(&mut ctx)?,
        Command::Resonance => commands::resonance(&mut ctx)?,
        Command::Measure => commands::measure(&mut ctx)?,
        Command::Norms => commands::norms(&mut ctx)?,
        Command::Simulate => commands::simulate(&mut ctx)?,
        Command::Pipeline => commands::pipeline(&mut ctx)?,
    }
    let exit_code = if ctx.violations.is_empty() { 0 } else { 2 };
    let name = cli.command.name();
    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: name.into(),
        seed: cfg.seed,
        workers: cfg.workers,
        config: cfg,
        started,
        finished: now(),
        exit_code,
        outcome: ctx.violations,
        outputs: ctx.out.records().to_vec(),
    };
    ctx.out
        .write_json(&format!("{name}.manifest.json"), &manifest)?;
    Ok(exit_code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
