//! `mll`: batch front end for the two-chain ladder laboratory.
//!
//! Exit status is 0 on success, 1 when any task failed (the manifest records
//! which) and 2 for invalid configuration or arguments.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use mll_core::io::{
    perturb_summary, resolve_workers, run, PerturbTask, RunConfig, RunOptions, SpectrumTask, TaskSpec, Tolerances,
};
use mll_core::perturbation::MixingConvention;
use mll_core::{BoundaryCondition, Chain, LadderParams};

#[derive(Parser)]
#[command(name = "mll", version, about = "Spectra and localization of coupled non-reciprocal chains")]
struct Cli {
    /// Worker threads (overrides MLL_WORKERS and the config).
    #[arg(long, global = true, value_name = "K")]
    workers: Option<usize>,

    /// JSON file replacing the config's `tolerances` block.
    #[arg(long, global = true, value_name = "FILE")]
    tolerance_overrides: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute every task of a run configuration.
    Run { config: PathBuf },
    /// Execute only the sweep and scan tasks of a run configuration.
    Sweep { config: PathBuf },
    /// Spectrum table and scatter plot for one parameter set.
    Spectrum {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_name = "obc|pbc|mbc")]
        bc: BoundaryCondition,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// First-order boundary mixing of the skin-state ansatz.
    Perturb {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_name = "a|b")]
        chain: Chain,
        #[arg(long, default_value = "per-state", value_name = "per-state|summed|single-v")]
        convention: MixingConvention,
        /// Write a run directory instead of printing JSON.
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, allow_negative_numbers = true)]
    t1: f64,
    #[arg(long, allow_negative_numbers = true)]
    delta_a: f64,
    #[arg(long, allow_negative_numbers = true)]
    delta_b: f64,
    #[arg(long, allow_negative_numbers = true)]
    t0: f64,
    #[arg(long, allow_negative_numbers = true)]
    v: f64,
}

impl ModelArgs {
    fn params(&self) -> LadderParams {
        LadderParams::new(self.n, self.t1, self.delta_a, self.delta_b, self.t0, self.v)
    }
}

enum Failure {
    Config(anyhow::Error),
    Tasks,
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Config(e)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Tasks) => ExitCode::from(1),
        Err(Failure::Config(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn load_config(path: &Path) -> anyhow::Result<RunConfig> {
    RunConfig::from_file(path).with_context(|| format!("invalid configuration {}", path.display()))
}

fn execute(cli: Cli) -> Result<(), Failure> {
    let overrides = cli
        .tolerance_overrides
        .as_deref()
        .map(Tolerances::from_file)
        .transpose()
        .context("reading tolerance overrides")?;
    let mut config = match cli.command {
        Command::Run { config } => load_config(&config)?,
        Command::Sweep { config } => {
            let mut cfg = load_config(&config)?;
            cfg.tasks.retain(|t| matches!(t, TaskSpec::Sweep(_) | TaskSpec::Scan(_)));
            if cfg.tasks.is_empty() {
                return Err(anyhow::anyhow!("{} contains no sweep or scan task", config.display()).into());
            }
            cfg
        }
        Command::Spectrum { model, bc, out } => RunConfig {
            model: model.params(),
            boundary: bc,
            output_dir: out,
            tasks: vec![TaskSpec::Spectrum(SpectrumTask {
                dir: None,
                boundary: None,
                plot: true,
                color_by: Default::default(),
                pbc_curve: true,
                overlay: Vec::new(),
            })],
            workers: None,
            tolerances: Tolerances::default(),
        },
        Command::Perturb {
            model,
            chain,
            convention,
            out,
        } => {
            let params = model.params();
            let Some(out) = out else {
                params.validate().context("invalid model")?;
                let summary = perturb_summary(&params, chain, convention).context("perturbation failed")?;
                println!("{}", serde_json::to_string_pretty(&summary).context("serializing result")?);
                return Ok(());
            };
            RunConfig {
                model: params,
                boundary: BoundaryCondition::Moebius,
                output_dir: out,
                tasks: vec![TaskSpec::Perturb(PerturbTask {
                    dir: None,
                    chain: Some(chain),
                    convention,
                })],
                workers: None,
                tolerances: Tolerances::default(),
            }
        }
    };
    if let Some(t) = overrides {
        config.tolerances = t;
    }
    let env = std::env::var("MLL_WORKERS").ok();
    let workers = resolve_workers(cli.workers, env.as_deref(), config.workers).context("worker count")?;
    let timestamp = match std::env::var("SOURCE_DATE_EPOCH") {
        Ok(raw) => Some(raw.trim().parse::<u64>().context("SOURCE_DATE_EPOCH must be an integer")?),
        Err(_) => None,
    };
    let report = run(
        &config,
        &RunOptions {
            workers: Some(workers),
            timestamp,
        },
    )
    .context("run aborted")?;
    for task in &report.manifest.tasks {
        match &task.error {
            Some(e) => eprintln!("task {} ({}): FAILED: {e}", task.index, task.task),
            None => {
                for w in &task.warnings {
                    eprintln!("task {} ({}): warning: {w}", task.index, task.task);
                }
            }
        }
    }
    println!("{}", report.output_dir.join(mll_core::io::MANIFEST_NAME).display());
    if report.exit_code != 0 {
        return Err(Failure::Tasks);
    }
    Ok(())
}
