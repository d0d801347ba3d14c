//! `fieldkde`: configuration-driven experiments on kernel density
//! estimation for linear random fields.
//!
//! Exit status: 0 when the run completed and no gating verdict failed,
//! 2 when a gating verdict failed, 1 on any error.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand, ValueEnum};
use fieldkde_core::report::ReportFormat;

use crate::commands::{Ctx, Outcome};
use crate::manifest::RunManifest;

#[derive(Parser, Debug)]
#[command(name = "fieldkde", version, about = "Kernel density estimation experiments on linear random fields")]
struct Cli {
    /// JSON config document.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Override a config entry, e.g. `experiment.replicates=1000`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Master seed (overrides `experiment.seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; never changes numeric output.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, env = "FIELDKDE_OUT_DIR", default_value = "fieldkde-out")]
    out: PathBuf,
    #[arg(long, global = true, value_enum, default_value_t = Format::Both)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Json,
    Csv,
    Both,
}

impl From<Format> for ReportFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Json => ReportFormat::Json,
            Format::Csv => ReportFormat::Csv,
            Format::Both => ReportFormat::Both,
        }
    }
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Feasible δ window, m_n growth sequences and the comparison conditions.
    CheckConditions,
    /// Generate one coupled field triple and its moment diagnostics.
    GenField,
    /// Evaluate the estimator on one generated field.
    Kde,
    /// Monte Carlo of the normalized statistic and its decomposition.
    CltRun,
    /// Big-block decomposition and Lindeberg quantities.
    Blocks,
    /// Rectangle moments, the moment inequality and covariance decay.
    MomentCheck,
    /// Gap between the full and truncated kernel terms, fixed and growing m.
    FixedMGap,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::CheckConditions => "check-conditions",
            Command::GenField => "gen-field",
            Command::Kde => "kde",
            Command::CltRun => "clt-run",
            Command::Blocks => "blocks",
            Command::MomentCheck => "moment-check",
            Command::FixedMGap => "fixed-m-gap",
        }
    }
}

fn run(cli: &Cli, manifest: &mut RunManifest) -> Result<Outcome> {
    let mut cfg = config::load(cli.config.as_deref(), &cli.set)?;
    if let Some(seed) = cli.seed {
        cfg.experiment.seed = seed;
    }
    if cli.threads.is_some() {
        cfg.experiment.threads = cli.threads;
    }
    manifest.master_seed = Some(cfg.experiment.seed);
    manifest.threads = cfg.experiment.threads;
    manifest.config = Some(cfg.clone());
    let ctx = Ctx {
        cfg: &cfg,
        out: &cli.out,
        format: cli.format.into(),
    };
    match cli.command {
        Command::CheckConditions => commands::check_conditions(&ctx),
        Command::GenField => commands::gen_field(&ctx),
        Command::Kde => commands::kde(&ctx),
        Command::CltRun => commands::clt_run(&ctx),
        Command::Blocks => commands::blocks(&ctx),
        Command::MomentCheck => commands::moment_check(&ctx),
        Command::FixedMGap => commands::fixed_m(&ctx),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let mut manifest = RunManifest::new(cli.command.name());
    let result = run(&cli, &mut manifest);
    let code = match &result {
        Ok(outcome) => {
            manifest.outputs = outcome.outputs.clone();
            manifest.verdicts = outcome.verdicts.clone();
            for (k, v) in &outcome.verdicts {
                println!("{k}: {}", v.as_str());
            }
            if outcome.failed() {
                manifest.status = "verdict_fail".into();
                2
            } else {
                manifest.status = "ok".into();
                0
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            manifest.status = "error".into();
            manifest.error = Some(format!("{e:#}"));
            1
        }
    };
    match manifest.write(&cli.out) {
        Ok(path) => println!("manifest: {}", path.display()),
        Err(e) => eprintln!("could not write the run manifest: {e:#}"),
    }
    ExitCode::from(code)
}
