use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::anyhow;
use clap::{Args, Parser, Subcommand};
use rispilot_cli::{cmd_analyze, cmd_selftest, cmd_sweep, cmd_train, CliError, ExperimentConfig, Scale, SelftestOptions};

/// Superimposed-pilot RIS link simulator: training, sweeps and analysis.
#[derive(Parser)]
#[command(name = "rispilot", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// TOML experiment config; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for dataset generation and sweeps.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// desk or paper.
    #[arg(long, global = true)]
    scale: Option<Scale>,
    #[arg(long, global = true)]
    epochs_ce: Option<usize>,
    #[arg(long, global = true)]
    epochs_fus: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Train CE-Net then FUS-Net for every grid cell.
    Train,
    /// Evaluate all methods over the grid and write results.csv.
    Sweep {
        /// Checkpoint directory; defaults to <out>/models.
        #[arg(long)]
        models: Option<PathBuf>,
    },
    /// Write complexity.csv, energy.csv and runtime.csv.
    Analyze {
        #[arg(long)]
        models: Option<PathBuf>,
    },
    /// Run the fast property suite.
    Selftest {
        #[arg(long, hide = true)]
        corrupt_backward: bool,
    },
}

fn load(common: &Common) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::load(path).map_err(CliError::Config)?,
        None => ExperimentConfig::default(),
    };
    if let Some(out) = &common.out {
        cfg.out_dir = out.clone();
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(w) = common.workers {
        cfg.workers = w;
    }
    if let Some(s) = common.scale {
        cfg.scale = s;
    }
    if let Some(e) = common.epochs_ce {
        cfg.train.epochs_ce = e;
    }
    if let Some(e) = common.epochs_fus {
        cfg.train.epochs_fus = e;
    }
    cfg.validate().map_err(CliError::Config)?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Selftest { corrupt_backward } => cmd_selftest(SelftestOptions { corrupt_backward }).map(|_| ()),
        Command::Train => {
            let cfg = load(&cli.common)?;
            let cells = cmd_train(&cfg)?;
            println!("trained {} cell(s) into {}", cells.len(), cfg.models_dir().display());
            Ok(())
        }
        Command::Sweep { models } => {
            let cfg = load(&cli.common)?;
            let report = cmd_sweep(&cfg, models.as_deref())?;
            println!("{} rows written to {}", report.rows.len(), cfg.out_dir.join("results.csv").display());
            Ok(())
        }
        Command::Analyze { models } => {
            let cfg = load(&cli.common)?;
            cmd_analyze(&cfg, models.as_deref())?;
            println!("analysis written to {}", cfg.out_dir.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if e.use_stderr() => {
            let _ = e.print();
            eprintln!("{}", CliError::Config(anyhow!("invalid arguments")));
            return ExitCode::from(1);
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
