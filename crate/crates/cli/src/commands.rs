//! The four subcommands. Each returns a [`CliError`] whose kind selects the
//! process exit code.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, Context};
use rispilot_core::analysis::{
    bench_frames, complexity_csv, complexity_table, energy_csv, runtime_bench, runtime_csv, ResourceModel, RuntimeRow,
};
use rispilot_core::models::{Arch, CeNet, FusNet, Model};
use rispilot_core::neuralnet::Checkpoint;
use rispilot_core::pipeline::{
    calibrate_covariance, evaluate_sweep, train_cell, CellModels, CellTraining, Method, SweepCell, SweepReport,
    CALIBRATION_DRAWS,
};
use rispilot_core::rng::{derive_seed, stream};
use rispilot_core::Error as CoreError;

use crate::config::{cell_name, ExperimentConfig};

#[derive(Debug)]
pub enum CliError {
    /// Bad configuration or missing inputs. Exit code 1.
    Config(anyhow::Error),
    /// Failure while running, including divergence. Exit code 2.
    Runtime(anyhow::Error),
    /// Names of failed self-test properties. Exit code 3.
    Selftest(Vec<String>),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 1,
            Self::Runtime(_) => 2,
            Self::Selftest(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Config(e) => write!(f, "configuration error: {e:#}"),
            Self::Runtime(e) => write!(f, "runtime error: {e:#}"),
            Self::Selftest(names) => write!(f, "self-test failed: {}", names.join(", ")),
        }
    }
}

impl std::error::Error for CliError {}

fn runtime(e: impl Into<anyhow::Error>) -> CliError {
    CliError::Runtime(e.into())
}

fn config(e: impl Into<anyhow::Error>) -> CliError {
    CliError::Config(e.into())
}

/// Seed of the networks and datasets of one cell.
pub fn cell_seed(seed: u64, lambda: f64, taps: usize) -> u64 {
    derive_seed(seed, &cell_name(lambda, taps), 0)
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("cannot create `{}`", dir.display())).map_err(runtime)?;
    }
    fs::write(path, text).with_context(|| format!("cannot write `{}`", path.display())).map_err(runtime)
}

fn save_model(model: &Model, path: &Path) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("cannot create `{}`", dir.display())).map_err(runtime)?;
    }
    model.to_checkpoint().save(path).with_context(|| format!("cannot save `{}`", path.display())).map_err(runtime)
}

pub struct TrainedCell {
    pub lambda: f64,
    pub taps: usize,
    pub dir: PathBuf,
    pub training: CellTraining,
    /// Wall time spent training this cell.
    pub seconds: f64,
}

/// Trains every cell of the grid and writes `models/<cell>/{ce,fus}.ckpt`
/// with `loss_ce.csv` and `loss_fus.csv` beside them.
pub fn cmd_train(cfg: &ExperimentConfig) -> Result<Vec<TrainedCell>, CliError> {
    cfg.validate().map_err(config)?;
    let base = cfg.system().map_err(config)?;
    write(&cfg.out_dir.join("config.toml"), &cfg.to_toml())?;
    let mut out = Vec::new();
    for (lambda, taps) in cfg.cells() {
        let name = cell_name(lambda, taps);
        let dir = cfg.models_dir().join(&name);
        let sys = base.with_cell(lambda, taps).map_err(config)?;
        let tcfg = cfg.train_config(cell_seed(cfg.seed, lambda, taps));
        let started = Instant::now();
        let training = match train_cell(&sys, &tcfg) {
            Ok(t) => t,
            Err(e @ CoreError::Diverged { .. }) => {
                write(&dir.join("DIVERGED"), &format!("{e}\n"))?;
                return Err(runtime(anyhow!("cell {name}: {e}; artifacts in `{}` are incomplete", dir.display())));
            }
            Err(e) => return Err(runtime(anyhow!("cell {name}: {e}"))),
        };
        save_model(&training.models.ce, &dir.join("ce.ckpt"))?;
        save_model(&training.models.fus, &dir.join("fus.ckpt"))?;
        write(&dir.join("loss_ce.csv"), &training.loss_ce.to_csv())?;
        write(&dir.join("loss_fus.csv"), &training.loss_fus.to_csv())?;
        let fmt = |h: &rispilot_core::pipeline::LossHistory| {
            h.last().map(|e| format!("{:.4e}", e.val_loss)).unwrap_or_default()
        };
        let seconds = started.elapsed().as_secs_f64();
        eprintln!(
            "[train] {name}: {seconds:.1}s, final val loss ce {} fus {}",
            fmt(&training.loss_ce),
            fmt(&training.loss_fus)
        );
        out.push(TrainedCell { lambda, taps, dir, training, seconds });
    }
    Ok(out)
}

fn load_model(path: &Path, arch: Arch, n: usize) -> Result<Model, CliError> {
    let ckpt = Checkpoint::load(path).with_context(|| format!("cannot load `{}`", path.display())).map_err(config)?;
    let model = Model::from_checkpoint(ckpt, arch)
        .with_context(|| format!("bad checkpoint `{}`", path.display()))
        .map_err(config)?;
    if model.n_subcarriers() != n {
        return Err(config(anyhow!(
            "`{}` was trained for N={} but the config has N={n}",
            path.display(),
            model.n_subcarriers()
        )));
    }
    Ok(model)
}

/// Loads and validates the networks of one cell.
pub fn load_cell(dir: &Path, n: usize) -> Result<CellModels, CliError> {
    Ok(CellModels {
        ce: CeNet(load_model(&dir.join("ce.ckpt"), Arch::CeNet, n)?),
        fus: FusNet(load_model(&dir.join("fus.ckpt"), Arch::FusNet, n)?),
    })
}

/// Evaluates every cell with its checkpoints and writes `results.csv`.
pub fn cmd_sweep(cfg: &ExperimentConfig, models_dir: Option<&Path>) -> Result<SweepReport, CliError> {
    cfg.validate().map_err(config)?;
    let base = cfg.system().map_err(config)?;
    let models_dir = models_dir.map(Path::to_path_buf).unwrap_or_else(|| cfg.models_dir());
    let cells = cfg.cells();
    let loaded = cells
        .iter()
        .map(|&(l, t)| load_cell(&models_dir.join(cell_name(l, t)), base.n_subcarriers()))
        .collect::<Result<Vec<_>, _>>()?;
    let sweep_cells: Vec<SweepCell<'_>> = cells
        .iter()
        .zip(&loaded)
        .map(|(&(lambda, n_taps), m)| SweepCell { lambda, n_taps, models: Some(m) })
        .collect();
    let started = Instant::now();
    let report = evaluate_sweep(&base, &sweep_cells, &Method::ALL, &cfg.sweep.snr_db, cfg.sweep.n_frames, cfg.seed, cfg.workers)
        .map_err(runtime)?;
    eprintln!("[sweep] {} cells in {:.1}s", cells.len(), started.elapsed().as_secs_f64());
    write(&cfg.out_dir.join("results.csv"), &report.to_csv())?;
    Ok(report)
}

/// Writes `complexity.csv`, `energy.csv` and, unless disabled, `runtime.csv`.
pub fn cmd_analyze(cfg: &ExperimentConfig, models_dir: Option<&Path>) -> Result<(), CliError> {
    cfg.validate().map_err(config)?;
    let a = &cfg.analyze;
    let rows = complexity_table(&a.n_values).map_err(config)?;
    write(&cfg.out_dir.join("complexity.csv"), &complexity_csv(&rows))?;

    let mut lambdas = vec![cfg.power.lambda];
    lambdas.extend(cfg.sweep.lambda.iter().copied().filter(|l| *l != cfg.power.lambda));
    let models: Vec<ResourceModel> = lambdas
        .into_iter()
        .map(|lambda| ResourceModel {
            n_data: a.n_data,
            n_pilot: a.n_pilot,
            symbol_duration: 1.0,
            power: cfg.power.total_power,
            lambda,
        })
        .collect();
    write(&cfg.out_dir.join("energy.csv"), &energy_csv(&models).map_err(config)?)?;

    if a.runtime {
        let rows = runtime_rows(cfg, models_dir)?;
        write(&cfg.out_dir.join("runtime.csv"), &runtime_csv(&rows))?;
    }
    Ok(())
}

fn runtime_rows(cfg: &ExperimentConfig, models_dir: Option<&Path>) -> Result<Vec<RuntimeRow>, CliError> {
    let a = &cfg.analyze;
    let base = cfg.system().map_err(config)?;
    let models_dir = models_dir.map(Path::to_path_buf).unwrap_or_else(|| cfg.models_dir());
    let trained_dir = models_dir.join(cell_name(cfg.power.lambda, cfg.channel.n_taps));
    let mut rows = Vec::new();
    for &n in &a.n_values {
        let n = n as usize;
        let (models, trained) = if n == base.n_subcarriers() && trained_dir.join("ce.ckpt").exists() {
            (load_cell(&trained_dir, n)?, true)
        } else {
            // Untrained weights cost exactly as much to evaluate.
            let seed = derive_seed(cfg.seed, "bench-init", n as u64);
            let mut ce = CeNet::new(n, cfg.train.l2, &mut stream(seed, 0)).map_err(runtime)?;
            let mut fus = FusNet::new(n, cfg.train.l2, &mut stream(seed, 1)).map_err(runtime)?;
            ce.mark_trained();
            fus.mark_trained();
            (CellModels { ce, fus }, false)
        };
        for &g in &a.bench_subsurfaces {
            let mut sys = base.clone();
            sys.channel.n_subcarriers = n;
            sys.channel.n_subsurfaces = g;
            let seed = derive_seed(cfg.seed, "bench", (n * 1000 + g) as u64);
            let cov = calibrate_covariance(&sys, CALIBRATION_DRAWS, seed).map_err(runtime)?;
            let frames = bench_frames(&sys, a.bench_frames, a.bench_snr_db, seed).map_err(runtime)?;
            let report = runtime_bench(&sys, &models, &cov, &frames, a.bench_repetitions).map_err(config)?;
            eprintln!(
                "[analyze] N={n} G={g}: proposed {:.3e}s, mmse chain {:.3e}s per frame",
                report.t_proposed, report.t_mmse_chain
            );
            rows.push(RuntimeRow { n, g, trained, report });
        }
    }
    Ok(rows)
}
