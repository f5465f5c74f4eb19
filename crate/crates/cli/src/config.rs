//! Experiment configuration, stored as TOML. Unknown keys are errors.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use rispilot_core::channel::{ChannelConfig, PhaseMode};
use rispilot_core::pipeline::{default_snr_grid, SystemConfig, TrainConfig};
use rispilot_core::waveform::PowerSplit;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    #[default]
    Desk,
    Paper,
}

impl std::str::FromStr for Scale {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "desk" => Ok(Self::Desk),
            "paper" => Ok(Self::Paper),
            other => Err(format!("unknown scale `{other}` (expected desk or paper)")),
        }
    }
}

impl Scale {
    /// Training and validation sample counts.
    pub fn samples(self) -> (usize, usize) {
        match self {
            Self::Desk => (20_000, 4_000),
            Self::Paper => (100_000, 20_000),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhaseModeName {
    AllZeroPhase,
    UniformRandom,
}

impl From<PhaseModeName> for PhaseMode {
    fn from(p: PhaseModeName) -> Self {
        match p {
            PhaseModeName::AllZeroPhase => PhaseMode::AllZeroPhase,
            PhaseModeName::UniformRandom => PhaseMode::UniformRandom,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridMode {
    /// Vary λ at the base L, then L at the base λ.
    #[default]
    Axes,
    /// Every (λ, L) combination.
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelSection {
    pub n_subcarriers: usize,
    pub n_subsurfaces: usize,
    pub n_taps: usize,
    pub cp_length: usize,
    pub rician_k_db: f64,
    pub pdp_decay: f64,
    pub phase_mode: PhaseModeName,
}

impl Default for ChannelSection {
    fn default() -> Self {
        let c = ChannelConfig::default();
        Self {
            n_subcarriers: c.n_subcarriers,
            n_subsurfaces: c.n_subsurfaces,
            n_taps: c.n_taps,
            cp_length: c.cp_length,
            rician_k_db: c.rician_k_db,
            pdp_decay: c.pdp_decay,
            phase_mode: PhaseModeName::UniformRandom,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PowerSection {
    /// Share of the power given to the pilot.
    pub lambda: f64,
    pub total_power: f64,
    pub zc_root: u64,
    pub ls_normalized: bool,
}

impl Default for PowerSection {
    fn default() -> Self {
        Self { lambda: 0.15, total_power: 1.0, zc_root: 1, ls_normalized: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    /// Defaults to the scale's sample count when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_train: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_val: Option<usize>,
    pub batch: usize,
    pub epochs_ce: usize,
    pub epochs_fus: usize,
    pub lr_ce: f64,
    pub lr_fus: f64,
    pub l2: f64,
    pub snr_db: Vec<f64>,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            n_train: None,
            n_val: None,
            batch: t.batch,
            epochs_ce: t.epochs_ce,
            epochs_fus: t.epochs_fus,
            lr_ce: t.lr_ce,
            lr_fus: t.lr_fus,
            l2: t.l2,
            snr_db: t.snr_grid_db,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub snr_db: Vec<f64>,
    pub lambda: Vec<f64>,
    pub taps: Vec<usize>,
    pub grid: GridMode,
    pub n_frames: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            snr_db: default_snr_grid(),
            lambda: vec![0.1, 0.15, 0.2],
            taps: vec![3, 5, 7],
            grid: GridMode::Axes,
            n_frames: 2000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyzeSection {
    pub n_values: Vec<u64>,
    /// Energy table example: data and pilot symbol counts.
    pub n_data: u64,
    pub n_pilot: u64,
    pub runtime: bool,
    pub bench_frames: usize,
    pub bench_repetitions: usize,
    pub bench_snr_db: f64,
    pub bench_subsurfaces: Vec<usize>,
}

impl Default for AnalyzeSection {
    fn default() -> Self {
        Self {
            n_values: vec![32, 64],
            n_data: 32,
            n_pilot: 32,
            runtime: true,
            bench_frames: 1000,
            bench_repetitions: 5,
            bench_snr_db: 12.0,
            bench_subsurfaces: vec![12, 24, 48],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scale: Scale,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub workers: usize,
    #[serde(default)]
    pub channel: ChannelSection,
    #[serde(default)]
    pub power: PowerSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub analyze: AnalyzeSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scale: Scale::Desk,
            seed: 0,
            out_dir: PathBuf::from("out"),
            workers: 1,
            channel: ChannelSection::default(),
            power: PowerSection::default(),
            train: TrainSection::default(),
            sweep: SweepSection::default(),
            analyze: AnalyzeSection::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> anyhow::Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config `{}`", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("invalid config `{}`", path.display()))
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.workers == 0 {
            bail!("workers: must be at least 1");
        }
        if self.sweep.snr_db.is_empty() {
            bail!("sweep.snr_db: grid is empty");
        }
        if self.sweep.lambda.is_empty() {
            bail!("sweep.lambda: grid is empty");
        }
        if self.sweep.taps.is_empty() {
            bail!("sweep.taps: grid is empty");
        }
        if self.sweep.n_frames == 0 {
            bail!("sweep.n_frames: must be positive");
        }
        if self.analyze.n_values.is_empty() || self.analyze.n_values.contains(&0) {
            bail!("analyze.n_values: need at least one positive value");
        }
        self.system().context("channel/power")?;
        self.train_config(self.seed).validate().context("train")?;
        for &(lambda, taps) in &self.cells() {
            self.system()?
                .with_cell(lambda, taps)
                .with_context(|| format!("sweep cell lambda={lambda} L={taps}"))?;
        }
        Ok(())
    }

    pub fn system(&self) -> rispilot_core::Result<SystemConfig> {
        let c = &self.channel;
        let sys = SystemConfig {
            channel: ChannelConfig {
                n_subcarriers: c.n_subcarriers,
                n_subsurfaces: c.n_subsurfaces,
                n_taps: c.n_taps,
                cp_length: c.cp_length,
                rician_k_db: c.rician_k_db,
                pdp_decay: c.pdp_decay,
                seed: self.seed,
            },
            split: PowerSplit::new(self.power.lambda, self.power.total_power)?,
            zc_root: self.power.zc_root,
            phase_mode: c.phase_mode.into(),
            ls_normalized: self.power.ls_normalized,
        };
        sys.validate()?;
        Ok(sys)
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        let (n_train, n_val) = self.scale.samples();
        let t = &self.train;
        TrainConfig {
            n_train: t.n_train.unwrap_or(n_train),
            n_val: t.n_val.unwrap_or(n_val),
            batch: t.batch,
            epochs_ce: t.epochs_ce,
            epochs_fus: t.epochs_fus,
            lr_ce: t.lr_ce,
            lr_fus: t.lr_fus,
            l2: t.l2,
            snr_grid_db: t.snr_db.clone(),
            seed,
            workers: self.workers,
        }
    }

    /// The (λ, L) cells that get their own networks. The base cell comes
    /// first.
    pub fn cells(&self) -> Vec<(f64, usize)> {
        let base = (self.power.lambda, self.channel.n_taps);
        let mut out = vec![base];
        let mut push = |c: (f64, usize)| {
            if !out.contains(&c) {
                out.push(c);
            }
        };
        match self.sweep.grid {
            GridMode::Axes => {
                for &l in &self.sweep.lambda {
                    push((l, base.1));
                }
                for &t in &self.sweep.taps {
                    push((base.0, t));
                }
            }
            GridMode::Full => {
                for &l in &self.sweep.lambda {
                    for &t in &self.sweep.taps {
                        push((l, t));
                    }
                }
            }
        }
        out
    }

    pub fn models_dir(&self) -> PathBuf {
        self.out_dir.join("models")
    }
}

/// Directory name of one cell's artifacts.
pub fn cell_name(lambda: f64, taps: usize) -> String {
    format!("lambda{lambda}_L{taps}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_roundtrips() {
        let cfg = ExperimentConfig::default();
        let text = cfg.to_toml();
        let back = ExperimentConfig::from_toml(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.to_toml(), text);
    }

    #[test]
    fn explicit_sample_counts_roundtrip() {
        let mut cfg = ExperimentConfig::default();
        cfg.train.n_train = Some(500);
        cfg.scale = Scale::Paper;
        let back = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.train_config(1).n_train, 500);
        assert_eq!(back.train_config(1).n_val, 20_000);
    }

    #[test]
    fn unknown_keys_fail() {
        let mut text = ExperimentConfig::default().to_toml();
        text = text.replace("[channel]\n", "[channel]\nbogus = 1\n");
        let err = format!("{:#}", ExperimentConfig::from_toml(&text).unwrap_err());
        assert!(err.contains("bogus"), "{err}");
    }

    #[test]
    fn sections_are_optional() {
        let cfg = ExperimentConfig::from_toml("scale = \"desk\"\nseed = 3\nout_dir = \"o\"\nworkers = 2\n").unwrap();
        assert_eq!(cfg.channel, ChannelSection::default());
        assert_eq!(cfg.seed, 3);
    }

    #[test]
    fn keys_within_sections_are_optional() {
        let cfg = ExperimentConfig::from_toml("seed = 4\n[power]\nlambda = 0.2\n[sweep]\ntaps = [3]\n").unwrap();
        assert_eq!(cfg.power.lambda, 0.2);
        assert_eq!(cfg.power.zc_root, PowerSection::default().zc_root);
        assert_eq!(cfg.sweep.n_frames, 2000);
        assert_eq!(cfg.out_dir, PathBuf::from("out"));
    }

    #[test]
    fn field_level_diagnostics() {
        let mut cfg = ExperimentConfig::default();
        cfg.sweep.lambda.clear();
        assert!(format!("{:#}", cfg.validate().unwrap_err()).contains("sweep.lambda"));
        let mut cfg = ExperimentConfig::default();
        cfg.train.batch = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::default();
        cfg.channel.n_taps = 9;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn axes_cells() {
        let cfg = ExperimentConfig::default();
        assert_eq!(cfg.cells(), vec![(0.15, 5), (0.1, 5), (0.2, 5), (0.15, 3), (0.15, 7)]);
        let mut full = cfg.clone();
        full.sweep.grid = GridMode::Full;
        assert_eq!(full.cells().len(), 9);
        assert_eq!(full.cells()[0], (0.15, 5));
    }

    #[test]
    fn scale_parsing() {
        assert_eq!("paper".parse::<Scale>().unwrap(), Scale::Paper);
        assert!("huge".parse::<Scale>().is_err());
    }
}
