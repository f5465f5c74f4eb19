//! The end-to-end workflow: dataset generation, sequential CE-Net then
//! FUS-Net training, the online test phase and Monte-Carlo evaluation.

mod dataset;
mod metrics;
mod sweep;
mod test_phase;
mod train;

pub use dataset::{draw_sample, gen_ce_dataset, gen_fus_dataset, ChannelSource, Dataset, Sample, SampleMeta};
pub use metrics::{ber, bit_errors, nmse};
pub use sweep::{
    calibrate_covariance, evaluate_cell, evaluate_sweep, Method, SweepCell, SweepReport, SweepRow, CALIBRATION_DRAWS,
};
pub use test_phase::{run_test_phase, Stage, TestPhaseOutput};
pub use train::{train, train_cell, CellModels, CellTraining, EpochLoss, LossHistory, TrainConfig};

use num_complex::Complex64;

use crate::channel::{ChannelConfig, PhaseMode};
use crate::error::{Error, Result};
use crate::estimators::{ls_estimate, ls_estimate_unnormalized, LsEstimate};
use crate::waveform::{zadoff_chu, PowerSplit};

/// Link-level parameters shared by dataset generation and evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    pub channel: ChannelConfig,
    pub split: PowerSplit,
    pub zc_root: u64,
    pub phase_mode: PhaseMode,
    /// Divide the LS estimate by the pilot amplitude `√(λP)`.
    pub ls_normalized: bool,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            channel: ChannelConfig::default(),
            split: PowerSplit { lambda: 0.15, total_power: 1.0 },
            zc_root: 1,
            phase_mode: PhaseMode::UniformRandom,
            ls_normalized: true,
        }
    }
}

impl SystemConfig {
    pub fn n_subcarriers(&self) -> usize {
        self.channel.n_subcarriers
    }

    pub fn validate(&self) -> Result<()> {
        self.channel.validate()?;
        PowerSplit::new(self.split.lambda, self.split.total_power)?;
        self.pilot().map(|_| ())
    }

    pub fn pilot(&self) -> Result<Vec<Complex64>> {
        zadoff_chu(self.channel.n_subcarriers, self.zc_root)
    }

    /// Same system with a different power split and tap count.
    pub fn with_cell(&self, lambda: f64, n_taps: usize) -> Result<Self> {
        let mut out = self.clone();
        out.split = PowerSplit::new(lambda, self.split.total_power)?;
        out.channel.n_taps = n_taps;
        out.channel.cp_length = out.channel.cp_length.max(n_taps + 1);
        out.validate()?;
        Ok(out)
    }

    /// The LS feature under the configured normalization convention.
    pub fn ls_feature(&self, y: &[Complex64], pilot: &[Complex64]) -> Result<LsEstimate> {
        if self.ls_normalized {
            ls_estimate(y, pilot, self.split)
        } else {
            ls_estimate_unnormalized(y, pilot)
        }
    }
}

/// Default SNR grid, 0 to 18 dB in 3 dB steps.
pub fn default_snr_grid() -> Vec<f64> {
    (0..=6).map(|i| 3.0 * i as f64).collect()
}

pub(crate) fn thread_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Rejected(format!("cannot start worker pool: {e}")))
}
