use ndarray::{Array2, Axis};
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use super::{thread_pool, SystemConfig};
use crate::channel::{draw_realization, ChannelRealization};
use crate::error::{check_len, Error, Result};
use crate::estimators::equalize_and_cancel;
use crate::models::{complex_to_real, real_to_complex, splice_fus_input, CeNet};
use crate::rng::stream;
use crate::waveform::{random_bits, snr_to_noise_var, transmit, Frame};

/// One simulated transmission with the channel that produced it.
#[derive(Debug, Clone)]
pub struct Sample {
    pub channel: ChannelRealization,
    pub frame: Frame,
    pub snr_db: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleMeta {
    pub snr_db: f64,
    pub lambda: f64,
    /// Index of the random stream the sample was drawn from.
    pub stream: u64,
}

/// Paired real-valued network inputs and labels, one sample per row.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub inputs: Array2<f64>,
    pub labels: Array2<f64>,
    pub meta: Vec<SampleMeta>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn from_rows(rows: Vec<(Vec<f64>, Vec<f64>, SampleMeta)>, in_dim: usize, out_dim: usize) -> Self {
        let s = rows.len();
        let mut inputs = Vec::with_capacity(s * in_dim);
        let mut labels = Vec::with_capacity(s * out_dim);
        let mut meta = Vec::with_capacity(s);
        for (i, l, m) in rows {
            inputs.extend(i);
            labels.extend(l);
            meta.push(m);
        }
        Self {
            inputs: Array2::from_shape_vec((s, in_dim), inputs).expect("row widths checked"),
            labels: Array2::from_shape_vec((s, out_dim), labels).expect("row widths checked"),
            meta,
        }
    }
}

/// Draws a channel, random data bits and noise at `snr_db`.
pub fn draw_sample<R: Rng + ?Sized>(
    sys: &SystemConfig,
    pilot: &[Complex64],
    snr_db: f64,
    rng: &mut R,
) -> Result<Sample> {
    let n = sys.n_subcarriers();
    let channel = draw_realization(&sys.channel, sys.phase_mode, rng)?;
    let bits = random_bits(2 * n, rng);
    let noise_var = snr_to_noise_var(snr_db, sys.split.total_power);
    let frame = transmit(pilot, bits, sys.split, &channel.h_composite, noise_var, rng)?;
    Ok(Sample { channel, frame, snr_db })
}

/// Sample `index` of a mixed-SNR set: SNR uniform over `snr_grid`.
fn draw_mixed(sys: &SystemConfig, pilot: &[Complex64], snr_grid: &[f64], seed: u64, index: u64) -> Result<Sample> {
    let mut rng = stream(seed, index);
    let snr = snr_grid[rng.random_range(0..snr_grid.len())];
    draw_sample(sys, pilot, snr, &mut rng)
}

fn check_grid(snr_grid: &[f64]) -> Result<()> {
    if snr_grid.is_empty() {
        return Err(Error::InvalidConfig("SNR grid is empty".into()));
    }
    Ok(())
}

/// CE-Net training pairs: reshaped LS estimate in, reshaped true channel out.
pub fn gen_ce_dataset(
    sys: &SystemConfig,
    snr_grid: &[f64],
    n_samples: usize,
    seed: u64,
    workers: usize,
) -> Result<Dataset> {
    check_grid(snr_grid)?;
    let n = sys.n_subcarriers();
    let pilot = sys.pilot()?;
    let rows = thread_pool(workers)?.install(|| {
        (0..n_samples as u64)
            .into_par_iter()
            .map(|i| {
                let s = draw_mixed(sys, &pilot, snr_grid, seed, i)?;
                let ls = sys.ls_feature(&s.frame.received, &pilot)?;
                let meta = SampleMeta { snr_db: s.snr_db, lambda: sys.split.lambda, stream: i };
                Ok((complex_to_real(&ls.h_ls), complex_to_real(&s.channel.h_composite), meta))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(Dataset::from_rows(rows, 2 * n, 2 * n))
}

/// Where the FUS-Net feature path gets its channel estimate from.
#[derive(Debug, Clone, Copy)]
pub enum ChannelSource<'a> {
    /// The trained CE-Net, as in deployment.
    CeNet(&'a CeNet),
    /// The true composite channel.
    Perfect,
}

/// Rows of CE-Net inference processed together.
const INFER_CHUNK: usize = 1024;

/// FUS-Net training pairs: spliced `[ŝ_d; y]` in, transmitted QPSK symbols
/// out.
pub fn gen_fus_dataset(
    sys: &SystemConfig,
    source: ChannelSource<'_>,
    snr_grid: &[f64],
    n_samples: usize,
    seed: u64,
    workers: usize,
) -> Result<Dataset> {
    check_grid(snr_grid)?;
    let n = sys.n_subcarriers();
    if let ChannelSource::CeNet(ce) = source {
        if !ce.is_trained() {
            return Err(Error::UntrainedCeNet);
        }
        check_len("CE-Net subcarriers", n, ce.n_subcarriers())?;
    }
    let pilot = sys.pilot()?;
    let pool = thread_pool(workers)?;
    let samples = pool.install(|| {
        (0..n_samples as u64)
            .into_par_iter()
            .map(|i| draw_mixed(sys, &pilot, snr_grid, seed, i))
            .collect::<Result<Vec<_>>>()
    })?;

    let estimates: Vec<Vec<Complex64>> = match source {
        ChannelSource::Perfect => samples.iter().map(|s| s.channel.h_composite.clone()).collect(),
        ChannelSource::CeNet(ce) => {
            let mut feats = Vec::with_capacity(n_samples * 2 * n);
            for s in &samples {
                feats.extend(complex_to_real(&sys.ls_feature(&s.frame.received, &pilot)?.h_ls));
            }
            let feats = Array2::from_shape_vec((n_samples, 2 * n), feats).expect("sized");
            let mut out = Vec::with_capacity(n_samples);
            for chunk in feats.axis_chunks_iter(Axis(0), INFER_CHUNK) {
                let pred = ce.infer_batch(chunk)?;
                for row in pred.rows() {
                    out.push(real_to_complex(row.as_slice().expect("contiguous"))?);
                }
            }
            out
        }
    };

    let rows = pool.install(|| {
        samples
            .par_iter()
            .zip(estimates.par_iter())
            .enumerate()
            .map(|(i, (s, h_est))| {
                let eq = equalize_and_cancel(&s.frame.received, h_est, &pilot, sys.split)?;
                let input = splice_fus_input(&eq.s_coarse, &s.frame.received)?;
                let meta = SampleMeta { snr_db: s.snr_db, lambda: sys.split.lambda, stream: i as u64 };
                Ok((input, complex_to_real(&s.frame.data_symbols), meta))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(Dataset::from_rows(rows, 4 * n, 2 * n))
}
