use std::fmt::Write as _;

use num_complex::Complex64;
use rayon::prelude::*;

use super::dataset::draw_sample;
use super::metrics::{bit_errors, nmse};
use super::test_phase::run_test_phase;
use super::train::CellModels;
use super::{thread_pool, SystemConfig};
use crate::channel::draw_realization;
use crate::error::{check_len, Error, Result};
use crate::estimators::{equalize_and_cancel, ls_estimate, lmmse_ridge, mmse_detect, ChannelCovariance, LmmseFilter};
use crate::rng::{derive_seed, stream};
use crate::waveform::{qpsk_demodulate, snr_to_noise_var};

/// Channel draws used to estimate the LMMSE prior.
pub const CALIBRATION_DRAWS: usize = 10_000;

/// Receivers compared in a sweep. Estimator-only methods detect with ZF and
/// pilot cancellation on their own estimate; receiver chains report the NMSE
/// of the estimate they run on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    LsCe,
    MmseCe,
    CeNet,
    MmseChain,
    CeNetZf,
    Proposed,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::LsCe,
        Method::MmseCe,
        Method::CeNet,
        Method::MmseChain,
        Method::CeNetZf,
        Method::Proposed,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::LsCe => "LS-CE",
            Self::MmseCe => "MMSE-CE",
            Self::CeNet => "CE-Net",
            Self::MmseChain => "MMSE-CE+MMSE-SD",
            Self::CeNetZf => "CE-Net+ZF",
            Self::Proposed => "proposed",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub snr_db: f64,
    pub lambda: f64,
    pub n_taps: usize,
    pub method: Method,
    pub nmse: f64,
    pub ber: f64,
    pub n_frames: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    pub const HEADER: &'static str = "snr_db,lambda,L,method,nmse,ber,n_frames";

    pub fn to_csv(&self) -> String {
        let mut s = format!("{}\n", Self::HEADER);
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{:.6e},{:.6e},{}",
                r.snr_db,
                r.lambda,
                r.n_taps,
                r.method.name(),
                r.nmse,
                r.ber,
                r.n_frames
            );
        }
        s
    }

    pub fn find(&self, method: Method, snr_db: f64, lambda: f64, n_taps: usize) -> Option<&SweepRow> {
        self.rows.iter().find(|r| {
            r.method == method && r.snr_db == snr_db && r.lambda == lambda && r.n_taps == n_taps
        })
    }
}

/// Sample second moment of the composite channel for this system.
pub fn calibrate_covariance(sys: &SystemConfig, draws: usize, seed: u64) -> Result<ChannelCovariance> {
    let mut rng = stream(seed, 0);
    let hs = (0..draws)
        .map(|_| draw_realization(&sys.channel, sys.phase_mode, &mut rng).map(|c| c.h_composite))
        .collect::<Result<Vec<_>>>()?;
    ChannelCovariance::from_samples(sys.n_subcarriers(), hs.iter().map(Vec::as_slice))
}

#[derive(Debug, Clone, Copy, Default)]
struct Tally {
    nmse: f64,
    bit_errors: usize,
}

/// Per-frame outcome for every requested method.
fn run_frame(
    sys: &SystemConfig,
    models: Option<&CellModels>,
    methods: &[Method],
    pilot: &[Complex64],
    filter: &LmmseFilter,
    snr_db: f64,
    rng_stream: (u64, u64),
) -> Result<Vec<Tally>> {
    let mut rng = stream(rng_stream.0, rng_stream.1);
    let s = draw_sample(sys, pilot, snr_db, &mut rng)?;
    let y = &s.frame.received;
    let h = &s.channel.h_composite;
    let bits = &s.frame.data_bits;
    let split = sys.split;

    let ls = ls_estimate(y, pilot, split)?.h_ls;
    let need_mmse = methods.iter().any(|m| matches!(m, Method::MmseCe | Method::MmseChain));
    let h_mmse = if need_mmse { Some(filter.apply(&ls)?) } else { None };
    let need_nets = methods.iter().any(|m| matches!(m, Method::CeNet | Method::CeNetZf | Method::Proposed));
    let proposed = if need_nets {
        let m = models.ok_or_else(|| Error::Rejected("network methods need trained models".into()))?;
        Some(run_test_phase(sys, &m.ce, &m.fus, pilot, y)?)
    } else {
        None
    };

    let zf_bits = |h_est: &[Complex64]| -> Result<usize> {
        let eq = equalize_and_cancel(y, h_est, pilot, split)?;
        bit_errors(&qpsk_demodulate(&eq.s_coarse), bits)
    };
    methods
        .iter()
        .map(|m| {
            let (h_est, errs) = match m {
                Method::LsCe => (&ls, zf_bits(&ls)?),
                Method::MmseCe => {
                    let hm = h_mmse.as_ref().expect("computed");
                    (hm, zf_bits(hm)?)
                }
                Method::MmseChain => {
                    let hm = h_mmse.as_ref().expect("computed");
                    let sym = mmse_detect(y, hm, pilot, split, s.frame.noise_var)?;
                    (hm, bit_errors(&qpsk_demodulate(&sym), bits)?)
                }
                Method::CeNet | Method::CeNetZf => {
                    let p = proposed.as_ref().expect("computed");
                    (&p.h_ce, bit_errors(&qpsk_demodulate(&p.s_coarse), bits)?)
                }
                Method::Proposed => {
                    let p = proposed.as_ref().expect("computed");
                    (&p.h_ce, bit_errors(&p.detected_bits, bits)?)
                }
            };
            Ok(Tally { nmse: nmse(h_est, h)?, bit_errors: errs })
        })
        .collect()
}

/// Monte-Carlo evaluation of one `(λ, L)` cell over an SNR grid. Frames are
/// shared across methods; frame `f` at SNR index `i` always uses the same
/// random stream.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_cell(
    sys: &SystemConfig,
    models: Option<&CellModels>,
    cov: &ChannelCovariance,
    methods: &[Method],
    snr_grid: &[f64],
    n_frames: usize,
    seed: u64,
    workers: usize,
) -> Result<Vec<SweepRow>> {
    if n_frames == 0 {
        return Err(Error::InvalidConfig("n_frames must be positive".into()));
    }
    let n = sys.n_subcarriers();
    check_len("evaluate_cell: covariance", n, cov.dim())?;
    if let Some(m) = models {
        check_len("evaluate_cell: CE-Net subcarriers", n, m.ce.n_subcarriers())?;
        check_len("evaluate_cell: FUS-Net subcarriers", n, m.fus.n_subcarriers())?;
    }
    let pilot = sys.pilot()?;
    let pool = thread_pool(workers)?;
    let mut rows = Vec::with_capacity(snr_grid.len() * methods.len());
    for (si, &snr_db) in snr_grid.iter().enumerate() {
        let noise_var = snr_to_noise_var(snr_db, sys.split.total_power);
        let filter = LmmseFilter::new(cov, lmmse_ridge(cov, sys.split, noise_var)?)?;
        let frame_seed = derive_seed(seed, "sweep-frames", si as u64);
        let per_frame = pool.install(|| {
            (0..n_frames as u64)
                .into_par_iter()
                .map(|f| run_frame(sys, models, methods, &pilot, &filter, snr_db, (frame_seed, f)))
                .collect::<Result<Vec<_>>>()
        })?;
        for (mi, &method) in methods.iter().enumerate() {
            // Sequential sums keep the result independent of worker count.
            let nmse_sum: f64 = per_frame.iter().map(|t| t[mi].nmse).sum();
            let errs: usize = per_frame.iter().map(|t| t[mi].bit_errors).sum();
            rows.push(SweepRow {
                snr_db,
                lambda: sys.split.lambda,
                n_taps: sys.channel.n_taps,
                method,
                nmse: nmse_sum / n_frames as f64,
                ber: errs as f64 / (2 * n * n_frames) as f64,
                n_frames,
            });
        }
    }
    Ok(rows)
}

/// One grid cell with the networks trained for it.
#[derive(Debug, Clone, Copy)]
pub struct SweepCell<'a> {
    pub lambda: f64,
    pub n_taps: usize,
    pub models: Option<&'a CellModels>,
}

/// Evaluates every cell; rows are ordered by cell, then SNR, then method.
pub fn evaluate_sweep(
    base: &SystemConfig,
    cells: &[SweepCell<'_>],
    methods: &[Method],
    snr_grid: &[f64],
    n_frames: usize,
    seed: u64,
    workers: usize,
) -> Result<SweepReport> {
    let mut report = SweepReport::default();
    for cell in cells {
        let sys = base.with_cell(cell.lambda, cell.n_taps)?;
        let cov = calibrate_covariance(&sys, CALIBRATION_DRAWS, derive_seed(seed, "calibration", cell.n_taps as u64))?;
        let rows = evaluate_cell(&sys, cell.models, &cov, methods, snr_grid, n_frames, seed, workers)?;
        report.rows.extend(rows);
    }
    Ok(report)
}
