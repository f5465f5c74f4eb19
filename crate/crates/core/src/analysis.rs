//! Complexity table, energy and bandwidth accounting, and the running-time
//! harness comparing the two receiver chains.

use std::fmt::Write as _;
use std::hint::black_box;
use std::time::Instant;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::estimators::{cancel_pilot, lmmse_estimate, mmse_detect, zf_equalize, ChannelCovariance};
use crate::models::{complex_to_real, real_to_complex, splice_fus_input};
use crate::pipeline::{draw_sample, CellModels, SystemConfig};
use crate::rng::stream;
use crate::waveform::{qpsk_demodulate, snr_to_noise_var};

/// Real multiply-accumulate count quoted for CE-Net plus FUS-Net.
pub fn proposed_complexity(n: u64) -> u64 {
    84 * n * n
}

/// Quoted cost of LMMSE estimation plus MMSE detection.
pub fn mmse_chain_complexity(n: u64) -> u64 {
    6 * n * n * n + 4 * n * n + 2 * n
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ComplexityRow {
    pub n: u64,
    pub proposed: u64,
    pub mmse_chain: u64,
}

pub fn complexity_table(n_values: &[u64]) -> Result<Vec<ComplexityRow>> {
    n_values
        .iter()
        .map(|&n| {
            if n == 0 {
                return Err(Error::InvalidConfig("complexity table needs n > 0".into()));
            }
            Ok(ComplexityRow { n, proposed: proposed_complexity(n), mmse_chain: mmse_chain_complexity(n) })
        })
        .collect()
}

pub fn complexity_csv(rows: &[ComplexityRow]) -> String {
    let mut s = String::from("n,proposed,mmse_chain\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{}", r.n, r.proposed, r.mmse_chain);
    }
    s
}

/// Time and power budget of one transmission block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResourceModel {
    pub n_data: u64,
    pub n_pilot: u64,
    /// Symbol duration `T₀`.
    pub symbol_duration: f64,
    pub power: f64,
    pub lambda: f64,
}

impl ResourceModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.symbol_duration > 0.0 && self.power > 0.0) {
            return Err(Error::InvalidConfig("symbol duration and power must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::InvalidConfig(format!("lambda must lie in [0, 1], got {}", self.lambda)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyReport {
    pub e_nonsup: f64,
    pub e_prop: f64,
    pub e_saved: f64,
    pub bw_nonsup: f64,
    pub bw_prop: f64,
    pub bw_saved: f64,
}

/// Orthogonal pilots occupy their own symbols at full power; superimposed
/// pilots share the data symbols and split the power.
pub fn energy_accounting(m: &ResourceModel) -> Result<EnergyReport> {
    m.validate()?;
    let (nd, np) = (m.n_data as f64, m.n_pilot as f64);
    let t0 = m.symbol_duration;
    let e_nonsup = (nd + np) * t0 * m.power;
    let e_prop = nd * t0 * (1.0 - m.lambda) * m.power + np * t0 * m.lambda * m.power;
    Ok(EnergyReport {
        e_nonsup,
        e_prop,
        e_saved: e_nonsup - e_prop,
        bw_nonsup: (nd + np) * t0,
        bw_prop: nd * t0,
        bw_saved: np * t0,
    })
}

/// Closed form of the saved energy, `N_d T₀ λP + N_p T₀ (1−λ)P`.
pub fn energy_saved_closed_form(m: &ResourceModel) -> f64 {
    let t0 = m.symbol_duration;
    m.n_data as f64 * t0 * m.lambda * m.power + m.n_pilot as f64 * t0 * (1.0 - m.lambda) * m.power
}

pub fn energy_csv(models: &[ResourceModel]) -> Result<String> {
    let mut s = String::from("n_data,n_pilot,t0,power,lambda,e_nonsup,e_prop,e_saved,bw_nonsup,bw_prop,bw_saved\n");
    for m in models {
        let r = energy_accounting(m)?;
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{}",
            m.n_data, m.n_pilot, m.symbol_duration, m.power, m.lambda,
            r.e_nonsup, r.e_prop, r.e_saved, r.bw_nonsup, r.bw_prop, r.bw_saved
        );
    }
    Ok(s)
}

/// Fewest frames a timing run may use.
pub const MIN_BENCH_FRAMES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RuntimeReport {
    pub n_frames: usize,
    pub repetitions: usize,
    /// Median over repetitions of the per-frame time, seconds.
    pub t_proposed: f64,
    pub t_mmse_chain: f64,
    /// `t_mmse_chain / t_proposed`.
    pub ratio: f64,
}

/// Input frames shared by both timed chains.
pub struct BenchFrames {
    pub pilot: Vec<Complex64>,
    pub received: Vec<Vec<Complex64>>,
    pub noise_var: f64,
}

pub fn bench_frames(sys: &SystemConfig, n_frames: usize, snr_db: f64, seed: u64) -> Result<BenchFrames> {
    let pilot = sys.pilot()?;
    let mut rng = stream(seed, 0);
    let received = (0..n_frames)
        .map(|_| draw_sample(sys, &pilot, snr_db, &mut rng).map(|s| s.frame.received))
        .collect::<Result<Vec<_>>>()?;
    Ok(BenchFrames { pilot, received, noise_var: snr_to_noise_var(snr_db, sys.split.total_power) })
}

/// CE-Net, ZF, cancellation, FUS-Net and slicing for one frame.
pub fn proposed_chain(sys: &SystemConfig, models: &CellModels, pilot: &[Complex64], y: &[Complex64]) -> Result<Vec<u8>> {
    let ls = sys.ls_feature(y, pilot)?;
    let h = real_to_complex(&models.ce.net().infer_one(&complex_to_real(&ls.h_ls))?)?;
    let zf = zf_equalize(y, &h)?;
    let s = cancel_pilot(&zf.symbols, pilot, sys.split)?;
    let out = models.fus.infer(&splice_fus_input(&s, y)?)?;
    Ok(qpsk_demodulate(&out))
}

/// LMMSE estimation (including the `N×N` inversion) and MMSE detection for
/// one frame.
pub fn mmse_chain(
    sys: &SystemConfig,
    cov: &ChannelCovariance,
    pilot: &[Complex64],
    y: &[Complex64],
    noise_var: f64,
) -> Result<Vec<u8>> {
    let h = lmmse_estimate(y, pilot, sys.split, cov, noise_var)?;
    Ok(qpsk_demodulate(&mmse_detect(y, &h, pilot, sys.split, noise_var)?))
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Times both chains on the calling thread over the same frames. One
/// untimed warm-up pass precedes the measured repetitions.
pub fn runtime_bench(
    sys: &SystemConfig,
    models: &CellModels,
    cov: &ChannelCovariance,
    frames: &BenchFrames,
    repetitions: usize,
) -> Result<RuntimeReport> {
    let n_frames = frames.received.len();
    if n_frames < MIN_BENCH_FRAMES {
        return Err(Error::Rejected(format!(
            "timing needs at least {MIN_BENCH_FRAMES} frames, got {n_frames}"
        )));
    }
    if repetitions == 0 {
        return Err(Error::InvalidConfig("repetitions must be positive".into()));
    }
    let pilot = &frames.pilot;
    let run_prop = || -> Result<()> {
        for y in &frames.received {
            black_box(proposed_chain(sys, models, pilot, black_box(y))?);
        }
        Ok(())
    };
    let run_mmse = || -> Result<()> {
        for y in &frames.received {
            black_box(mmse_chain(sys, cov, pilot, black_box(y), frames.noise_var)?);
        }
        Ok(())
    };
    run_prop()?;
    run_mmse()?;
    let mut tp = Vec::with_capacity(repetitions);
    let mut tm = Vec::with_capacity(repetitions);
    for _ in 0..repetitions {
        let t = Instant::now();
        run_prop()?;
        tp.push(t.elapsed().as_secs_f64() / n_frames as f64);
        let t = Instant::now();
        run_mmse()?;
        tm.push(t.elapsed().as_secs_f64() / n_frames as f64);
    }
    let (t_proposed, t_mmse_chain) = (median(tp), median(tm));
    Ok(RuntimeReport { n_frames, repetitions, t_proposed, t_mmse_chain, ratio: t_mmse_chain / t_proposed })
}

/// One line of `runtime.csv`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RuntimeRow {
    pub n: usize,
    /// RIS sub-surface count the frames were drawn with.
    pub g: usize,
    /// Whether the networks were trained or only initialized; the arithmetic
    /// is identical either way.
    pub trained: bool,
    pub report: RuntimeReport,
}

pub fn runtime_csv(rows: &[RuntimeRow]) -> String {
    let mut s = String::from("n,g,weights,n_frames,repetitions,t_proposed_s,t_mmse_chain_s,ratio\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{:.6e},{:.6e},{:.4}",
            r.n,
            r.g,
            if r.trained { "trained" } else { "initialized" },
            r.report.n_frames,
            r.report.repetitions,
            r.report.t_proposed,
            r.report.t_mmse_chain,
            r.report.ratio
        );
    }
    s
}
