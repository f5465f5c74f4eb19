//! Classical channel estimators and equalizers.
//!
//! These serve both as baselines (LS-CE, MMSE-CE, MMSE-SD) and as the
//! feature extractors feeding the two networks (LS for CE-Net, ZF plus pilot
//! cancellation for FUS-Net).

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{check_len, Error, Result};
use crate::waveform::PowerSplit;

/// Below this magnitude a channel estimate is treated as a deep fade by the
/// ZF equalizer.
pub const ZF_EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct LsEstimate {
    pub h_ls: Vec<Complex64>,
}

/// Per-subcarrier LS estimate `y[n] / (√(λP) x_p[n])`.
pub fn ls_estimate(y: &[Complex64], pilot: &[Complex64], split: PowerSplit) -> Result<LsEstimate> {
    let amp = split.pilot_amplitude();
    if amp == 0.0 {
        return Err(Error::Rejected("LS estimation needs nonzero pilot power".into()));
    }
    let mut est = ls_estimate_unnormalized(y, pilot)?;
    for h in &mut est.h_ls {
        *h /= amp;
    }
    Ok(est)
}

/// `y[n] / x_p[n]` without removing the pilot amplitude.
pub fn ls_estimate_unnormalized(y: &[Complex64], pilot: &[Complex64]) -> Result<LsEstimate> {
    check_len("ls_estimate: pilot", y.len(), pilot.len())?;
    if let Some(k) = pilot.iter().position(|p| p.norm_sqr() == 0.0) {
        return Err(Error::ZeroPilot(k));
    }
    Ok(LsEstimate {
        h_ls: y.iter().zip(pilot).map(|(y, p)| y / p).collect(),
    })
}

/// Second-moment matrix `E[h h^H]` of the composite channel.
#[derive(Debug, Clone)]
pub struct ChannelCovariance {
    matrix: DMatrix<Complex64>,
}

impl ChannelCovariance {
    pub fn from_matrix(matrix: DMatrix<Complex64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::DimensionMismatch {
                context: "channel covariance",
                expected: matrix.nrows(),
                actual: matrix.ncols(),
            });
        }
        Ok(Self { matrix })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            matrix: DMatrix::identity(n, n),
        }
    }

    /// Sample second-moment matrix over a set of channel draws.
    pub fn from_samples<'a, I>(n: usize, samples: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [Complex64]>,
    {
        let mut acc = DMatrix::<Complex64>::zeros(n, n);
        let mut count = 0usize;
        for h in samples {
            check_len("channel covariance sample", n, h.len())?;
            for i in 0..n {
                for j in 0..n {
                    acc[(i, j)] += h[i] * h[j].conj();
                }
            }
            count += 1;
        }
        if count == 0 {
            return Err(Error::Rejected("covariance needs at least one sample".into()));
        }
        acc /= Complex64::new(count as f64, 0.0);
        Ok(Self { matrix: acc })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    /// Average per-subcarrier channel power, `tr(R) / N`.
    pub fn mean_power(&self) -> f64 {
        self.matrix.trace().re / self.dim() as f64
    }
}

/// Ridge term of the LMMSE filter for a normalized LS input: data
/// interference is folded into white noise of power `(1-λ)P·tr(R)/N`.
pub fn lmmse_ridge(cov: &ChannelCovariance, split: PowerSplit, noise_var: f64) -> Result<f64> {
    let pilot_power = split.pilot_power();
    if pilot_power <= 0.0 {
        return Err(Error::Rejected("LMMSE estimation needs nonzero pilot power".into()));
    }
    let effective = noise_var + split.data_power() * cov.mean_power();
    Ok(effective / pilot_power)
}

/// Linear Wiener filter `W = R (R + ρ I)^{-1}`, formed explicitly.
#[derive(Debug, Clone)]
pub struct LmmseFilter {
    weights: DMatrix<Complex64>,
}

impl LmmseFilter {
    pub fn new(cov: &ChannelCovariance, ridge: f64) -> Result<Self> {
        let n = cov.dim();
        let r = cov.matrix();
        let regularized = r + DMatrix::<Complex64>::identity(n, n) * Complex64::new(ridge, 0.0);
        let inverse = regularized
            .try_inverse()
            .ok_or(Error::Singular("LMMSE regularized covariance"))?;
        Ok(Self { weights: r * inverse })
    }

    pub fn apply(&self, h_ls: &[Complex64]) -> Result<Vec<Complex64>> {
        check_len("LMMSE input", self.weights.ncols(), h_ls.len())?;
        let v = DVector::from_column_slice(h_ls);
        Ok((&self.weights * v).iter().copied().collect())
    }
}

/// LMMSE channel estimate from one received symbol. Builds the Wiener
/// matrix on every call, including the `N×N` inversion.
pub fn lmmse_estimate(
    y: &[Complex64],
    pilot: &[Complex64],
    split: PowerSplit,
    cov: &ChannelCovariance,
    noise_var: f64,
) -> Result<Vec<Complex64>> {
    check_len("lmmse_estimate: covariance", cov.dim(), y.len())?;
    let ls = ls_estimate(y, pilot, split)?;
    let ridge = lmmse_ridge(cov, split, noise_var)?;
    LmmseFilter::new(cov, ridge)?.apply(&ls.h_ls)
}

/// ZF output plus the subcarriers that were erased as deep fades.
#[derive(Debug, Clone, PartialEq)]
pub struct ZfOutput {
    pub symbols: Vec<Complex64>,
    pub erasures: Vec<usize>,
}

/// Diagonal zero-forcing: `ŝ[n] = y[n] / ĥ[n]`. Subcarriers with
/// `|ĥ[n]| <= ZF_EPSILON` are zeroed and recorded.
pub fn zf_equalize(y: &[Complex64], h_est: &[Complex64]) -> Result<ZfOutput> {
    check_len("zf_equalize: channel estimate", y.len(), h_est.len())?;
    let mut erasures = Vec::new();
    let symbols = y
        .iter()
        .zip(h_est)
        .enumerate()
        .map(|(k, (y, h))| {
            if h.norm() <= ZF_EPSILON {
                erasures.push(k);
                Complex64::new(0.0, 0.0)
            } else {
                y / h
            }
        })
        .collect();
    Ok(ZfOutput { symbols, erasures })
}

/// Removes the known pilot: `ŝ_d = ŝ_ZF - √(λP) x_p`.
pub fn cancel_pilot(s_zf: &[Complex64], pilot: &[Complex64], split: PowerSplit) -> Result<Vec<Complex64>> {
    check_len("cancel_pilot: pilot", s_zf.len(), pilot.len())?;
    let amp = split.pilot_amplitude();
    Ok(s_zf.iter().zip(pilot).map(|(s, p)| s - p * amp).collect())
}

#[derive(Debug, Clone)]
pub struct EqualizedFrame {
    pub s_zf: Vec<Complex64>,
    pub s_coarse: Vec<Complex64>,
    pub erasures: Vec<usize>,
}

/// ZF equalization followed by pilot cancellation.
pub fn equalize_and_cancel(
    y: &[Complex64],
    h_est: &[Complex64],
    pilot: &[Complex64],
    split: PowerSplit,
) -> Result<EqualizedFrame> {
    let zf = zf_equalize(y, h_est)?;
    let s_coarse = cancel_pilot(&zf.symbols, pilot, split)?;
    Ok(EqualizedFrame {
        s_zf: zf.symbols,
        s_coarse,
        erasures: zf.erasures,
    })
}

/// Per-subcarrier Wiener equalizer `conj(h) y / (|h|² + σ²/P)`, before pilot
/// cancellation.
pub fn mmse_equalize(y: &[Complex64], h_est: &[Complex64], split: PowerSplit, noise_var: f64) -> Result<Vec<Complex64>> {
    check_len("mmse_equalize: channel estimate", y.len(), h_est.len())?;
    let reg = noise_var / split.total_power;
    Ok(y.iter()
        .zip(h_est)
        .map(|(y, h)| h.conj() * y / (h.norm_sqr() + reg))
        .collect())
}

/// MMSE symbol detection: Wiener equalization then pilot cancellation.
pub fn mmse_detect(
    y: &[Complex64],
    h_est: &[Complex64],
    pilot: &[Complex64],
    split: PowerSplit,
    noise_var: f64,
) -> Result<Vec<Complex64>> {
    let eq = mmse_equalize(y, h_est, split, noise_var)?;
    cancel_pilot(&eq, pilot, split)
}
