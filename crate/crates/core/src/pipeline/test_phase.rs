use num_complex::Complex64;

use super::SystemConfig;
use crate::error::{check_len, Error, Result};
use crate::estimators::{cancel_pilot, zf_equalize};
use crate::models::{complex_to_real, real_to_complex, splice_fus_input, CeNet, FusNet};
use crate::waveform::qpsk_demodulate;

/// Processing stages of the online detector, in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    LsEstimate,
    ToReal,
    CeNet,
    ToComplex,
    ZfEqualize,
    CancelPilot,
    Splice,
    FusNet,
}

impl Stage {
    pub const ORDER: [Stage; 8] = [
        Stage::LsEstimate,
        Stage::ToReal,
        Stage::CeNet,
        Stage::ToComplex,
        Stage::ZfEqualize,
        Stage::CancelPilot,
        Stage::Splice,
        Stage::FusNet,
    ];
}

#[derive(Debug, Clone)]
pub struct TestPhaseOutput {
    /// CE-Net channel estimate.
    pub h_ce: Vec<Complex64>,
    /// Coarse symbols after ZF and pilot cancellation.
    pub s_coarse: Vec<Complex64>,
    /// FUS-Net symbol estimate.
    pub s_fus: Vec<Complex64>,
    pub detected_bits: Vec<u8>,
    pub trace: Vec<Stage>,
}

/// Runs the deployed receiver on one received OFDM symbol `y`.
pub fn run_test_phase(
    sys: &SystemConfig,
    ce: &CeNet,
    fus: &FusNet,
    pilot: &[Complex64],
    y: &[Complex64],
) -> Result<TestPhaseOutput> {
    if !ce.is_trained() {
        return Err(Error::UntrainedCeNet);
    }
    if !fus.is_trained() {
        return Err(Error::Rejected("FUS-Net has not been trained".into()));
    }
    let n = y.len();
    check_len("test phase: CE-Net subcarriers", n, ce.n_subcarriers())?;
    check_len("test phase: FUS-Net subcarriers", n, fus.n_subcarriers())?;
    check_len("test phase: pilot", n, pilot.len())?;

    let mut trace = Vec::with_capacity(Stage::ORDER.len());
    let ls = sys.ls_feature(y, pilot)?;
    trace.push(Stage::LsEstimate);
    let feat = complex_to_real(&ls.h_ls);
    trace.push(Stage::ToReal);
    let out = ce.net().infer_one(&feat)?;
    trace.push(Stage::CeNet);
    let h_ce = real_to_complex(&out)?;
    trace.push(Stage::ToComplex);
    let zf = zf_equalize(y, &h_ce)?;
    trace.push(Stage::ZfEqualize);
    let s_coarse = cancel_pilot(&zf.symbols, pilot, sys.split)?;
    trace.push(Stage::CancelPilot);
    let s_in = splice_fus_input(&s_coarse, y)?;
    trace.push(Stage::Splice);
    let s_fus = fus.infer(&s_in)?;
    trace.push(Stage::FusNet);
    let detected_bits = qpsk_demodulate(&s_fus);
    Ok(TestPhaseOutput { h_ce, s_coarse, s_fus, detected_bits, trace })
}
