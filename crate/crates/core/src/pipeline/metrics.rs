use num_complex::Complex64;

use crate::error::{check_len, Error, Result};

/// `‖ĥ − h‖² / ‖h‖²`
pub fn nmse(h_hat: &[Complex64], h: &[Complex64]) -> Result<f64> {
    check_len("nmse", h.len(), h_hat.len())?;
    let energy: f64 = h.iter().map(|x| x.norm_sqr()).sum();
    if energy == 0.0 {
        return Err(Error::ZeroChannel);
    }
    let err: f64 = h_hat.iter().zip(h).map(|(a, b)| (a - b).norm_sqr()).sum();
    Ok(err / energy)
}

pub fn bit_errors(bits_hat: &[u8], bits: &[u8]) -> Result<usize> {
    check_len("ber", bits.len(), bits_hat.len())?;
    Ok(bits_hat.iter().zip(bits).filter(|(a, b)| a != b).count())
}

/// Fraction of differing bits.
pub fn ber(bits_hat: &[u8], bits: &[u8]) -> Result<f64> {
    let e = bit_errors(bits_hat, bits)?;
    Ok(if bits.is_empty() { 0.0 } else { e as f64 / bits.len() as f64 })
}
