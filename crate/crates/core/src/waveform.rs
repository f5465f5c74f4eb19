//! Pilot and data generation, superposition and the frequency-domain
//! received signal.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;
use rand::Rng;

use crate::channel::complex_gaussian;
use crate::error::{check_len, Error, Result};

/// Split of the total transmit power between pilot (`λP`) and data
/// (`(1-λ)P`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerSplit {
    pub lambda: f64,
    pub total_power: f64,
}

impl PowerSplit {
    pub fn new(lambda: f64, total_power: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::InvalidConfig(format!("lambda must lie in [0, 1], got {lambda}")));
        }
        if !(total_power > 0.0 && total_power.is_finite()) {
            return Err(Error::InvalidConfig(format!("total power must be positive, got {total_power}")));
        }
        Ok(Self { lambda, total_power })
    }

    pub fn pilot_power(&self) -> f64 {
        self.lambda * self.total_power
    }

    pub fn data_power(&self) -> f64 {
        (1.0 - self.lambda) * self.total_power
    }

    /// `√(λP)`
    pub fn pilot_amplitude(&self) -> f64 {
        self.pilot_power().sqrt()
    }

    /// `√((1-λ)P)`
    pub fn data_amplitude(&self) -> f64 {
        self.data_power().sqrt()
    }
}

/// One OFDM symbol after the channel.
#[derive(Debug, Clone)]
pub struct Frame {
    pub pilot: Vec<Complex64>,
    pub data_bits: Vec<u8>,
    pub data_symbols: Vec<Complex64>,
    pub received: Vec<Complex64>,
    pub noise_var: f64,
    pub split: PowerSplit,
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Zadoff-Chu sequence of length `n` with the given root.
pub fn zadoff_chu(n: usize, root: u64) -> Result<Vec<Complex64>> {
    if n == 0 || root == 0 || gcd(root, n as u64) != 1 {
        return Err(Error::NonCoprimeRoot { root, len: n });
    }
    let nn = n as u64;
    // Reduce the phase index modulo 2N to keep the argument small.
    let modulus = 2 * nn;
    Ok((0..nn)
        .map(|k| {
            let quad = if n % 2 == 0 { k * k } else { k * (k + 1) };
            let idx = ((root % modulus) * (quad % modulus)) % modulus;
            Complex64::from_polar(1.0, -PI * idx as f64 / nn as f64)
        })
        .collect())
}

/// Gray-mapped QPSK: `(b0, b1) -> ((1-2b0) + j(1-2b1)) / √2`.
pub fn qpsk_modulate(bits: &[u8]) -> Result<Vec<Complex64>> {
    if bits.len() % 2 != 0 {
        return Err(Error::OddLength(bits.len()));
    }
    Ok(bits
        .chunks_exact(2)
        .map(|b| {
            let level = |bit: u8| if bit == 0 { 1.0 } else { -1.0 };
            Complex64::new(level(b[0]), level(b[1])) * FRAC_1_SQRT_2
        })
        .collect())
}

/// Hard quadrant decision; an exact zero component decides bit 0.
pub fn qpsk_demodulate(symbols: &[Complex64]) -> Vec<u8> {
    symbols
        .iter()
        .flat_map(|s| [u8::from(s.re < 0.0), u8::from(s.im < 0.0)])
        .collect()
}

pub fn random_bits<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<u8> {
    (0..n).map(|_| rng.random_range(0..2u8)).collect()
}

/// Circularly-symmetric complex Gaussian noise, total variance `var` per
/// sample.
pub fn awgn<R: Rng + ?Sized>(n: usize, var: f64, rng: &mut R) -> Vec<Complex64> {
    let sd = var.sqrt();
    (0..n).map(|_| complex_gaussian(rng) * sd).collect()
}

/// `σ_w² = P / 10^(SNR/10)`.
pub fn snr_to_noise_var(snr_db: f64, total_power: f64) -> f64 {
    total_power / 10f64.powf(snr_db / 10.0)
}

/// Superimposes pilot and data, passes them through `h` and adds noise:
/// `y = (√(λP) x_p + √((1-λ)P) x_d) ⊙ h + w`.
pub fn transmit<R: Rng + ?Sized>(
    pilot: &[Complex64],
    data_bits: Vec<u8>,
    split: PowerSplit,
    h: &[Complex64],
    noise_var: f64,
    rng: &mut R,
) -> Result<Frame> {
    let n = h.len();
    check_len("transmit: pilot", n, pilot.len())?;
    check_len("transmit: data bits", 2 * n, data_bits.len())?;
    let data_symbols = qpsk_modulate(&data_bits)?;
    let noise = awgn(n, noise_var, rng);
    let (a, b) = (split.pilot_amplitude(), split.data_amplitude());
    let received = pilot
        .iter()
        .zip(&data_symbols)
        .zip(h)
        .zip(&noise)
        .map(|(((&xp, &xd), &hk), &w)| (xp * a + xd * b) * hk + w)
        .collect();
    Ok(Frame {
        pilot: pilot.to_vec(),
        data_bits,
        data_symbols,
        received,
        noise_var,
        split,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use proptest::prelude::*;
    use statrs::function::erf::erfc;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn power_split_accounting() {
        let s = PowerSplit::new(0.15, 2.0).unwrap();
        assert!((s.pilot_power() + s.data_power() - 2.0).abs() < 1e-15);
        assert!(PowerSplit::new(1.2, 1.0).is_err());
        assert!(PowerSplit::new(0.5, 0.0).is_err());
    }

    #[test]
    fn zadoff_chu_n4_by_hand() {
        let zc = zadoff_chu(4, 1).unwrap();
        let expected = [
            c(1.0, 0.0),
            Complex64::from_polar(1.0, -PI / 4.0),
            Complex64::from_polar(1.0, -PI),
            Complex64::from_polar(1.0, -9.0 * PI / 4.0),
        ];
        for (a, b) in zc.iter().zip(&expected) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn zadoff_chu_has_zero_periodic_autocorrelation() {
        for (n, root) in [(32, 1), (32, 5), (31, 3), (63, 2)] {
            let zc = zadoff_chu(n, root).unwrap();
            assert!(zc.iter().all(|x| (x.norm() - 1.0).abs() < 1e-12));
            for tau in 1..n {
                let r: Complex64 = (0..n).map(|k| zc[k] * zc[(k + tau) % n].conj()).sum();
                assert!(r.norm() < 1e-9, "N={n} root={root} tau={tau}: {}", r.norm());
            }
        }
    }

    #[test]
    fn zadoff_chu_rejects_shared_factor() {
        assert!(matches!(zadoff_chu(32, 2), Err(Error::NonCoprimeRoot { .. })));
        assert!(zadoff_chu(0, 1).is_err());
    }

    #[test]
    fn qpsk_mapping_and_slicer() {
        let s = qpsk_modulate(&[0, 0]).unwrap()[0];
        assert!((s - c(FRAC_1_SQRT_2, FRAC_1_SQRT_2)).norm() < 1e-15);
        assert_eq!(qpsk_demodulate(&[c(0.3, -0.9)]), vec![0, 1]);
        assert_eq!(qpsk_demodulate(&[c(0.0, 0.0)]), vec![0, 0]);
        assert_eq!(qpsk_demodulate(&[c(-0.0, -1.0)]), vec![0, 1]);
        for pair in [[0, 0], [0, 1], [1, 0], [1, 1]] {
            assert_eq!(qpsk_demodulate(&qpsk_modulate(&pair).unwrap()), pair.to_vec());
        }
        assert!(matches!(qpsk_modulate(&[0, 1, 1]), Err(Error::OddLength(3))));
    }

    #[test]
    fn qpsk_unit_energy() {
        let bits = random_bits(64, &mut stream(1, 0));
        let x = qpsk_modulate(&bits).unwrap();
        let e: f64 = x.iter().map(|s| s.norm_sqr()).sum();
        assert!((e - 32.0).abs() < 1e-12);
    }

    #[test]
    fn qpsk_awgn_ber_matches_closed_form() {
        // QPSK over a known unit channel: per-bit error probability
        // Q(√(2 Eb/N0)) with Eb/N0 = SNR/2, i.e. Q(√SNR) = erfc(√(SNR/2))/2.
        let snr_db = 8.0;
        let snr = 10f64.powf(snr_db / 10.0);
        let n_sym = 1_000_000usize;
        let mut rng = stream(2, 0);
        let bits = random_bits(2 * n_sym, &mut rng);
        let x = qpsk_modulate(&bits).unwrap();
        let w = awgn(n_sym, 1.0 / snr, &mut rng);
        let y: Vec<_> = x.iter().zip(&w).map(|(a, b)| a + b).collect();
        let errors = qpsk_demodulate(&y).iter().zip(&bits).filter(|(a, b)| a != b).count();
        let ber = errors as f64 / bits.len() as f64;
        let p = 0.5 * erfc((snr / 2.0).sqrt());
        let sigma = (p * (1.0 - p) / bits.len() as f64).sqrt();
        assert!((ber - p).abs() < 3.0 * sigma, "ber {ber} vs {p} ± {sigma}");
    }

    #[test]
    fn noise_statistics() {
        let var = 0.37;
        let w = awgn(1_000_000, var, &mut stream(3, 0));
        let n = w.len() as f64;
        let p = w.iter().map(|x| x.norm_sqr()).sum::<f64>() / n;
        assert!((p / var - 1.0).abs() < 0.01, "power {p}");
        let cov = w.iter().map(|x| x.re * x.im).sum::<f64>() / n;
        let rho = cov / (var / 2.0);
        assert!(rho.abs() < 0.01, "rho {rho}");
    }

    #[test]
    fn snr_conversion() {
        assert!((snr_to_noise_var(0.0, 1.0) - 1.0).abs() < 1e-15);
        assert!((snr_to_noise_var(10.0, 1.0) - 0.1).abs() < 1e-15);
        assert!((snr_to_noise_var(18.0, 2.0) - 0.031_697).abs() < 1e-6);
    }

    #[test]
    fn noiseless_pilot_only_and_data_only() {
        let n = 8;
        let zc = zadoff_chu(n, 1).unwrap();
        let ones = vec![c(1.0, 0.0); n];
        let bits = random_bits(2 * n, &mut stream(4, 0));
        let f = transmit(&zc, bits.clone(), PowerSplit::new(1.0, 1.0).unwrap(), &ones, 0.0, &mut stream(4, 1)).unwrap();
        for (y, p) in f.received.iter().zip(&zc) {
            assert!((y - p).norm() < 1e-15);
        }

        let h: Vec<_> = (0..n).map(|_| complex_gaussian(&mut stream(4, 2))).collect();
        let f = transmit(&zc, bits, PowerSplit::new(0.0, 2.0).unwrap(), &h, 0.0, &mut stream(4, 3)).unwrap();
        for k in 0..n {
            let want = f.data_symbols[k] * h[k] * 2f64.sqrt();
            assert!((f.received[k] - want).norm() < 1e-12);
        }
    }

    #[test]
    fn transmit_rejects_bad_lengths() {
        let zc = zadoff_chu(8, 1).unwrap();
        let h = vec![c(1.0, 0.0); 8];
        let split = PowerSplit::new(0.2, 1.0).unwrap();
        assert!(transmit(&zc[..7], vec![0; 16], split, &h, 0.1, &mut stream(0, 0)).is_err());
        assert!(transmit(&zc, vec![0; 14], split, &h, 0.1, &mut stream(0, 0)).is_err());
    }

    #[test]
    fn superimposed_power_accounting() {
        // E[|√(λP) x_p + √((1-λ)P) x_d|²] = P for independent unit-modulus
        // pilot and zero-mean data.
        let split = PowerSplit::new(0.15, 1.5).unwrap();
        let n = 32;
        let zc = zadoff_chu(n, 1).unwrap();
        let ones = vec![c(1.0, 0.0); n];
        let mut rng = stream(5, 0);
        let frames = 20_000;
        let mut acc = 0.0;
        for _ in 0..frames {
            let bits = random_bits(2 * n, &mut rng);
            let f = transmit(&zc, bits, split, &ones, 0.0, &mut rng).unwrap();
            acc += f.received.iter().map(|y| y.norm_sqr()).sum::<f64>() / n as f64;
        }
        let mean = acc / frames as f64;
        // per-sample variance of |.|² is 2·λ(1-λ)P², so the mean's sd is tiny
        let sd = (2.0 * 0.15 * 0.85 * 1.5f64.powi(2) / (frames * n) as f64).sqrt();
        assert!((mean - 1.5).abs() < 3.0 * sd + 1e-9, "mean {mean}, sd {sd}");
    }

    proptest! {
        #[test]
        fn transmit_matches_scalar_loop(seed in any::<u64>(), lambda in 0.0f64..=1.0, snr in -5.0f64..30.0) {
            let n = 16;
            let mut rng = stream(seed, 0);
            let zc = zadoff_chu(n, 3).unwrap();
            let h: Vec<_> = (0..n).map(|_| complex_gaussian(&mut rng)).collect();
            let bits = random_bits(2 * n, &mut rng);
            let split = PowerSplit::new(lambda, 1.3).unwrap();
            let var = snr_to_noise_var(snr, 1.3);
            let f = transmit(&zc, bits.clone(), split, &h, var, &mut stream(seed, 1)).unwrap();
            let w = awgn(n, var, &mut stream(seed, 1));
            let xd = qpsk_modulate(&bits).unwrap();
            for k in 0..n {
                let want = h[k] * ((lambda * 1.3f64).sqrt() * zc[k] + ((1.0 - lambda) * 1.3f64).sqrt() * xd[k]) + w[k];
                prop_assert!((f.received[k] - want).norm() < 1e-12);
            }
        }

        #[test]
        fn superposition_is_linear_in_the_split(seed in any::<u64>(), lambda in 0.0f64..=1.0) {
            let n = 16;
            let p = 1.0;
            let mut rng = stream(seed, 0);
            let zc = zadoff_chu(n, 1).unwrap();
            let h: Vec<_> = (0..n).map(|_| complex_gaussian(&mut rng)).collect();
            let bits = random_bits(2 * n, &mut rng);
            let f1 = transmit(&zc, bits.clone(), PowerSplit::new(lambda, p).unwrap(), &h, 0.2, &mut stream(seed, 9)).unwrap();
            let f0 = transmit(&zc, bits, PowerSplit::new(0.0, p).unwrap(), &h, 0.2, &mut stream(seed, 9)).unwrap();
            for k in 0..n {
                let want = h[k] * ((lambda * p).sqrt() * zc[k] + (((1.0 - lambda) * p).sqrt() - p.sqrt()) * f0.data_symbols[k]);
                prop_assert!((f1.received[k] - f0.received[k] - want).norm() < 1e-12);
            }
        }

        #[test]
        fn qpsk_roundtrip(bits in proptest::collection::vec(0u8..2, 0..64).prop_filter("even", |b| b.len() % 2 == 0)) {
            prop_assert_eq!(qpsk_demodulate(&qpsk_modulate(&bits).unwrap()), bits);
        }
    }
}
