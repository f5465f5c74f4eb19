//! RIS-assisted frequency-selective channel generation.
//!
//! Each link is an `L`-tap channel with an exponential power-delay profile,
//! returned as its `N`-point frequency response. The composite response seen
//! by the receiver is the direct link plus one phase-weighted cascade per RIS
//! sub-surface.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{check_len, Error, Result};

/// Parameters of the tap-delay channel model.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelConfig {
    pub n_subcarriers: usize,
    pub n_subsurfaces: usize,
    pub n_taps: usize,
    pub cp_length: usize,
    /// Rician K-factor of the RIS-segment links, in dB. `+inf` is pure LOS.
    pub rician_k_db: f64,
    /// Exponential decay of the tap power profile, per tap.
    pub pdp_decay: f64,
    pub seed: u64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            n_subcarriers: 32,
            n_subsurfaces: 12,
            n_taps: 5,
            cp_length: 8,
            rician_k_db: 3.0,
            pdp_decay: 0.5,
            seed: 0,
        }
    }
}

impl ChannelConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.n_subcarriers == 0 {
            return bad("n_subcarriers must be positive".into());
        }
        if self.n_taps == 0 {
            return bad("n_taps must be positive".into());
        }
        if self.n_taps >= self.cp_length {
            return bad(format!(
                "n_taps ({}) must be shorter than cp_length ({})",
                self.n_taps, self.cp_length
            ));
        }
        if self.n_taps > self.n_subcarriers {
            return bad(format!(
                "n_taps ({}) exceeds n_subcarriers ({})",
                self.n_taps, self.n_subcarriers
            ));
        }
        if !(self.pdp_decay >= 0.0 && self.pdp_decay.is_finite()) {
            return bad(format!("pdp_decay must be finite and >= 0, got {}", self.pdp_decay));
        }
        if self.rician_k_db.is_nan() {
            return bad("rician_k_db is NaN".into());
        }
        Ok(())
    }

    /// Normalized tap powers `p_l ∝ exp(-decay * l)`, summing to one.
    pub fn tap_powers(&self) -> Vec<f64> {
        let raw: Vec<f64> = (0..self.n_taps)
            .map(|l| (-self.pdp_decay * l as f64).exp())
            .collect();
        let total: f64 = raw.iter().sum();
        raw.into_iter().map(|p| p / total).collect()
    }
}

/// How the RIS reflection phases are chosen for a realization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PhaseMode {
    /// Every sub-surface reflects with coefficient 1.
    AllZeroPhase,
    /// Independent phases, uniform on `[0, 2π)`.
    #[default]
    UniformRandom,
}

impl std::str::FromStr for PhaseMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all-zero-phase" => Ok(Self::AllZeroPhase),
            "uniform-random" => Ok(Self::UniformRandom),
            other => Err(Error::InvalidConfig(format!("unknown phase mode `{other}`"))),
        }
    }
}

impl std::fmt::Display for PhaseMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::AllZeroPhase => "all-zero-phase",
            Self::UniformRandom => "uniform-random",
        })
    }
}

/// One draw of every link plus the composite response.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    pub h_direct: Vec<Complex64>,
    pub h_tx_ris: Vec<Vec<Complex64>>,
    pub h_ris_rx: Vec<Vec<Complex64>>,
    pub phase_shifts: Vec<Complex64>,
    pub h_composite: Vec<Complex64>,
}

impl ChannelRealization {
    pub fn n_subcarriers(&self) -> usize {
        self.h_composite.len()
    }
}

/// Unit-variance circularly-symmetric complex Gaussian sample.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Draws one link: `L` taps with the configured power profile, tap 0 Rician
/// when `rician` is set, returned as the `N`-point DFT of the tap vector.
pub fn draw_tap_channel<R: Rng + ?Sized>(
    cfg: &ChannelConfig,
    rician: bool,
    rng: &mut R,
) -> Result<Vec<Complex64>> {
    cfg.validate()?;
    let powers = cfg.tap_powers();
    let taps: Vec<Complex64> = powers
        .iter()
        .enumerate()
        .map(|(l, &p)| {
            let scatter = complex_gaussian(rng);
            if l == 0 && rician {
                let (los, nlos) = rician_split(cfg.rician_k_db);
                (Complex64::new(los.sqrt(), 0.0) + scatter * nlos.sqrt()) * p.sqrt()
            } else {
                scatter * p.sqrt()
            }
        })
        .collect();
    Ok(taps_to_cfr(&taps, cfg.n_subcarriers))
}

/// Fractions of tap power in the specular and scattered parts.
fn rician_split(k_db: f64) -> (f64, f64) {
    if k_db == f64::INFINITY {
        return (1.0, 0.0);
    }
    let k = 10f64.powf(k_db / 10.0);
    (k / (k + 1.0), 1.0 / (k + 1.0))
}

/// `N`-point DFT of a zero-padded tap vector: `H[k] = Σ_l g_l e^{-j2πkl/N}`.
pub fn taps_to_cfr(taps: &[Complex64], n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|k| {
            taps.iter()
                .enumerate()
                .map(|(l, &g)| g * Complex64::from_polar(1.0, -2.0 * PI * (k * l % n) as f64 / n as f64))
                .sum()
        })
        .collect()
}

pub fn make_phase_shifts<R: Rng + ?Sized>(g: usize, mode: PhaseMode, rng: &mut R) -> Vec<Complex64> {
    match mode {
        PhaseMode::AllZeroPhase => vec![Complex64::new(1.0, 0.0); g],
        PhaseMode::UniformRandom => (0..g)
            .map(|_| Complex64::from_polar(1.0, rng.random_range(0.0..2.0 * PI)))
            .collect(),
    }
}

/// Builds the composite response `h = h_D + Σ_g φ_g (h_Q,g ⊙ h_B,g)`.
pub fn compose_channel(
    direct: Vec<Complex64>,
    tx_ris: Vec<Vec<Complex64>>,
    ris_rx: Vec<Vec<Complex64>>,
    phase_shifts: Vec<Complex64>,
) -> Result<ChannelRealization> {
    let n = direct.len();
    let g = phase_shifts.len();
    check_len("compose_channel: tx-ris links", g, tx_ris.len())?;
    check_len("compose_channel: ris-rx links", g, ris_rx.len())?;
    for (q, b) in tx_ris.iter().zip(&ris_rx) {
        check_len("compose_channel: tx-ris CFR", n, q.len())?;
        check_len("compose_channel: ris-rx CFR", n, b.len())?;
    }
    if let Some(bad) = phase_shifts.iter().position(|p| (p.norm() - 1.0).abs() > 1e-9) {
        return Err(Error::Rejected(format!(
            "phase shift {bad} is not unit-modulus (|φ| = {})",
            phase_shifts[bad].norm()
        )));
    }

    let mut composite = direct.clone();
    for ((q, b), &phi) in tx_ris.iter().zip(&ris_rx).zip(&phase_shifts) {
        for ((h, &hq), &hb) in composite.iter_mut().zip(q).zip(b) {
            *h += phi * hq * hb;
        }
    }
    Ok(ChannelRealization {
        h_direct: direct,
        h_tx_ris: tx_ris,
        h_ris_rx: ris_rx,
        phase_shifts,
        h_composite: composite,
    })
}

/// Full realization: Rayleigh direct link, Rician RIS segments, phases per
/// `mode`.
pub fn draw_realization<R: Rng + ?Sized>(
    cfg: &ChannelConfig,
    mode: PhaseMode,
    rng: &mut R,
) -> Result<ChannelRealization> {
    let direct = draw_tap_channel(cfg, false, rng)?;
    let mut tx_ris = Vec::with_capacity(cfg.n_subsurfaces);
    let mut ris_rx = Vec::with_capacity(cfg.n_subsurfaces);
    for _ in 0..cfg.n_subsurfaces {
        tx_ris.push(draw_tap_channel(cfg, true, rng)?);
        ris_rx.push(draw_tap_channel(cfg, true, rng)?);
    }
    let phases = make_phase_shifts(cfg.n_subsurfaces, mode, rng);
    compose_channel(direct, tx_ris, ris_rx, phases)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use proptest::prelude::*;

    fn cfg(n_taps: usize, decay: f64) -> ChannelConfig {
        ChannelConfig {
            n_taps,
            pdp_decay: decay,
            cp_length: n_taps + 1,
            ..ChannelConfig::default()
        }
    }

    fn random_vec(rng: &mut crate::rng::SimRng, n: usize) -> Vec<Complex64> {
        (0..n).map(|_| complex_gaussian(rng)).collect()
    }

    /// Scalar evaluation of the received-signal channel term, one subcarrier
    /// at a time.
    fn brute_force_composite(
        d: &[Complex64],
        q: &[Vec<Complex64>],
        b: &[Vec<Complex64>],
        phi: &[Complex64],
    ) -> Vec<Complex64> {
        let mut out = Vec::new();
        for k in 0..d.len() {
            let mut acc = d[k];
            for g in 0..phi.len() {
                acc += q[g][k] * phi[g] * b[g][k];
            }
            out.push(acc);
        }
        out
    }

    #[test]
    fn config_invariants() {
        assert!(ChannelConfig::default().validate().is_ok());
        let mut c = ChannelConfig::default();
        c.n_taps = c.cp_length;
        assert!(c.validate().is_err());
        let c = ChannelConfig { n_taps: 40, cp_length: 50, ..ChannelConfig::default() };
        assert!(c.validate().is_err());
        let c = ChannelConfig { n_taps: 0, ..ChannelConfig::default() };
        assert!(c.validate().is_err());
    }

    #[test]
    fn single_tap_is_flat() {
        let c = cfg(1, 0.0);
        let mut rng = stream(1, 0);
        for _ in 0..20 {
            let h = draw_tap_channel(&c, false, &mut rng).unwrap();
            let m0 = h[0].norm();
            assert!(h.iter().all(|x| (x.norm() - m0).abs() < 1e-12));
        }
    }

    #[test]
    fn rician_limit_is_deterministic() {
        let c = ChannelConfig { rician_k_db: 60.0, ..cfg(1, 0.0) };
        let mut rng = stream(2, 0);
        let draws: Vec<Complex64> = (0..2000)
            .map(|_| draw_tap_channel(&c, true, &mut rng).unwrap()[0])
            .collect();
        let mean: Complex64 = draws.iter().sum::<Complex64>() / draws.len() as f64;
        let var = draws.iter().map(|x| (x - mean).norm_sqr()).sum::<f64>() / draws.len() as f64;
        assert!(var < 1e-3, "var = {var}");
        assert!((mean.norm() - 1.0).abs() < 1e-3);
    }

    #[test]
    fn tap_channel_energy_is_normalized() {
        // 1e5 draws of ||h||^2 / N; the tolerance is the 1% stated bound and is
        // checked against 3 sigma of the sample mean.
        let c = cfg(5, 0.5);
        let mut rng = stream(3, 0);
        let draws = 100_000;
        let samples: Vec<f64> = (0..draws)
            .map(|_| {
                let h = draw_tap_channel(&c, false, &mut rng).unwrap();
                h.iter().map(|x| x.norm_sqr()).sum::<f64>() / c.n_subcarriers as f64
            })
            .collect();
        let mean = samples.iter().sum::<f64>() / draws as f64;
        let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (draws - 1) as f64;
        let sigma = (var / draws as f64).sqrt();
        assert!((mean - 1.0).abs() < 0.01, "mean = {mean}");
        assert!((mean - 1.0).abs() < 3.0 * sigma.max(1e-3), "mean = {mean}, sigma = {sigma}");
    }

    #[test]
    fn tap_powers_sum_to_one() {
        let p = cfg(7, 0.3).tap_powers();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(p.windows(2).all(|w| w[0] > w[1]));
    }

    #[test]
    fn phase_shift_modes() {
        let mut rng = stream(4, 0);
        let ones = make_phase_shifts(2, PhaseMode::AllZeroPhase, &mut rng);
        assert_eq!(ones, vec![Complex64::new(1.0, 0.0); 2]);

        let phases = make_phase_shifts(10_000, PhaseMode::UniformRandom, &mut rng);
        assert!(phases.iter().all(|p| (p.norm() - 1.0).abs() < 1e-12));
        let mean_theta = phases
            .iter()
            .map(|p| p.arg().rem_euclid(2.0 * PI))
            .sum::<f64>()
            / phases.len() as f64;
        assert!((mean_theta - PI).abs() < 0.1, "mean θ = {mean_theta}");
    }

    #[test]
    fn no_ris_means_direct_link_only() {
        let mut rng = stream(5, 0);
        let d = random_vec(&mut rng, 8);
        let r = compose_channel(d.clone(), vec![], vec![], vec![]).unwrap();
        assert_eq!(r.h_composite, d);
    }

    #[test]
    fn identity_cascade() {
        let n = 6;
        let one = vec![Complex64::new(1.0, 0.0); n];
        let r = compose_channel(
            vec![Complex64::new(0.0, 0.0); n],
            vec![one.clone()],
            vec![one.clone()],
            vec![Complex64::new(1.0, 0.0)],
        )
        .unwrap();
        assert_eq!(r.h_composite, one);
    }

    #[test]
    fn compose_rejects_bad_shapes_and_phases() {
        let n = 4;
        let v = vec![Complex64::new(1.0, 0.0); n];
        assert!(compose_channel(v.clone(), vec![v.clone()], vec![], vec![Complex64::new(1.0, 0.0)]).is_err());
        assert!(compose_channel(v.clone(), vec![v[..3].to_vec()], vec![v.clone()], vec![Complex64::new(1.0, 0.0)]).is_err());
        assert!(compose_channel(v.clone(), vec![v.clone()], vec![v.clone()], vec![Complex64::new(2.0, 0.0)]).is_err());
    }

    #[test]
    fn realization_has_requested_shape() {
        let c = ChannelConfig::default();
        let r = draw_realization(&c, PhaseMode::UniformRandom, &mut stream(6, 0)).unwrap();
        assert_eq!(r.h_composite.len(), 32);
        assert_eq!(r.h_tx_ris.len(), 12);
        assert_eq!(r.phase_shifts.len(), 12);
    }

    proptest! {
        #[test]
        fn compose_matches_brute_force(seed in any::<u64>(), g in 0usize..6, n in 1usize..40) {
            let mut rng = stream(seed, 0);
            let d = random_vec(&mut rng, n);
            let q: Vec<_> = (0..g).map(|_| random_vec(&mut rng, n)).collect();
            let b: Vec<_> = (0..g).map(|_| random_vec(&mut rng, n)).collect();
            let phi = make_phase_shifts(g, PhaseMode::UniformRandom, &mut rng);
            let oracle = brute_force_composite(&d, &q, &b, &phi);
            let r = compose_channel(d, q, b, phi).unwrap();
            for (x, y) in r.h_composite.iter().zip(&oracle) {
                prop_assert!((x - y).norm() < 1e-12);
            }
        }

        #[test]
        fn opposite_phases_average_to_direct(seed in any::<u64>(), g in 1usize..6) {
            let n = 16;
            let mut rng = stream(seed, 1);
            let d = random_vec(&mut rng, n);
            let q: Vec<_> = (0..g).map(|_| random_vec(&mut rng, n)).collect();
            let b: Vec<_> = (0..g).map(|_| random_vec(&mut rng, n)).collect();
            let phi = make_phase_shifts(g, PhaseMode::UniformRandom, &mut rng);
            let neg: Vec<_> = phi.iter().map(|p| -p).collect();
            let plus = compose_channel(d.clone(), q.clone(), b.clone(), phi).unwrap();
            let minus = compose_channel(d.clone(), q, b, neg).unwrap();
            for k in 0..n {
                let avg = (plus.h_composite[k] + minus.h_composite[k]) / 2.0;
                prop_assert!((avg - d[k]).norm() < 1e-12);
            }
        }
    }
}
