//! Fast property suite run by `rispilot selftest`.

use std::time::Instant;

use num_complex::Complex64;
use rand::Rng;
use rispilot_core::analysis::{complexity_table, energy_accounting, energy_saved_closed_form, ResourceModel};
use rispilot_core::channel::{complex_gaussian, compose_channel, ChannelConfig, PhaseMode};
use rispilot_core::estimators::{equalize_and_cancel, ls_estimate};
use rispilot_core::models::{complex_to_real, real_to_complex, Arch, CeNet};
use rispilot_core::neuralnet::{grad_check_with, Checkpoint, Mlp};
use rispilot_core::pipeline::{draw_sample, SystemConfig};
use rispilot_core::rng::stream;
use rispilot_core::waveform::{awgn, qpsk_demodulate, qpsk_modulate, random_bits, transmit, zadoff_chu, PowerSplit};
use statrs::function::erf::erfc;

#[derive(Debug, Clone, Copy, Default)]
pub struct SelftestOptions {
    /// Corrupts the analytic gradient so `grad_check` must fail.
    pub corrupt_backward: bool,
}

#[derive(Debug, Clone)]
pub struct PropertyResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct SelftestReport {
    pub results: Vec<PropertyResult>,
}

impl SelftestReport {
    pub fn passed(&self) -> bool {
        self.results.iter().all(|r| r.passed)
    }

    pub fn failed(&self) -> Vec<String> {
        self.results.iter().filter(|r| !r.passed).map(|r| r.name.to_string()).collect()
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for r in &self.results {
            let tag = if r.passed { "PASS" } else { "FAIL" };
            s.push_str(&format!("{tag} {:<34} {:>7.3}s  {}\n", r.name, r.seconds, r.detail));
        }
        let n_pass = self.results.iter().filter(|r| r.passed).count();
        s.push_str(&format!("{n_pass}/{} properties passed\n", self.results.len()));
        s
    }
}

type Check = Result<String, String>;

fn ensure(cond: bool, ok: String, fail: String) -> Check {
    if cond {
        Ok(ok)
    } else {
        Err(fail)
    }
}

fn zc_unit_modulus() -> Check {
    let mut worst = 0.0f64;
    for (n, root) in [(32, 1), (32, 5), (63, 2), (64, 7), (139, 25)] {
        let z = zadoff_chu(n, root).map_err(|e| e.to_string())?;
        worst = z.iter().fold(worst, |w, c| w.max((c.norm() - 1.0).abs()));
    }
    ensure(worst < 1e-9, format!("max ||z|-1| = {worst:.1e}"), format!("max ||z|-1| = {worst:.1e}"))
}

fn zc_autocorrelation() -> Check {
    let mut worst = 0.0f64;
    for (n, root) in [(32, 1), (32, 5), (63, 2), (64, 7), (139, 25)] {
        let z = zadoff_chu(n, root).map_err(|e| e.to_string())?;
        for shift in 1..n {
            let r: Complex64 = (0..n).map(|k| z[k] * z[(k + shift) % n].conj()).sum();
            worst = worst.max(r.norm() / n as f64);
        }
    }
    ensure(worst < 1e-9, format!("max off-peak {worst:.1e}"), format!("max off-peak {worst:.1e}"))
}

fn reshape_bijection() -> Check {
    let mut rng = stream(101, 0);
    for n in [1, 2, 7, 32, 64] {
        let v: Vec<Complex64> = (0..n).map(|_| complex_gaussian(&mut rng)).collect();
        let r = complex_to_real(&v);
        if r.len() != 2 * n || real_to_complex(&r).map_err(|e| e.to_string())? != v {
            return Err(format!("roundtrip broke at N={n}"));
        }
        let x: Vec<f64> = (0..2 * n).map(|_| rng.random_range(-5.0..5.0)).collect();
        if complex_to_real(&real_to_complex(&x).map_err(|e| e.to_string())?) != x {
            return Err(format!("inverse roundtrip broke at N={n}"));
        }
    }
    Ok("exact both ways for N in {1,2,7,32,64}".into())
}

fn compose_bruteforce() -> Check {
    let mut rng = stream(102, 0);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let n = rng.random_range(1..40);
        let g = rng.random_range(0..6);
        let mut draw = |len| (0..len).map(|_| complex_gaussian(&mut rng)).collect::<Vec<_>>();
        let direct = draw(n);
        let q: Vec<_> = (0..g).map(|_| draw(n)).collect();
        let b: Vec<_> = (0..g).map(|_| draw(n)).collect();
        let phi: Vec<_> = (0..g).map(|i| Complex64::from_polar(1.0, 0.7 * i as f64 + 0.1)).collect();
        let h = compose_channel(direct.clone(), q.clone(), b.clone(), phi.clone()).map_err(|e| e.to_string())?;
        for k in 0..n {
            let mut acc = direct[k];
            for i in 0..g {
                acc += phi[i] * q[i][k] * b[i][k];
            }
            worst = worst.max((acc - h.h_composite[k]).norm());
        }
    }
    ensure(worst < 1e-12, format!("max error {worst:.1e}"), format!("max error {worst:.1e}"))
}

fn phase_symmetry() -> Check {
    let mut rng = stream(103, 0);
    let (n, g) = (16, 5);
    let mut draw = |len| (0..len).map(|_| complex_gaussian(&mut rng)).collect::<Vec<_>>();
    let direct = draw(n);
    let q: Vec<_> = (0..g).map(|_| draw(n)).collect();
    let b: Vec<_> = (0..g).map(|_| draw(n)).collect();
    let phi: Vec<_> = (0..g).map(|i| Complex64::from_polar(1.0, 1.3 * i as f64)).collect();
    let neg: Vec<_> = phi.iter().map(|p| -p).collect();
    let hp = compose_channel(direct.clone(), q.clone(), b.clone(), phi).map_err(|e| e.to_string())?;
    let hm = compose_channel(direct.clone(), q, b, neg).map_err(|e| e.to_string())?;
    let worst = (0..n)
        .map(|k| ((hp.h_composite[k] + hm.h_composite[k]) * 0.5 - direct[k]).norm())
        .fold(0.0f64, f64::max);
    ensure(worst < 1e-12, format!("max error {worst:.1e}"), format!("max error {worst:.1e}"))
}

fn noise_calibration() -> Check {
    let mut rng = stream(104, 0);
    let n = 200_000;
    for var in [0.01, 1.0, 7.5] {
        let w = awgn(n, var, &mut rng);
        let est = w.iter().map(|c| c.norm_sqr()).sum::<f64>() / n as f64;
        if (est / var - 1.0).abs() > 0.01 {
            return Err(format!("variance {var}: measured {est}"));
        }
    }
    Ok("sample variance within 1% at 2e5 samples".into())
}

fn qpsk_awgn_ber() -> Check {
    let mut rng = stream(105, 0);
    let n_sym = 500_000;
    let snr_db = 6.0;
    let var = 10f64.powf(-snr_db / 10.0);
    let bits = random_bits(2 * n_sym, &mut rng);
    let x = qpsk_modulate(&bits).map_err(|e| e.to_string())?;
    let w = awgn(n_sym, var, &mut rng);
    let y: Vec<Complex64> = x.iter().zip(&w).map(|(a, b)| a + b).collect();
    let errors = qpsk_demodulate(&y).iter().zip(&bits).filter(|(a, b)| a != b).count();
    let p = 0.5 * erfc((1.0 / var).sqrt() / std::f64::consts::SQRT_2);
    let n_bits = (2 * n_sym) as f64;
    let ber = errors as f64 / n_bits;
    let sigma = (p * (1.0 - p) / n_bits).sqrt();
    ensure(
        (ber - p).abs() < 3.0 * sigma,
        format!("BER {ber:.4e} vs {p:.4e} at {snr_db} dB"),
        format!("BER {ber:.4e} vs {p:.4e} ± {:.1e}", 3.0 * sigma),
    )
}

fn perturbed(arch: Arch, n: usize, seed: u64) -> Mlp {
    let mut net = Mlp::new(&arch.layer_specs(n), 1e-3, &mut stream(seed, 0)).expect("valid layout");
    let mut rng = stream(seed, 1);
    for p in net.param_slices_mut() {
        for v in p.iter_mut() {
            *v += rng.random_range(-0.2..0.2);
        }
    }
    net
}

fn grad_check_arch(arch: Arch, corrupt: bool) -> Check {
    let n = 2;
    let net = perturbed(arch, n, 106 + arch as u64);
    let specs = arch.layer_specs(n);
    let (d_in, d_out) = (specs[0].in_dim, specs.last().unwrap().out_dim);
    let mut rng = stream(107, arch as u64);
    let x = ndarray::Array2::from_shape_fn((6, d_in), |_| rng.random_range(-1.0..1.0));
    let y = ndarray::Array2::from_shape_fn((6, d_out), |_| rng.random_range(-1.0..1.0));
    let report = grad_check_with(&net, x.view(), y.view(), 1e-6, 1e-4, |g| {
        if corrupt {
            g.layers[0].weights[[0, 0]] += 0.5;
        }
    })
    .map_err(|e| e.to_string())?;
    ensure(
        report.pass,
        format!("max rel err {:.1e} over {} params", report.max_rel_err, report.checked),
        format!("max rel err {:.1e} at param {}", report.max_rel_err, report.worst_index),
    )
}

fn perfect_csi_recovery() -> Check {
    let sys = SystemConfig::default();
    let pilot = sys.pilot().map_err(|e| e.to_string())?;
    let mut rng = stream(108, 0);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let s = draw_sample(&sys, &pilot, f64::INFINITY, &mut rng).map_err(|e| e.to_string())?;
        let eq = equalize_and_cancel(&s.frame.received, &s.channel.h_composite, &pilot, sys.split)
            .map_err(|e| e.to_string())?;
        let a = sys.split.data_amplitude();
        for (got, x) in eq.s_coarse.iter().zip(&s.frame.data_symbols) {
            worst = worst.max((got - x * a).norm());
        }
    }
    ensure(worst < 1e-12, format!("max error {worst:.1e} over 1000 frames"), format!("max error {worst:.1e}"))
}

fn ls_oracle() -> Check {
    let mut rng = stream(109, 0);
    let n = 32;
    let pilot = zadoff_chu(n, 1).map_err(|e| e.to_string())?;
    let split = PowerSplit::new(0.15, 1.0).map_err(|e| e.to_string())?;
    let h: Vec<Complex64> = (0..n).map(|_| complex_gaussian(&mut rng)).collect();
    let bits = random_bits(2 * n, &mut rng);
    let f = transmit(&pilot, bits, split, &h, 0.1, &mut rng).map_err(|e| e.to_string())?;
    let ls = ls_estimate(&f.received, &pilot, split).map_err(|e| e.to_string())?;
    let worst = (0..n)
        .map(|k| (ls.h_ls[k] - f.received[k] / (pilot[k] * split.pilot_amplitude())).norm())
        .fold(0.0f64, f64::max);
    ensure(worst < 1e-12, format!("max error {worst:.1e}"), format!("max error {worst:.1e}"))
}

fn checkpoint_roundtrip() -> Check {
    let ce = CeNet::new(8, 1e-4, &mut stream(110, 0)).map_err(|e| e.to_string())?;
    let mut buf = Vec::new();
    ce.to_checkpoint().write_to(&mut buf).map_err(|e| e.to_string())?;
    let back = Checkpoint::read_from(buf.as_slice()).map_err(|e| e.to_string())?;
    let mut rng = stream(110, 1);
    let x = ndarray::Array2::from_shape_fn((5, 16), |_| rng.random_range(-3.0..3.0));
    let a = ce.net().infer(x.view()).map_err(|e| e.to_string())?;
    let b = back.net.infer(x.view()).map_err(|e| e.to_string())?;
    ensure(a == b && back.net == *ce.net(), "bit-identical".into(), "outputs differ after reload".into())
}

fn complexity_exact() -> Check {
    let rows = complexity_table(&[32, 64]).map_err(|e| e.to_string())?;
    let got: Vec<_> = rows.iter().map(|r| (r.n, r.proposed, r.mmse_chain)).collect();
    ensure(
        got == [(32, 86_016, 200_768), (64, 344_064, 1_589_376)],
        format!("{got:?}"),
        format!("{got:?}"),
    )
}

fn energy_identity() -> Check {
    let mut rng = stream(111, 0);
    for _ in 0..1000 {
        let m = ResourceModel {
            n_data: rng.random_range(0..500),
            n_pilot: rng.random_range(0..500),
            symbol_duration: rng.random_range(0.01..5.0),
            power: rng.random_range(0.01..5.0),
            lambda: rng.random_range(0.0..=1.0),
        };
        let r = energy_accounting(&m).map_err(|e| e.to_string())?;
        if (r.e_saved - energy_saved_closed_form(&m)).abs() > 1e-12 * r.e_nonsup.max(1.0) {
            return Err(format!("mismatch for {m:?}"));
        }
    }
    let ex = ResourceModel { n_data: 32, n_pilot: 32, symbol_duration: 1.0, power: 1.0, lambda: 0.15 };
    let r = energy_accounting(&ex).map_err(|e| e.to_string())?;
    ensure(
        (r.e_nonsup, r.e_prop) == (64.0, 32.0),
        "closed form agrees; 64 vs 32 example holds".into(),
        format!("example gave {} vs {}", r.e_nonsup, r.e_prop),
    )
}

fn channel_energy() -> Check {
    let cfg = ChannelConfig { n_subsurfaces: 0, ..ChannelConfig::default() };
    let mut rng = stream(112, 0);
    let draws = 20_000;
    let mut acc = 0.0;
    for _ in 0..draws {
        let h = rispilot_core::channel::draw_realization(&cfg, PhaseMode::UniformRandom, &mut rng)
            .map_err(|e| e.to_string())?;
        acc += h.h_composite.iter().map(|c| c.norm_sqr()).sum::<f64>() / cfg.n_subcarriers as f64;
    }
    let mean = acc / draws as f64;
    ensure((mean - 1.0).abs() < 0.03, format!("E|h|^2 = {mean:.4}"), format!("E|h|^2 = {mean:.4}"))
}

/// Runs every property and times each one.
pub fn run_selftest(opts: SelftestOptions) -> SelftestReport {
    let corrupt = opts.corrupt_backward;
    let props: Vec<(&'static str, Box<dyn Fn() -> Check>)> = vec![
        ("zadoff_chu_unit_modulus", Box::new(zc_unit_modulus)),
        ("zadoff_chu_zero_autocorrelation", Box::new(zc_autocorrelation)),
        ("reshape_bijection", Box::new(reshape_bijection)),
        ("compose_channel_bruteforce", Box::new(compose_bruteforce)),
        ("phase_sign_symmetry", Box::new(phase_symmetry)),
        ("channel_energy_normalization", Box::new(channel_energy)),
        ("noise_variance_calibration", Box::new(noise_calibration)),
        ("qpsk_awgn_ber_closed_form", Box::new(qpsk_awgn_ber)),
        ("ls_estimate_oracle", Box::new(ls_oracle)),
        ("perfect_csi_recovery", Box::new(perfect_csi_recovery)),
        ("grad_check", Box::new(move || {
            grad_check_arch(Arch::CeNet, corrupt)?;
            grad_check_arch(Arch::FusNet, corrupt).map(|s| format!("CE-Net and FUS-Net at N=2; {s}"))
        })),
        ("checkpoint_roundtrip", Box::new(checkpoint_roundtrip)),
        ("complexity_table_exact", Box::new(complexity_exact)),
        ("energy_identity", Box::new(energy_identity)),
    ];
    let results = props
        .into_iter()
        .map(|(name, f)| {
            let t = Instant::now();
            let out = f();
            let seconds = t.elapsed().as_secs_f64();
            match out {
                Ok(detail) => PropertyResult { name, passed: true, detail, seconds },
                Err(detail) => PropertyResult { name, passed: false, detail, seconds },
            }
        })
        .collect();
    SelftestReport { results }
}
