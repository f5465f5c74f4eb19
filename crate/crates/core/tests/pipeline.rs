use num_complex::Complex64;
use rispilot_core::channel::ChannelConfig;
use rispilot_core::estimators::equalize_and_cancel;
use rispilot_core::models::{Arch, CeNet, FusNet, Model};
use rispilot_core::neuralnet::{mse, Mlp};
use rispilot_core::pipeline::{
    draw_sample, evaluate_cell, evaluate_sweep, gen_ce_dataset, gen_fus_dataset, nmse, run_test_phase, train,
    train_cell, CellModels, ChannelSource, Method, Stage, SweepCell, SystemConfig, TrainConfig,
};
use rispilot_core::rng::stream;
use rispilot_core::waveform::{qpsk_demodulate, PowerSplit};
use rispilot_core::Error;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::function::erf::erfc;

fn small_sys(n: usize) -> SystemConfig {
    SystemConfig {
        channel: ChannelConfig { n_subcarriers: n, n_taps: 3, cp_length: 4, ..ChannelConfig::default() },
        ..SystemConfig::default()
    }
}

fn grid() -> Vec<f64> {
    (0..=6).map(|i| 3.0 * i as f64).collect()
}

/// A CE-Net passed through zero training epochs.
fn untrained_pair(n: usize, seed: u64) -> CellModels {
    let mut ce = CeNet::new(n, 1e-4, &mut stream(seed, 0)).unwrap();
    ce.mark_trained();
    let mut fus = FusNet::new(n, 1e-4, &mut stream(seed, 1)).unwrap();
    fus.mark_trained();
    CellModels { ce, fus }
}

#[test]
fn ce_dataset_shape() {
    let sys = small_sys(16);
    let d = gen_ce_dataset(&sys, &grid(), 10, 1, 1).unwrap();
    assert_eq!(d.inputs.dim(), (10, 32));
    assert_eq!(d.labels.dim(), (10, 32));
    assert_eq!(d.meta.len(), 10);
}

#[test]
fn noise_free_full_pilot_ls_is_exact() {
    let mut sys = small_sys(16);
    sys.split = PowerSplit::new(1.0, 1.0).unwrap();
    let d = gen_ce_dataset(&sys, &[f64::INFINITY], 50, 2, 1).unwrap();
    let diff = (&d.inputs - &d.labels).mapv(f64::abs).fold(0.0f64, |a, &b| a.max(b));
    assert!(diff < 1e-12, "max diff {diff}");
}

#[test]
fn mixed_snr_is_uniform_over_grid() {
    let sys = small_sys(8);
    let g = grid();
    let d = gen_ce_dataset(&sys, &g, 10_000, 3, 2).unwrap();
    let mut counts = [0usize; 7];
    for m in &d.meta {
        let i = g.iter().position(|&s| s == m.snr_db).expect("SNR on the grid");
        counts[i] += 1;
    }
    let expected = 10_000.0 / 7.0;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let critical = ChiSquared::new(6.0).unwrap().inverse_cdf(0.99);
    assert!(chi2 < critical, "chi2 {chi2} >= {critical}, counts {counts:?}");
}

#[test]
fn dataset_independent_of_worker_count() {
    let sys = small_sys(8);
    let a = gen_ce_dataset(&sys, &grid(), 300, 4, 1).unwrap();
    let b = gen_ce_dataset(&sys, &grid(), 300, 4, 3).unwrap();
    assert_eq!(a.inputs, b.inputs);
    assert_eq!(a.labels, b.labels);
}

#[test]
fn fus_dataset_shape_and_constellation() {
    let sys = small_sys(8);
    let pair = untrained_pair(8, 5);
    let d = gen_fus_dataset(&sys, ChannelSource::CeNet(&pair.ce), &grid(), 20, 6, 1).unwrap();
    assert_eq!(d.inputs.dim(), (20, 32));
    assert_eq!(d.labels.dim(), (20, 16));
    let a = std::f64::consts::FRAC_1_SQRT_2;
    assert!(d.labels.iter().all(|v| (v.abs() - a).abs() < 1e-15));
}

#[test]
fn fus_dataset_perfect_csi_cancellation_identity() {
    let sys = small_sys(8);
    let d = gen_fus_dataset(&sys, ChannelSource::Perfect, &[f64::INFINITY], 30, 7, 1).unwrap();
    let scale = sys.split.data_amplitude();
    for (inp, lab) in d.inputs.rows().into_iter().zip(d.labels.rows()) {
        for j in 0..16 {
            assert!((inp[j] - scale * lab[j]).abs() < 1e-12);
        }
    }
}

#[test]
fn fus_dataset_requires_trained_ce_net() {
    let sys = small_sys(8);
    let ce = CeNet::new(8, 1e-4, &mut stream(8, 0)).unwrap();
    let err = gen_fus_dataset(&sys, ChannelSource::CeNet(&ce), &grid(), 10, 9, 1).unwrap_err();
    assert!(matches!(err, Error::UntrainedCeNet));
}

#[test]
fn zero_epochs_leave_net_unchanged() {
    let sys = small_sys(8);
    let d = gen_ce_dataset(&sys, &grid(), 40, 10, 1).unwrap();
    let mut ce = CeNet::new(8, 1e-4, &mut stream(11, 0)).unwrap();
    let before = ce.clone();
    let h = train(ce.net_mut(), &d, &d, 0, 1e-3, 8, &mut stream(12, 0)).unwrap();
    assert_eq!(ce, before);
    assert_eq!(h.epochs.len(), 1);
}

#[test]
fn overfits_sixteen_samples() {
    let sys = small_sys(4);
    let d = gen_ce_dataset(&sys, &grid(), 16, 13, 1).unwrap();
    let mut ce = CeNet::new(4, 0.0, &mut stream(14, 0)).unwrap();
    // one full batch per epoch, so 2000 epochs are 2000 steps
    let h = train(ce.net_mut(), &d, &d, 2000, 1e-3, 16, &mut stream(15, 0)).unwrap();
    let pred = ce.net().infer(d.inputs.view()).unwrap();
    let err = mse(pred.view(), d.labels.view()).unwrap();
    assert!(err < 1e-3, "train MSE {err}, last epoch {:?}", h.last());
}

#[test]
fn loss_history_csv_layout() {
    let sys = small_sys(4);
    let d = gen_ce_dataset(&sys, &grid(), 32, 16, 1).unwrap();
    let mut ce = CeNet::new(4, 1e-4, &mut stream(17, 0)).unwrap();
    let h = train(ce.net_mut(), &d, &d, 3, 1e-3, 8, &mut stream(18, 0)).unwrap();
    let csv = h.to_csv();
    let lines: Vec<_> = csv.lines().collect();
    assert_eq!(lines[0], "epoch,train_loss,val_loss");
    assert_eq!(lines.len(), 5);
    assert!(lines[4].starts_with("3,"));
}

#[test]
fn divergence_is_reported() {
    let sys = small_sys(4);
    let mut d = gen_ce_dataset(&sys, &grid(), 16, 19, 1).unwrap();
    d.labels[[0, 0]] = f64::NAN;
    let mut ce = CeNet::new(4, 1e-4, &mut stream(20, 0)).unwrap();
    let err = train(ce.net_mut(), &d, &d, 1, 1e-3, 8, &mut stream(21, 0)).unwrap_err();
    assert!(matches!(err, Error::Diverged { .. }), "{err:?}");
}

#[test]
fn test_phase_stage_order() {
    let sys = small_sys(8);
    let pair = untrained_pair(8, 22);
    let pilot = sys.pilot().unwrap();
    let s = draw_sample(&sys, &pilot, 10.0, &mut stream(23, 0)).unwrap();
    let out = run_test_phase(&sys, &pair.ce, &pair.fus, &pilot, &s.frame.received).unwrap();
    assert_eq!(out.trace, Stage::ORDER.to_vec());
    assert_eq!(out.detected_bits.len(), 16);
}

#[test]
fn test_phase_rejects_mismatched_sizes() {
    let sys = small_sys(8);
    let pair = untrained_pair(4, 24);
    let pilot = sys.pilot().unwrap();
    let s = draw_sample(&sys, &pilot, 10.0, &mut stream(25, 0)).unwrap();
    assert!(run_test_phase(&sys, &pair.ce, &pair.fus, &pilot, &s.frame.received).is_err());
}

#[test]
fn zero_fus_net_gives_coin_flip_ber() {
    let n = 8;
    let sys = small_sys(n);
    let mut pair = untrained_pair(n, 26);
    let zero = Mlp::zeros(&Arch::FusNet.layer_specs(n), 1e-4).unwrap();
    let mut fus = FusNet(Model::from_net(Arch::FusNet, n, zero).unwrap());
    fus.mark_trained();
    pair.fus = fus;
    let pilot = sys.pilot().unwrap();
    let frames = 500;
    let mut errors = 0usize;
    let mut rng = stream(27, 0);
    for _ in 0..frames {
        let s = draw_sample(&sys, &pilot, 12.0, &mut rng).unwrap();
        let out = run_test_phase(&sys, &pair.ce, &pair.fus, &pilot, &s.frame.received).unwrap();
        assert!(out.s_fus.iter().all(|c| *c == Complex64::new(0.0, 0.0)));
        assert!(out.detected_bits.iter().all(|&b| b == 0));
        errors += out.detected_bits.iter().zip(&s.frame.data_bits).filter(|(a, b)| a != b).count();
    }
    let bits = (2 * n * frames) as f64;
    let ber = errors as f64 / bits;
    let sigma = (0.25 / bits).sqrt();
    assert!((ber - 0.5).abs() < 3.0 * sigma, "BER {ber}");
}

/// With the true channel, ZF plus cancellation leaves `√((1−λ)P)x_d + w/h`,
/// so bit `b` on subcarrier `k` errs with probability `Q(√((1−λ)P)|h_k|/σ)`.
#[test]
fn perfect_csi_ber_matches_closed_form() {
    let mut sys = small_sys(16);
    sys.channel.n_subsurfaces = 0;
    let pilot = sys.pilot().unwrap();
    let mut rng = stream(28, 0);
    let (mut errors, mut expected, mut variance) = (0usize, 0.0, 0.0);
    for _ in 0..4000 {
        let s = draw_sample(&sys, &pilot, 6.0, &mut rng).unwrap();
        let h = &s.channel.h_composite;
        let eq = equalize_and_cancel(&s.frame.received, h, &pilot, sys.split).unwrap();
        let bits = qpsk_demodulate(&eq.s_coarse);
        errors += bits.iter().zip(&s.frame.data_bits).filter(|(a, b)| a != b).count();
        for hk in h {
            let x = sys.split.data_amplitude() * hk.norm() / s.frame.noise_var.sqrt();
            let p = 0.5 * erfc(x / std::f64::consts::SQRT_2);
            expected += 2.0 * p;
            variance += 2.0 * p * (1.0 - p);
        }
    }
    let diff = (errors as f64 - expected).abs();
    assert!(diff < 3.0 * variance.sqrt(), "errors {errors}, expected {expected:.1} ± {:.1}", variance.sqrt());
}

#[test]
fn sweep_rows_are_well_formed_and_deterministic() {
    let base = small_sys(8);
    let pair = untrained_pair(8, 29);
    let cells = [
        SweepCell { lambda: 0.15, n_taps: 3, models: Some(&pair) },
        SweepCell { lambda: 0.2, n_taps: 2, models: Some(&pair) },
    ];
    let g = [0.0, 9.0];
    let a = evaluate_sweep(&base, &cells, &Method::ALL, &g, 20, 30, 1).unwrap();
    let b = evaluate_sweep(&base, &cells, &Method::ALL, &g, 20, 30, 3).unwrap();
    assert_eq!(a.to_csv(), b.to_csv());
    assert_eq!(a.rows.len(), 2 * 2 * 6);
    for r in &a.rows {
        assert!(r.nmse >= 0.0);
        assert!((0.0..=1.0).contains(&r.ber));
        assert_eq!(r.n_frames, 20);
    }
    let csv = a.to_csv();
    assert!(csv.starts_with("snr_db,lambda,L,method,nmse,ber,n_frames\n"));
    assert!(csv.contains(",MMSE-CE+MMSE-SD,"));
}

#[test]
fn ls_nmse_is_non_increasing_in_snr() {
    let sys = small_sys(16);
    let cov = rispilot_core::pipeline::calibrate_covariance(&sys, 2000, 31).unwrap();
    let g = grid();
    let frames = 2000;
    let rows = evaluate_cell(&sys, None, &cov, &[Method::LsCe], &g, frames, 32, 1).unwrap();
    // spread of the per-frame LS NMSE, from an independent sample
    let pilot = sys.pilot().unwrap();
    let mut rng = stream(33, 0);
    let sd: Vec<f64> = g
        .iter()
        .map(|&snr| {
            let v: Vec<f64> = (0..frames)
                .map(|_| {
                    let s = draw_sample(&sys, &pilot, snr, &mut rng).unwrap();
                    let ls = sys.ls_feature(&s.frame.received, &pilot).unwrap();
                    nmse(&ls.h_ls, &s.channel.h_composite).unwrap()
                })
                .collect();
            let m = v.iter().sum::<f64>() / frames as f64;
            (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (frames - 1) as f64).sqrt()
        })
        .collect();
    for i in 1..g.len() {
        let se = ((sd[i - 1].powi(2) + sd[i].powi(2)) / frames as f64).sqrt();
        assert!(
            rows[i].nmse <= rows[i - 1].nmse + 3.0 * se,
            "LS NMSE rose from {} to {} at {} dB",
            rows[i - 1].nmse,
            rows[i].nmse,
            g[i]
        );
    }
}

#[test]
fn tiny_pipeline_is_reproducible() {
    let sys = small_sys(4);
    let cfg = TrainConfig { n_train: 160, n_val: 40, batch: 16, epochs_ce: 2, epochs_fus: 2, seed: 34, ..TrainConfig::default() };
    let run = |workers| {
        let cfg = TrainConfig { workers, ..cfg.clone() };
        let t = train_cell(&sys, &cfg).unwrap();
        let cells = [SweepCell { lambda: 0.15, n_taps: 3, models: Some(&t.models) }];
        let r = evaluate_sweep(&sys, &cells, &Method::ALL, &[0.0, 18.0], 50, 34, workers).unwrap();
        (t.loss_ce.to_csv(), t.loss_fus.to_csv(), r.to_csv())
    };
    assert_eq!(run(1), run(2));
}

#[test]
fn train_config_validation() {
    assert!(TrainConfig::default().validate().is_ok());
    assert!(TrainConfig { batch: 0, ..TrainConfig::default() }.validate().is_err());
    assert!(TrainConfig { batch: 10, n_train: 5, ..TrainConfig::default() }.validate().is_err());
    assert!(TrainConfig { snr_grid_db: vec![], ..TrainConfig::default() }.validate().is_err());
    assert_eq!(TrainConfig::default().steps_per_epoch(), 250);
}
