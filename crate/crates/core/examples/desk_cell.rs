//! Trains one (λ, L) cell at desk scale and prints the evaluation table.
//!
//! `cargo run --release -p rispilot-core --example desk_cell -- [lambda] [L] [epochs_ce] [epochs_fus]`
//!
//! Environment overrides: `N_TRAIN`, `L2`, `K_DB`, `PDP_DECAY`, `G`.

use std::time::Instant;

use rispilot_core::pipeline::{default_snr_grid, evaluate_sweep, train_cell, Method, SweepCell, SystemConfig, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, d: &str| args.get(i).cloned().unwrap_or_else(|| d.to_string());
    let lambda: f64 = arg(0, "0.15").parse()?;
    let taps: usize = arg(1, "5").parse()?;
    let n_train = std::env::var("N_TRAIN").ok().map(|v| v.parse()).transpose()?.unwrap_or(20_000);
    let cfg = TrainConfig {
        n_train,
        l2: std::env::var("L2").ok().map(|v| v.parse()).transpose()?.unwrap_or(rispilot_core::models::DEFAULT_L2),
        epochs_ce: arg(2, "40").parse()?,
        epochs_fus: arg(3, "100").parse()?,
        ..TrainConfig::default()
    };
    let mut base = SystemConfig::default();
    if let Ok(v) = std::env::var("K_DB") {
        base.channel.rician_k_db = v.parse()?;
    }
    if let Ok(v) = std::env::var("PDP_DECAY") {
        base.channel.pdp_decay = v.parse()?;
    }
    if let Ok(v) = std::env::var("G") {
        base.channel.n_subsurfaces = v.parse()?;
    }
    let sys = base.with_cell(lambda, taps)?;

    let t = Instant::now();
    let trained = train_cell(&sys, &cfg)?;
    eprintln!("training: {:.1}s", t.elapsed().as_secs_f64());
    for (name, h) in [("ce", &trained.loss_ce), ("fus", &trained.loss_fus)] {
        let (a, b) = (h.initial().unwrap(), h.last().unwrap());
        eprintln!("{name}: val {:.4e} -> {:.4e}", a.val_loss, b.val_loss);
    }

    let t = Instant::now();
    let cell = SweepCell { lambda, n_taps: taps, models: Some(&trained.models) };
    let report = evaluate_sweep(&base, &[cell], &Method::ALL, &default_snr_grid(), 2000, cfg.seed, 1)?;
    eprintln!("sweep: {:.1}s", t.elapsed().as_secs_f64());
    for snr in default_snr_grid() {
        let g = |m| report.find(m, snr, lambda, taps).unwrap();
        println!(
            "{snr:>4} nmse ls {:.3e} mmse {:.3e} ce {:.3e} | ber mmse-sd {:.3e} ce-zf {:.3e} prop {:.3e}",
            g(Method::LsCe).nmse, g(Method::MmseCe).nmse, g(Method::CeNet).nmse,
            g(Method::MmseChain).ber, g(Method::CeNetZf).ber, g(Method::Proposed).ber
        );
    }
    Ok(())
}
