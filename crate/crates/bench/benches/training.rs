use criterion::{criterion_group, criterion_main, Criterion};
use ndarray::Array2;
use rand::Rng;
use rispilot_bench::untrained_models;
use rispilot_core::pipeline::{default_snr_grid, gen_ce_dataset, SystemConfig};
use rispilot_core::rng::stream;
use std::hint::black_box;

fn forward_backward(c: &mut Criterion) {
    let models = untrained_models(32, 4);
    let net = models.ce.net();
    let mut rng = stream(5, 0);
    let x = Array2::from_shape_fn((80, 64), |_| rng.random_range(-1.0..1.0));
    let y = Array2::from_shape_fn((80, 64), |_| rng.random_range(-1.0..1.0));
    c.bench_function("ce_net_forward_backward_batch80", |b| {
        b.iter(|| {
            let (cache, _) = net.forward_train_frozen(black_box(x.view())).unwrap();
            net.backward(&cache, y.view()).unwrap()
        })
    });
    c.bench_function("ce_net_infer_batch80", |b| b.iter(|| net.infer(black_box(x.view())).unwrap()));
}

fn dataset(c: &mut Criterion) {
    let sys = SystemConfig::default();
    let grid = default_snr_grid();
    c.bench_function("ce_dataset_1000", |b| b.iter(|| gen_ce_dataset(&sys, &grid, 1000, 6, 1).unwrap()));
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(20);
    targets = forward_backward, dataset
}
criterion_main!(benches);
