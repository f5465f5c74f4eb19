//! Shared fixtures for the benchmarks.

use rispilot_core::models::{CeNet, FusNet};
use rispilot_core::pipeline::CellModels;
use rispilot_core::rng::stream;

/// Seed-initialized networks. Inference costs the same as with trained weights.
pub fn untrained_models(n: usize, seed: u64) -> CellModels {
    let mut ce = CeNet::new(n, 1e-4, &mut stream(seed, 0)).expect("valid size");
    let mut fus = FusNet::new(n, 1e-4, &mut stream(seed, 1)).expect("valid size");
    ce.mark_trained();
    fus.mark_trained();
    CellModels { ce, fus }
}
