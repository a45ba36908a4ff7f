//! Shared fixtures for the benchmarks.

use paramprobe::model::ActivationKind;
use paramprobe::{build_model, load_dataset, Batch, DatasetKind, DatasetSource, FlatParams, ModelSpec, Network, RngState};

/// Untrained tanh MLP `[2, hidden, hidden, 2]` with a two-moons training split.
pub fn mlp_fixture(hidden: usize, points: usize) -> (Network, FlatParams, Batch) {
    let data = load_dataset(&DatasetSource::synthetic(DatasetKind::TwoMoons, points, 7)).expect("synthetic data");
    let (net, params) = build_model(&ModelSpec::mlp(vec![2, hidden, hidden, 2], ActivationKind::Tanh, 7)).expect("spec");
    (net, params, data.train)
}

pub fn gaussian(len: usize, seed: u64) -> Vec<f64> {
    RngState::new(seed).gaussian_vec(len)
}
