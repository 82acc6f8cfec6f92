//! Shared fixtures for the benchmark targets.

use selval::dataset::LabeledDataset;
use selval::synth::{generate_calibrated, generate_impulse, ImpulseSpec};

/// A mixed-sharpness impulse dataset with many distinct confidences
/// after temperature distortion, sized for threshold-search benchmarks.
pub fn search_fixture(items: usize, seed: u64) -> LabeledDataset {
    let base = generate_calibrated(items, 10, 0.4, seed).unwrap();
    selval::synth::distort(&base, 0.8)
}

/// The stock two-impulse dataset.
pub fn impulse_fixture(items: usize, seed: u64) -> LabeledDataset {
    generate_impulse(&ImpulseSpec::m2(items, seed)).unwrap()
}
