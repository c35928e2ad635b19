//! Shared fixtures for the benchmarks.

use alpf_core::{ClassHierarchy, Dataset, PartialLabel, SynthParams};

/// The 16-class synthetic benchmark dataset with a half-resolved label per example.
pub fn fixture(seed: u64) -> (Dataset, ClassHierarchy, Vec<PartialLabel>) {
    let (data, h) = alpf_core::datagen::gen_hierarchical_gaussians(&SynthParams::synth16(seed))
        .expect("valid preset");
    let labels = data
        .train_labels()
        .iter()
        .map(|&y| {
            let level = if y % 2 == 0 { 1 } else { 2 };
            PartialLabel::new(h.level_set(y, level).expect("leaf").clone()).expect("non-empty")
        })
        .collect();
    (data, h, labels)
}
