//! Fixtures shared by the benchmarks.

use incident_featlab::datamodel::trim_head;
use incident_featlab::{generate_dataset, PreprocessConfig, SynthConfig, TrimmedDataset};

/// Default synthetic site with `n_units` units, trimmed with z = 12.
pub fn site(n_units: usize, seed: u64) -> TrimmedDataset {
    let cfg = SynthConfig {
        n_units,
        seed,
        ..Default::default()
    };
    let ds = generate_dataset(&cfg).expect("valid synth config");
    trim_head(&ds, &PreprocessConfig::default()).expect("units longer than z")
}
