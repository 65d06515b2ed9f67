//! Fixtures shared by the pipeline benchmarks.

use fpcg_core::synth::{simulate_record, NoiseConfig, SimConfig, Simulation};
use fpcg_core::{AnnotationSet, Record};

/// A seeded 60 s record at 140 bpm, optionally with white noise.
pub fn record(seed: u64, snr_db: Option<f64>) -> Simulation {
    let noise = snr_db.map(NoiseConfig::white_at_snr).unwrap_or_default();
    simulate_record(
        &format!("bench{seed}"),
        &SimConfig {
            rng_seed: seed,
            noise,
            ..SimConfig::default()
        },
    )
    .expect("valid simulation config")
}

/// `n` clean records with their labels, for training.
pub fn dataset(n: u64) -> Vec<(Record, AnnotationSet)> {
    (0..n)
        .map(|s| {
            let sim = record(s, None);
            (sim.record, sim.annotations)
        })
        .collect()
}
