use serde::{Deserialize, Serialize};

use super::{label_by_timing, merge_runs, true_runs, DetectionSet};
use crate::error::Result;
use crate::preprocess::moving_mean;
use crate::signal::Record;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HeuristicConfig {
    /// Window of the background (cycle-scale) intensity.
    pub long_window_s: f64,
    /// Window of the sound-scale intensity.
    pub short_window_s: f64,
    /// Regions keep contrast above this fraction of its maximum.
    pub rel_threshold: f64,
    pub merge_gap_s: f64,
}

impl Default for HeuristicConfig {
    fn default() -> Self {
        HeuristicConfig {
            long_window_s: 0.25,
            short_window_s: 0.05,
            rel_threshold: 0.05,
            merge_gap_s: 0.02,
        }
    }
}

/// Local intensity (moving mean of the squared signal) at a short window
/// minus the same at a long window; the positive part marks sounds that
/// stand out from their surroundings.
pub fn intensity_contrast(x: &[f64], fs: f64, cfg: &HeuristicConfig) -> Vec<f64> {
    let sq: Vec<f64> = x.iter().map(|v| v * v).collect();
    let short = moving_mean(&sq, ((cfg.short_window_s * fs).round() as usize).max(1));
    let long = moving_mean(&sq, ((cfg.long_window_s * fs).round() as usize).max(1));
    short.iter().zip(&long).map(|(s, l)| (s - l).max(0.0)).collect()
}

/// Windowed-sum intensity detector on the raw record; region centers become
/// events, labeled S1/S2 from their spacing.
pub fn detect_heuristic_balogh(rec: &Record, cfg: &HeuristicConfig) -> Result<DetectionSet> {
    let fs = rec.fs();
    let c = intensity_contrast(rec.samples(), fs, cfg);
    let peak = c.iter().fold(0.0f64, |m, &v| m.max(v));
    if peak <= 0.0 {
        return DetectionSet::new(rec.id(), "heuristic", Vec::new(), Some(rec.duration()));
    }
    let mask: Vec<bool> = c.iter().map(|&v| v > cfg.rel_threshold * peak).collect();
    let gap = (cfg.merge_gap_s * fs).round() as usize;
    let regions = merge_runs(&true_runs(&mask), gap);
    let centers: Vec<f64> = regions.iter().map(|&(s, e)| 0.5 * (s + e) as f64 / fs).collect();
    DetectionSet::new(rec.id(), "heuristic", label_by_timing(&centers), Some(rec.duration()))
}
