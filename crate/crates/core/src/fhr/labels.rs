use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::spikes::median;
use crate::signal::{window_grid, Annotation, FhrPoint, FhrSeries, SoundKind};

/// Analysis grid and plausibility range shared by all heart-rate estimators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FhrWindow {
    pub window_s: f64,
    pub overlap: f64,
    /// Accepted heart-rate range in bpm.
    pub hr_range: (f64, f64),
}

impl Default for FhrWindow {
    fn default() -> Self {
        FhrWindow {
            window_s: 10.0,
            overlap: 0.5,
            hr_range: (80.0, 210.0),
        }
    }
}

impl FhrWindow {
    pub fn validate(&self) -> Result<()> {
        if !(self.window_s > 0.0) {
            return Err(Error::config("window_s", "must be positive"));
        }
        if !(0.0..1.0).contains(&self.overlap) {
            return Err(Error::config("overlap", "must be in [0, 1)"));
        }
        let (lo, hi) = self.hr_range;
        if !(lo > 0.0 && hi > lo && hi < 400.0) {
            return Err(Error::config("hr_range", format!("({lo}, {hi}) is not an increasing range inside (0, 400)")));
        }
        Ok(())
    }

    pub fn grid(&self, duration: f64) -> Vec<(f64, f64)> {
        window_grid(duration, self.window_s, self.overlap)
    }

    pub fn hop_s(&self) -> f64 {
        self.window_s * (1.0 - self.overlap)
    }
}

/// Heart rate from S1 events: per window, 60 over the median of the
/// successive S1-S1 intervals that lie fully inside the window and imply a
/// rate within `hr_range`. Fewer than two such intervals give a gap.
pub fn fhr_from_labels(events: &[Annotation], duration: f64, cfg: &FhrWindow) -> Result<FhrSeries> {
    cfg.validate()?;
    let mut s1: Vec<f64> = events.iter().filter(|a| a.kind == SoundKind::S1).map(|a| a.t).collect();
    s1.sort_by(f64::total_cmp);
    let (lo, hi) = cfg.hr_range;
    let values = cfg
        .grid(duration)
        .into_iter()
        .map(|(start, end)| {
            let inside: Vec<f64> = s1.iter().copied().filter(|&t| t >= start && t <= end).collect();
            let valid: Vec<f64> = inside
                .windows(2)
                .map(|w| w[1] - w[0])
                .filter(|&iv| iv > 0.0 && (lo..=hi).contains(&(60.0 / iv)))
                .collect();
            let bpm = (valid.len() >= 2).then(|| 60.0 / median(&valid));
            FhrPoint {
                center_s: 0.5 * (start + end),
                bpm,
            }
        })
        .collect();
    FhrSeries::new(cfg.window_s, cfg.overlap, values)
}
