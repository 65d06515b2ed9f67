use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::FhrSeries;

/// Mean squared difference over windows where both series have a value;
/// `None` when no window has both.
pub fn fhr_mse(est: &FhrSeries, reference: &FhrSeries) -> Result<Option<f64>> {
    if !est.same_grid(reference) {
        return Err(Error::input("heart-rate series are on different window grids"));
    }
    let sq: Vec<f64> = est
        .values()
        .iter()
        .zip(reference.values())
        .filter_map(|(a, b)| Some((a.bpm? - b.bpm?).powi(2)))
        .collect();
    Ok((!sq.is_empty()).then(|| sq.iter().sum::<f64>() / sq.len() as f64))
}

/// Quantile with linear interpolation between order statistics at
/// position `q * (n - 1)`.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FhrErrorStats {
    pub values: Vec<f64>,
    pub mean: f64,
    /// Population SD.
    pub sd: f64,
    pub min: f64,
    pub max: f64,
    pub q1: f64,
    pub q3: f64,
    pub iqr: f64,
}

pub fn aggregate_fhr_stats(mse: &[f64]) -> Result<FhrErrorStats> {
    if mse.is_empty() {
        return Err(Error::input("no heart-rate errors to aggregate"));
    }
    if mse.iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::input("squared errors must be non-negative"));
    }
    let mut s = mse.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let mean = s.iter().sum::<f64>() / n;
    let sd = (s.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    let (q1, q3) = (quantile(&s, 0.25), quantile(&s, 0.75));
    Ok(FhrErrorStats {
        values: mse.to_vec(),
        mean,
        sd,
        min: s[0],
        max: s[s.len() - 1],
        q1,
        q3,
        iqr: q3 - q1,
    })
}
