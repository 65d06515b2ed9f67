use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::FhrWindow;
use crate::error::{Error, Result};
use crate::signal::{FhrPoint, FhrSeries, Record};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TangConfig {
    pub window: FhrWindow,
    /// Largest lag of the time-varying autocorrelation.
    pub max_lag_s: f64,
    /// Lag products are averaged over blocks of this length before the
    /// cyclic Fourier sum.
    pub block_s: f64,
    pub grid_step_bpm: f64,
}

impl Default for TangConfig {
    fn default() -> Self {
        TangConfig {
            window: FhrWindow::default(),
            max_lag_s: 0.05,
            block_s: 0.02,
            grid_step_bpm: 0.1,
        }
    }
}

/// Cyclic frequency spectrum `C(a) = sum over |tau| <= max_lag of |R^a(tau)|^2`,
/// where `R^a(tau)` is the Fourier coefficient at cyclic frequency `a` of
/// the lag product `x(t) x(t + tau)` over the segment.
pub fn cyclic_spectrum(x: &[f64], fs: f64, alphas_hz: &[f64], max_lag: usize, block: usize) -> Vec<f64> {
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n.max(1) as f64;
    let xc: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let block = block.max(1);
    let mut out = vec![0.0; alphas_hz.len()];
    for tau in 0..=max_lag.min(n.saturating_sub(1)) {
        let m = n - tau;
        let n_blocks = m / block;
        if n_blocks == 0 {
            break;
        }
        let q: Vec<f64> = (0..n_blocks)
            .map(|b| (b * block..(b + 1) * block).map(|t| xc[t] * xc[t + tau]).sum::<f64>() / block as f64)
            .collect();
        let t0 = 0.5 * (block - 1) as f64 / fs;
        let dt = block as f64 / fs;
        let weight = if tau == 0 { 1.0 } else { 2.0 };
        for (a, c) in alphas_hz.iter().zip(out.iter_mut()) {
            let step = Complex64::from_polar(1.0, -2.0 * PI * a * dt);
            let mut ph = Complex64::from_polar(1.0, -2.0 * PI * a * t0);
            let mut acc = Complex64::new(0.0, 0.0);
            for &v in &q {
                acc += ph * v;
                ph *= step;
            }
            let r = acc * (block as f64 / n as f64);
            *c += weight * r.norm_sqr();
        }
    }
    out
}

fn bpm_grid(range: (f64, f64), step: f64) -> Vec<f64> {
    let n = ((range.1 - range.0) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| range.0 + i as f64 * step).collect()
}

/// Heart rate in bpm of the strongest cyclic component within `range`, or
/// `None` for a flat segment.
pub fn dominant_rate_bpm(x: &[f64], fs: f64, range: (f64, f64), cfg: &TangConfig) -> Option<f64> {
    let grid = bpm_grid(range, cfg.grid_step_bpm);
    let alphas: Vec<f64> = grid.iter().map(|b| b / 60.0).collect();
    let max_lag = (cfg.max_lag_s * fs).round() as usize;
    let block = ((cfg.block_s * fs).round() as usize).max(1);
    let c = cyclic_spectrum(x, fs, &alphas, max_lag, block);
    let (mut best, mut arg) = (0.0, None);
    for (i, &v) in c.iter().enumerate() {
        if v > best {
            best = v;
            arg = Some(i);
        }
    }
    arg.map(|i| grid[i])
}

/// Cyclic-spectrum heart rate for every window of the analysis grid.
pub fn fhr_tang_cyclic(rec: &Record, cfg: &TangConfig) -> Result<FhrSeries> {
    let w = &cfg.window;
    w.validate()?;
    if !(cfg.grid_step_bpm > 0.0) || !(cfg.block_s > 0.0) || !(cfg.max_lag_s >= 0.0) {
        return Err(Error::config("grid_step_bpm", "step, block and lag must be positive"));
    }
    let min_window = 2.0 * 60.0 / w.hr_range.0;
    if w.window_s < min_window {
        return Err(Error::config(
            "window_s",
            format!("{} s holds fewer than two cycles at {} bpm", w.window_s, w.hr_range.0),
        ));
    }
    let fs = rec.fs();
    let x = rec.samples();
    let values = w
        .grid(rec.duration())
        .into_iter()
        .map(|(s, e)| {
            let lo = (s * fs).round() as usize;
            let hi = ((e * fs).round() as usize).min(x.len());
            FhrPoint {
                center_s: 0.5 * (s + e),
                bpm: dominant_rate_bpm(&x[lo..hi], fs, w.hr_range, cfg),
            }
        })
        .collect();
    FhrSeries::new(w.window_s, w.overlap, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::Source;
    use crate::synth::{simulate_record, SimConfig};

    #[test]
    fn impulse_train() {
        let fs = 333.0;
        let mut x = vec![0.0; (10.0 * fs) as usize];
        let mut t: f64 = 0.1;
        while t < 10.0 {
            x[(t * fs).round() as usize] = 1.0;
            t += 0.5;
        }
        let bpm = dominant_rate_bpm(&x, fs, (80.0, 210.0), &TangConfig::default()).unwrap();
        assert!((bpm - 120.0).abs() <= 0.6, "{bpm}");
    }

    #[test]
    fn clean_record_at_140() {
        let cfg = SimConfig {
            fhr_variability: 0.0,
            ..SimConfig::default()
        };
        let sim = simulate_record("t", &cfg).unwrap();
        let s = fhr_tang_cyclic(&sim.record, &TangConfig::default()).unwrap();
        assert!(s.same_grid(&sim.fhr));
        for p in s.values() {
            assert!((p.bpm.unwrap() - 140.0).abs() <= 2.0, "{:?}", p);
        }
    }

    #[test]
    fn short_window_rejected() {
        let r = Record::new("s", vec![0.0; 3330], 333.0, Source::Synthetic).unwrap();
        let cfg = TangConfig {
            window: FhrWindow {
                window_s: 1.0,
                ..FhrWindow::default()
            },
            ..TangConfig::default()
        };
        assert!(fhr_tang_cyclic(&r, &cfg).is_err());
        let flat = fhr_tang_cyclic(&r, &TangConfig::default()).unwrap();
        assert!(flat.values().iter().all(|p| p.bpm.is_none()));
    }
}
