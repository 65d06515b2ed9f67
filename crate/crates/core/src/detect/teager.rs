use serde::{Deserialize, Serialize};

use super::{local_maxima, DetectionSet};
use crate::error::{Error, Result};
use crate::preprocess::{bandpass_record, moving_mean, teager_energy, Band};
use crate::signal::{Annotation, Record, SoundKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TeagerConfig {
    pub band: (f64, f64),
    pub filter_order: usize,
    /// Moving-average length applied to the Teager energy.
    pub smooth_s: f64,
    pub train_s: f64,
    /// Search half-width as a fraction of the running mean beat interval.
    pub window_frac: f64,
    /// Plausible rates used to find the training-phase beat interval.
    pub hr_range: (f64, f64),
    /// Number of recent beat energies behind the threshold.
    pub n_energies: usize,
    pub threshold_frac: f64,
}

impl Default for TeagerConfig {
    fn default() -> Self {
        TeagerConfig {
            band: (34.0, 54.0),
            filter_order: 4,
            smooth_s: 0.02,
            train_s: 5.0,
            window_frac: 0.25,
            hr_range: (80.0, 210.0),
            n_energies: 8,
            threshold_frac: 0.5,
        }
    }
}

/// Index of the candidate time nearest to `predicted` (earliest on ties).
pub fn select_nearest(candidates: &[f64], predicted: f64) -> Option<usize> {
    candidates
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - predicted).abs().total_cmp(&(b.1 - predicted).abs()).then(a.0.cmp(&b.0)))
        .map(|(i, _)| i)
}

/// Smoothed, non-negative Teager energy of the band-passed record.
fn energy(rec: &Record, cfg: &TeagerConfig) -> Result<Vec<f64>> {
    let filtered = bandpass_record(rec, Band::Bandpass(cfg.band.0, cfg.band.1), cfg.filter_order)?;
    let te = teager_energy(filtered.samples())?;
    let w = ((cfg.smooth_s * rec.fs()).round() as usize).max(1);
    Ok(moving_mean(&te, w).into_iter().map(|v| v.max(0.0)).collect())
}

/// Beat interval (in samples) maximizing the autocorrelation of `e` over
/// the lags allowed by `hr_range`.
fn dominant_interval(e: &[f64], fs: f64, hr_range: (f64, f64)) -> Option<usize> {
    let mean = e.iter().sum::<f64>() / e.len() as f64;
    let c: Vec<f64> = e.iter().map(|v| v - mean).collect();
    let lo = (60.0 / hr_range.1 * fs).floor().max(1.0) as usize;
    let hi = ((60.0 / hr_range.0 * fs).ceil() as usize).min(c.len().saturating_sub(1));
    let acf = |lag: usize| c.iter().zip(&c[lag..]).map(|(a, b)| a * b).sum::<f64>() / (c.len() - lag) as f64;
    (lo..=hi)
        .map(|lag| (lag, acf(lag)))
        .filter(|&(_, v)| v > 0.0)
        .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)))
        .map(|(lag, _)| lag)
}

/// Phase (in samples, within one interval) of the S1 in the profile obtained
/// by folding `e` with period `period`.
fn s1_phase(e: &[f64], period: usize) -> usize {
    let mut profile = vec![0.0; period];
    for (i, v) in e.iter().enumerate() {
        profile[i % period] += v;
    }
    let argmax = |skip: &dyn Fn(usize) -> bool| {
        (0..period)
            .filter(|&i| !skip(i))
            .max_by(|&a, &b| profile[a].total_cmp(&profile[b]).then(b.cmp(&a)))
    };
    let first = argmax(&|_| false).unwrap_or(0);
    let guard = (period as f64 * 0.15).ceil() as usize;
    let circ = |a: usize, b: usize| {
        let d = a.abs_diff(b);
        d.min(period - d)
    };
    let Some(second) = argmax(&|i| circ(i, first) <= guard) else {
        return first;
    };
    if profile[second] < 0.2 * profile[first] {
        return first;
    }
    // the S1 is the peak followed by the shorter (systolic) gap
    let forward = (second + period - first) % period;
    if forward <= period / 2 {
        first
    } else {
        second
    }
}

/// Beat tracker on band-passed Teager energy: a training phase fixes the
/// mean beat interval and an energy threshold, then each next S1 is searched
/// in a window around its predicted time and the above-threshold local
/// maximum nearest the prediction is taken.
pub fn detect_teager_cesarelli(rec: &Record, cfg: &TeagerConfig) -> Result<DetectionSet> {
    if rec.duration() < cfg.train_s {
        return Err(Error::input(format!(
            "record of {:.2} s is shorter than the {} s training phase",
            rec.duration(),
            cfg.train_s
        )));
    }
    let fs = rec.fs();
    let e = energy(rec, cfg)?;
    let n = e.len();
    let n_train = ((cfg.train_s * fs).round() as usize).min(n);
    let peaks = local_maxima(&e);
    let empty = || DetectionSet::new(rec.id(), "teager", Vec::new(), Some(rec.duration()));

    let Some(period) = dominant_interval(&e[..n_train], fs, cfg.hr_range) else {
        return empty();
    };
    let half = ((cfg.window_frac * period as f64).round() as usize).max(1);
    let best_peak = |center: f64, half: usize, floor: f64| -> Option<usize> {
        let lo = (center - half as f64).max(0.0);
        let hi = center + half as f64;
        let cand: Vec<usize> = peaks
            .iter()
            .copied()
            .filter(|&p| p as f64 >= lo && p as f64 <= hi && e[p] >= floor && e[p] > 0.0)
            .collect();
        let times: Vec<f64> = cand.iter().map(|&p| p as f64).collect();
        select_nearest(&times, center).map(|i| cand[i])
    };

    // training: one beat per period, anchored at the folded S1 phase
    let phase = s1_phase(&e[..n_train], period);
    let mut beats: Vec<usize> = Vec::new();
    let mut energies: Vec<f64> = Vec::new();
    let mut k = phase;
    while k < n_train {
        if let Some(p) = best_peak(k as f64, half, 0.0) {
            if beats.last().is_none_or(|&b| p > b) {
                beats.push(p);
                energies.push(e[p]);
            }
        }
        k += period;
    }
    if beats.is_empty() {
        return empty();
    }
    let mut intervals: Vec<f64> = beats.windows(2).map(|w| (w[1] - w[0]) as f64).filter(|&d| {
        (d - period as f64).abs() <= 0.5 * period as f64
    }).collect();
    if intervals.is_empty() {
        intervals.push(period as f64);
    }

    let tail_mean = |v: &[f64], m: usize| {
        let s = &v[v.len().saturating_sub(m)..];
        s.iter().sum::<f64>() / s.len() as f64
    };
    let mut avg = tail_mean(&intervals, cfg.n_energies);
    let mut threshold = cfg.threshold_frac * tail_mean(&energies, cfg.n_energies);
    let mut anchor = *beats.last().unwrap() as f64;
    let mut anchor_is_beat = true;
    loop {
        let predicted = anchor + avg;
        if predicted > (n - 1) as f64 + cfg.window_frac * avg {
            break;
        }
        let half = ((cfg.window_frac * avg).round() as usize).max(1);
        match best_peak(predicted, half, threshold) {
            Some(p) if p > *beats.last().unwrap() => {
                if anchor_is_beat {
                    intervals.push(p as f64 - anchor);
                    avg = tail_mean(&intervals, cfg.n_energies);
                }
                beats.push(p);
                energies.push(e[p]);
                threshold = cfg.threshold_frac * tail_mean(&energies, cfg.n_energies);
                anchor = p as f64;
                anchor_is_beat = true;
            }
            _ => {
                anchor = predicted;
                anchor_is_beat = false;
            }
        }
    }
    let items = beats
        .into_iter()
        .map(|p| Annotation::new(p as f64 / fs, SoundKind::S1))
        .collect();
    DetectionSet::new(rec.id(), "teager", items, Some(rec.duration()))
}
