use serde::{Deserialize, Serialize};

use super::{label_by_timing, local_maxima, DetectionSet};
use crate::error::Result;
use crate::preprocess::spikes::median;
use crate::preprocess::{bandpass_record, moving_rms, Band};
use crate::signal::{Annotation, Record, SoundKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RmsConfig {
    pub highpass_hz: f64,
    pub filter_order: usize,
    pub window_s: f64,
    pub merge_gap_s: f64,
    /// Global threshold as a fraction of the `threshold_percentile` RMS value.
    pub threshold_frac: f64,
    pub threshold_percentile: f64,
    /// Lower bound on the threshold in multiples of the median RMS.
    pub noise_floor_mult: f64,
    /// Peaks below this fraction of the median peak height are dropped.
    pub amplitude_frac: f64,
    pub hr_range: (f64, f64),
    /// Largest relative shortening against the running median interval.
    pub regularity_tol: f64,
    pub regularity_len: usize,
}

impl Default for RmsConfig {
    fn default() -> Self {
        RmsConfig {
            highpass_hz: 35.0,
            filter_order: 4,
            window_s: 0.05,
            merge_gap_s: 0.05,
            threshold_frac: 0.3,
            threshold_percentile: 95.0,
            noise_floor_mult: 2.5,
            amplitude_frac: 0.3,
            hr_range: (100.0, 200.0),
            regularity_tol: 0.25,
            regularity_len: 8,
        }
    }
}

fn percentile(v: &[f64], p: f64) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let pos = p / 100.0 * (s.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 < s.len() {
        s[i] + frac * (s[i + 1] - s[i])
    } else {
        s[i]
    }
}

/// Merges peaks closer than `gap` samples, keeping the larger one of each
/// close pair (earlier on ties).
pub fn merge_close_peaks(peaks: &[(usize, f64)], gap: usize) -> Vec<(usize, f64)> {
    let mut out: Vec<(usize, f64)> = Vec::new();
    for &(i, v) in peaks {
        match out.last_mut() {
            Some(last) if i - last.0 < gap => {
                if v > last.1 {
                    *last = (i, v);
                }
            }
            _ => out.push((i, v)),
        }
    }
    out
}

/// Keeps beats whose spacing is plausible: a beat implying a rate above the
/// range, or an interval more than `tol` shorter than the running median, is
/// dropped. Gaps longer than the range allows are accepted (missed beats)
/// but do not enter the running median.
fn regular_beats(times: &[f64], cfg: &RmsConfig) -> Vec<f64> {
    let (lo, hi) = cfg.hr_range;
    let (min_iv, max_iv) = (60.0 / hi, 60.0 / lo);
    let mut kept: Vec<f64> = Vec::new();
    let mut history: Vec<f64> = Vec::new();
    for &t in times {
        let Some(&last) = kept.last() else {
            kept.push(t);
            continue;
        };
        let iv = t - last;
        if iv < min_iv {
            continue;
        }
        if iv <= max_iv {
            if history.len() >= 3 {
                let recent = &history[history.len().saturating_sub(cfg.regularity_len)..];
                let med = median(recent);
                if iv < (1.0 - cfg.regularity_tol) * med {
                    continue;
                }
            }
            history.push(iv);
        }
        kept.push(t);
    }
    kept
}

/// Local maxima of the moving RMS of the high-passed record above a global
/// threshold, cleaned by merging, amplitude and rhythm rules; S1 events only.
pub fn detect_rms_chen(rec: &Record, cfg: &RmsConfig) -> Result<DetectionSet> {
    let fs = rec.fs();
    let filtered = bandpass_record(rec, Band::Highpass(cfg.highpass_hz), cfg.filter_order)?;
    let w = ((cfg.window_s * fs).round() as usize).max(1);
    let env = moving_rms(filtered.samples(), w);
    let threshold = (cfg.threshold_frac * percentile(&env, cfg.threshold_percentile))
        .max(cfg.noise_floor_mult * median(&env));
    let peaks: Vec<(usize, f64)> = local_maxima(&env)
        .into_iter()
        .filter(|&i| env[i] > threshold && env[i] > 0.0)
        .map(|i| (i, env[i]))
        .collect();
    let gap = ((cfg.merge_gap_s * fs).round() as usize).max(1);
    let merged = merge_close_peaks(&peaks, gap);
    let med_height = if merged.is_empty() {
        0.0
    } else {
        median(&merged.iter().map(|p| p.1).collect::<Vec<_>>())
    };
    let times: Vec<f64> = merged
        .iter()
        .filter(|p| p.1 >= cfg.amplitude_frac * med_height)
        .map(|p| p.0 as f64 / fs)
        .collect();
    let s1: Vec<f64> = label_by_timing(&times)
        .into_iter()
        .filter(|a| a.kind == SoundKind::S1)
        .map(|a| a.t)
        .collect();
    let items = regular_beats(&s1, cfg)
        .into_iter()
        .map(|t| Annotation::new(t, SoundKind::S1))
        .collect();
    DetectionSet::new(rec.id(), "rms", items, Some(rec.duration()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::Source;
    use crate::synth::{simulate_record, SimConfig};
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn merge_keeps_larger() {
        let fs = 1000.0;
        let peaks = [(100, 1.0), (120, 0.6)];
        let gap = (0.05 * fs) as usize;
        assert_eq!(merge_close_peaks(&peaks, gap), vec![(100, 1.0)]);
        let peaks = [(100, 0.6), (120, 1.0), (400, 0.2)];
        assert_eq!(merge_close_peaks(&peaks, gap), vec![(120, 1.0), (400, 0.2)]);
    }

    #[test]
    fn clean_intervals_in_range() {
        let sim = simulate_record("c", &SimConfig { rng_seed: 2, ..SimConfig::default() }).unwrap();
        let det = detect_rms_chen(&sim.record, &RmsConfig::default()).unwrap();
        let t = det.times(SoundKind::S1);
        assert!(t.len() > 130, "{}", t.len());
        for w in t.windows(2) {
            let iv = w[1] - w[0];
            assert!((60.0 / 200.0..=60.0 / 100.0).contains(&iv), "interval {iv}");
        }
    }

    #[test]
    fn white_noise_is_quiet() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let x: Vec<f64> = (0..(60.0 * 333.0) as usize).map(|_| StandardNormal.sample(&mut rng)).collect();
        let r = Record::new("n", x, 333.0, Source::Synthetic).unwrap();
        let det = detect_rms_chen(&r, &RmsConfig::default()).unwrap();
        assert!(det.len() < 5, "{} detections", det.len());
    }

    #[test]
    fn percentile_interpolates() {
        assert_eq!(percentile(&[0.0, 10.0], 95.0), 9.5);
        assert_eq!(percentile(&[3.0], 50.0), 3.0);
    }
}
