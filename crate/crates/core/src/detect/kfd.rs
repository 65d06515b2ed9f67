use serde::{Deserialize, Serialize};

use super::{label_by_timing, merge_runs, true_runs, DetectionSet};
use crate::error::Result;
use crate::preprocess::wavelet::{pad_reflect, wavedec, waverec, DB4};
use crate::signal::Record;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KfdConfig {
    pub window_s: f64,
    pub hop_s: f64,
    /// Relative stopping tolerance of the peeling iteration.
    pub epsilon: f64,
    pub max_iter: usize,
    /// Deepest decomposition level considered.
    pub max_level: usize,
    /// Cumulative explained-energy ratio that fixes the deepest kept level.
    pub explained_energy: f64,
    /// Levels below this individual energy share are left out.
    pub min_share: f64,
    pub merge_gap_s: f64,
}

impl Default for KfdConfig {
    fn default() -> Self {
        KfdConfig {
            window_s: 0.05,
            hop_s: 0.01,
            epsilon: 1e-4,
            max_iter: 50,
            max_level: 5,
            explained_energy: 0.9,
            min_share: 0.05,
            merge_gap_s: 0.02,
        }
    }
}

/// Katz fractal dimension of the planar curve `(i, x_i)`:
/// `log10(L/a) / log10(d/a)` with `L` the path length, `a = L/(n-1)` the mean
/// step and `d` the largest distance from the first point. Windows shorter
/// than 3 points or without extent give 1.
pub fn katz_fd(x: &[f64]) -> f64 {
    let n = x.len();
    if n < 3 {
        return 1.0;
    }
    let len: f64 = x.windows(2).map(|w| (1.0 + (w[1] - w[0]).powi(2)).sqrt()).sum();
    let d = x
        .iter()
        .enumerate()
        .map(|(i, v)| ((i * i) as f64 + (v - x[0]).powi(2)).sqrt())
        .fold(0.0f64, f64::max);
    let a = len / (n - 1) as f64;
    let (num, den) = ((len / a).log10(), (d / a).log10());
    if !(len > 0.0) || !(den.abs() > 1e-15) {
        return 1.0;
    }
    num / den
}

/// Share of the total energy carried by each detail level (finest first).
pub fn detail_energy_shares(details: &[Vec<f64>], approx: &[f64]) -> Vec<f64> {
    let e = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>();
    let total = details.iter().map(|d| e(d)).sum::<f64>() + e(approx);
    details.iter().map(|d| if total > 0.0 { e(d) / total } else { 0.0 }).collect()
}

/// Levels kept for reconstruction: all levels up to the first one where the
/// cumulative share reaches `explained`, minus those below `min_share`.
pub fn select_levels(shares: &[f64], explained: f64, min_share: f64) -> Vec<usize> {
    let mut cum = 0.0;
    let mut last = shares.len();
    for (i, s) in shares.iter().enumerate() {
        cum += s;
        if cum >= explained {
            last = i + 1;
            break;
        }
    }
    (0..last).filter(|&i| shares[i] >= min_share).collect()
}

/// Sum of the selected db4 detail components, on the record's sample grid.
fn selected_details(x: &[f64], cfg: &KfdConfig) -> Result<Vec<f64>> {
    let mut level = cfg.max_level.max(1);
    while level > 1 && x.len() < (8 << level) {
        level -= 1;
    }
    let padded = pad_reflect(x, 1 << level);
    let (approx, details) = wavedec(&padded, &DB4, level)?;
    let keep = select_levels(&detail_energy_shares(&details, &approx), cfg.explained_energy, cfg.min_share);
    let zeroed: Vec<Vec<f64>> = details
        .iter()
        .enumerate()
        .map(|(i, d)| if keep.contains(&i) { d.clone() } else { vec![0.0; d.len()] })
        .collect();
    let mut y = waverec(&vec![0.0; approx.len()], &zeroed, &DB4);
    y.truncate(x.len());
    Ok(y)
}

/// Outcome of the peeling iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct Peeling {
    /// Final threshold signal: peeled values where a peak was removed, 1 elsewhere.
    pub threshold_signal: Vec<f64>,
    /// Mean squared change between successive intermediaries.
    pub differences: Vec<f64>,
    pub converged: bool,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len().max(1) as f64
}

/// Fractal-dimension peak peeling. Each round thresholds the current
/// intermediary at mean + SD; values of the FD sequence at or above it are
/// kept in the threshold signal and the rest set to one; the next
/// intermediary is `FD - threshold signal + mean(FD)`. Stops when the mean
/// squared change falls below `epsilon` relative to the intermediary energy.
pub fn peel(fd: &[f64], epsilon: f64, max_iter: usize) -> Peeling {
    let m = mean(fd);
    let mut inter = fd.to_vec();
    let mut s = vec![1.0; fd.len()];
    let mut differences = Vec::new();
    for _ in 0..max_iter {
        let mu = mean(&inter);
        let sd = (inter.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / inter.len().max(1) as f64).sqrt();
        let thr = mu + sd;
        s = fd.iter().map(|&f| if f >= thr { f } else { 1.0 }).collect();
        let next: Vec<f64> = fd.iter().zip(&s).map(|(f, t)| f - t + m).collect();
        let diff = mean(&next.iter().zip(&inter).map(|(a, b)| (a - b).powi(2)).collect::<Vec<_>>());
        let scale = mean(&inter.iter().map(|v| v * v).collect::<Vec<_>>()).max(f64::MIN_POSITIVE);
        differences.push(diff);
        inter = next;
        if diff < epsilon * scale {
            return Peeling {
                threshold_signal: s,
                differences,
                converged: true,
            };
        }
    }
    log::warn!("fractal-dimension peeling did not converge in {max_iter} iterations");
    Peeling {
        threshold_signal: s,
        differences,
        converged: false,
    }
}

/// FD sequence of windows centered every `hop_s` seconds.
pub fn fd_sequence(x: &[f64], fs: f64, window_s: f64, hop_s: f64) -> Vec<f64> {
    let w = ((window_s * fs).round() as usize).max(3);
    let n_frames = ((x.len() as f64 / fs) / hop_s).ceil() as usize;
    (0..n_frames)
        .map(|j| {
            let c = (j as f64 * hop_s * fs).round() as isize;
            let lo = (c - w as isize / 2).max(0) as usize;
            let hi = ((c + w as isize / 2 + 1) as usize).min(x.len());
            if hi > lo {
                katz_fd(&x[lo..hi])
            } else {
                1.0
            }
        })
        .collect()
}

/// Selected db4 details, sliding Katz FD, peak peeling, final mask at the
/// mean of the threshold signal; mask regions become events labeled by
/// spacing.
pub fn detect_kfd_peakpeel(rec: &Record, cfg: &KfdConfig) -> Result<DetectionSet> {
    let x = rec.samples();
    let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak == 0.0 {
        return DetectionSet::new(rec.id(), "kfd", Vec::new(), Some(rec.duration()));
    }
    let details = selected_details(x, cfg)?;
    let dpeak = details.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let norm: Vec<f64> = details.iter().map(|v| if dpeak > 0.0 { v / dpeak } else { 0.0 }).collect();
    let fd = fd_sequence(&norm, rec.fs(), cfg.window_s, cfg.hop_s);
    let peeled = peel(&fd, cfg.epsilon, cfg.max_iter);
    let cut = mean(&peeled.threshold_signal);
    let mask: Vec<bool> = peeled.threshold_signal.iter().map(|&v| v > cut && v > 1.0).collect();
    let gap = (cfg.merge_gap_s / cfg.hop_s).round() as usize;
    let centers: Vec<f64> = merge_runs(&true_runs(&mask), gap)
        .iter()
        .map(|&(s, e)| (0.5 * (s + e) as f64 * cfg.hop_s).min(rec.duration()))
        .collect();
    DetectionSet::new(rec.id(), "kfd", label_by_timing(&centers), Some(rec.duration()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{SoundKind, Source};
    use rand::{Rng, SeedableRng};

    fn katz_reference(x: &[f64]) -> f64 {
        let n = x.len();
        let mut l = 0.0;
        for i in 1..n {
            let dx = x[i] - x[i - 1];
            l += (1.0 + dx * dx).sqrt();
        }
        let mut d: f64 = 0.0;
        for (i, v) in x.iter().enumerate() {
            let dist = ((i as f64).powi(2) + (v - x[0]).powi(2)).sqrt();
            if dist > d {
                d = dist;
            }
        }
        let a = l / (n as f64 - 1.0);
        (l / a).log10() / (d / a).log10()
    }

    #[test]
    fn straight_lines_have_dimension_one() {
        for slope in [0.0, 0.5, -3.0, 100.0] {
            let x: Vec<f64> = (0..40).map(|i| slope * i as f64 + 2.0).collect();
            assert!((katz_fd(&x) - 1.0).abs() < 1e-9, "slope {slope}");
        }
        assert_eq!(katz_fd(&[1.0, 2.0]), 1.0);
    }

    #[test]
    fn random_walk_matches_reference() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for _ in 0..20 {
            let mut x = vec![0.0];
            for _ in 1..200 {
                let step: f64 = rng.random_range(-1.0..1.0);
                x.push(x.last().unwrap() + step);
            }
            assert_eq!(katz_fd(&x), katz_reference(&x));
            assert!(katz_fd(&x) >= 1.0);
        }
    }

    #[test]
    fn level_selection() {
        assert_eq!(select_levels(&[0.01, 0.6, 0.35, 0.03], 0.9, 0.05), vec![1, 2]);
        assert_eq!(select_levels(&[0.2, 0.2], 0.9, 0.05), vec![0, 1]);
    }

    #[test]
    fn peeling_terminates_with_shrinking_steps() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        let fd: Vec<f64> = (0..600)
            .map(|i| {
                let bump = if i % 43 < 5 { 0.4 } else if i % 43 > 14 && i % 43 < 18 { 0.25 } else { 0.0 };
                1.0 + bump + rng.random_range(0.0..0.02)
            })
            .collect();
        let p = peel(&fd, 1e-4, 50);
        assert!(p.differences.len() <= 50);
        assert!(p.converged);
        for w in p.differences[1.min(p.differences.len())..].windows(2) {
            assert!(w[1] <= w[0], "{:?}", p.differences);
        }
    }

    #[test]
    fn silence_gives_nothing() {
        let r = Record::new("k", vec![0.0; 3000], 333.0, Source::Synthetic).unwrap();
        assert!(detect_kfd_peakpeel(&r, &KfdConfig::default()).unwrap().is_empty());
    }

    #[test]
    fn clean_record_s1() {
        use crate::synth::{simulate_record, SimConfig};
        let sim = simulate_record("k", &SimConfig { rng_seed: 12, ..SimConfig::default() }).unwrap();
        let det = detect_kfd_peakpeel(&sim.record, &KfdConfig::default()).unwrap();
        let truth = sim.annotations.times(SoundKind::S1);
        let got = det.times(SoundKind::S1);
        let tp = truth.iter().filter(|&&t| got.iter().any(|&d| (d - t).abs() <= 0.03)).count() as f64;
        let f1 = 2.0 * tp / (truth.len() + got.len()) as f64;
        assert!(f1 >= 0.8, "F1 {f1} ({} detections, {} labels)", got.len(), truth.len());
    }
}
