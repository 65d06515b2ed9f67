use crate::signal::{Annotation, SoundKind};

/// Gaps longer than this cannot be a systole or diastole at any fetal rate.
const MAX_WITHIN_CYCLE_GAP_S: f64 = 0.75;
/// Centroid ratio below which the gap distribution counts as unimodal.
const MIN_CENTROID_RATIO: f64 = 1.2;

/// Two-means clustering of 1-D values; returns the (low, high) centroids of
/// the split of the sorted values with the least within-cluster sum of squares.
pub fn two_means(values: &[f64]) -> Option<(f64, f64)> {
    if values.len() < 2 {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let mut pre = vec![(0.0, 0.0); n + 1];
    for i in 0..n {
        pre[i + 1] = (pre[i].0 + v[i], pre[i].1 + v[i] * v[i]);
    }
    let ss = |a: usize, b: usize| {
        let (s, q) = (pre[b].0 - pre[a].0, pre[b].1 - pre[a].1);
        q - s * s / (b - a) as f64
    };
    let mut best = (f64::INFINITY, 1);
    for k in 1..n {
        let c = ss(0, k) + ss(k, n);
        if c < best.0 {
            best = (c, k);
        }
    }
    let k = best.1;
    let mean = |a: usize, b: usize| (pre[b].0 - pre[a].0) / (b - a) as f64;
    Some((mean(0, k), mean(k, n)))
}

/// Labels event times as S1 or S2 from their spacing alone, using the fact
/// that systole is shorter than diastole.
///
/// Within-cycle gaps are split into a short and a long cluster. An event
/// followed by a short gap is an S1, an event preceded by one is an S2, and
/// any other event is taken as S1. When the gaps do not separate into two
/// clusters every event is labeled S1.
pub fn label_by_timing(times: &[f64]) -> Vec<Annotation> {
    let mut t = times.to_vec();
    t.sort_by(f64::total_cmp);
    let gaps: Vec<f64> = t.windows(2).map(|w| w[1] - w[0]).collect();
    let within: Vec<f64> = gaps.iter().copied().filter(|&g| g < MAX_WITHIN_CYCLE_GAP_S).collect();
    let split = match two_means(&within) {
        Some((lo, hi)) if lo > 0.0 && hi / lo >= MIN_CENTROID_RATIO => Some(0.5 * (lo + hi)),
        _ => None,
    };
    let Some(split) = split else {
        return t.iter().map(|&x| Annotation::new(x, SoundKind::S1)).collect();
    };
    let short = |g: f64| g < split;
    (0..t.len())
        .map(|i| {
            let after = gaps.get(i).copied().is_some_and(short);
            let before = i > 0 && short(gaps[i - 1]);
            let kind = if after || !before { SoundKind::S1 } else { SoundKind::S2 };
            Annotation::new(t[i], kind)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alternating_gaps() {
        let mut times = vec![0.1];
        for i in 0..10 {
            let g = if i % 2 == 0 { 0.15 } else { 0.28 };
            times.push(times.last().unwrap() + g);
        }
        let l = label_by_timing(&times);
        for (i, a) in l.iter().enumerate() {
            let expect = if i % 2 == 0 { SoundKind::S1 } else { SoundKind::S2 };
            assert_eq!(a.kind, expect, "event {i}");
        }
    }

    #[test]
    fn regular_train_is_all_s1() {
        let times: Vec<f64> = (0..20).map(|i| i as f64 * 0.43).collect();
        assert!(label_by_timing(&times).iter().all(|a| a.kind == SoundKind::S1));
    }

    #[test]
    fn missing_s2_leaves_lonely_s1() {
        let mut times = Vec::new();
        for c in 0..10 {
            let t0 = c as f64 * 0.43;
            times.push(t0);
            if c != 4 {
                times.push(t0 + 0.15);
            }
        }
        let l = label_by_timing(&times);
        let lonely = l.iter().position(|a| (a.t - 4.0 * 0.43).abs() < 1e-9).unwrap();
        assert_eq!(l[lonely].kind, SoundKind::S1);
        assert_eq!(l[lonely + 1].kind, SoundKind::S1);
        assert_eq!(l[lonely + 2].kind, SoundKind::S2);
        assert_eq!(l.iter().filter(|a| a.kind == SoundKind::S2).count(), 9);
    }

    #[test]
    fn clusters() {
        let (lo, hi) = two_means(&[0.1, 0.12, 0.3, 0.31, 0.11]).unwrap();
        assert!((lo - 0.11).abs() < 1e-12);
        assert!((hi - 0.305).abs() < 1e-12);
        assert!(two_means(&[1.0]).is_none());
    }
}
