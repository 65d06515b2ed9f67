use std::io::Write;

use serde::{Deserialize, Serialize};

use super::matching::{check_tolerance, match_detections, MatchResult};
use crate::error::Result;

/// Precision, sensitivity and their harmonic mean; `None` marks an
/// undefined value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub ppv: Option<f64>,
    pub tpr: Option<f64>,
    pub f1: Option<f64>,
}

pub fn scores(m: &MatchResult) -> Scores {
    let ratio = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
    let ppv = ratio(m.tp, m.n_detections());
    let tpr = ratio(m.tp, m.n_labels());
    let f1 = match (ppv, tpr) {
        (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
        (None, None) => None,
        _ => Some(0.0),
    };
    Scores { ppv, tpr, f1 }
}

/// Mean and population SD of the matched offsets, in milliseconds.
pub fn mae(m: &MatchResult) -> Option<(f64, f64)> {
    let offsets: Vec<f64> = m.matched_pairs.iter().map(|(l, d)| 1e3 * (l - d).abs()).collect();
    mean_sd(&offsets)
}

pub(crate) fn mean_sd(v: &[f64]) -> Option<(f64, f64)> {
    if v.is_empty() {
        return None;
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    Some((mean, var.sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvtPoint {
    pub tolerance_s: f64,
    pub ppv: Option<f64>,
    pub f1: Option<f64>,
}

/// Summary of a Score-vs-Tolerance curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvtSummary {
    /// Highest F1 along the curve.
    pub plateau_f1: f64,
    /// Smallest tolerance reaching 90% of the plateau.
    pub rise_tolerance_s: Option<f64>,
}

/// Scores at each tolerance (ascending).
pub fn score_vs_tolerance(labels: &[f64], detections: &[f64], tolerances: &[f64]) -> Result<Vec<SvtPoint>> {
    tolerances
        .iter()
        .map(|&t| {
            check_tolerance(t)?;
            let s = scores(&match_detections(labels, detections, t)?);
            Ok(SvtPoint {
                tolerance_s: t,
                ppv: s.ppv,
                f1: s.f1,
            })
        })
        .collect()
}

/// 1 ms to `max_ms` in 1 ms steps.
pub fn default_tolerances(max_ms: usize) -> Vec<f64> {
    (1..=max_ms).map(|ms| ms as f64 / 1e3).collect()
}

pub fn summarize_curve(curve: &[SvtPoint]) -> SvtSummary {
    let plateau = curve.iter().filter_map(|p| p.f1).fold(0.0, f64::max);
    let rise = if plateau > 0.0 {
        curve
            .iter()
            .find(|p| p.f1.is_some_and(|f| f >= 0.9 * plateau))
            .map(|p| p.tolerance_s)
    } else {
        None
    };
    SvtSummary {
        plateau_f1: plateau,
        rise_tolerance_s: rise,
    }
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

/// Writes `tolerance_ms,ppv,f1`; undefined scores are empty cells.
pub fn write_curve_csv(mut w: impl Write, curve: &[SvtPoint]) -> Result<()> {
    writeln!(w, "tolerance_ms,ppv,f1")?;
    for p in curve {
        writeln!(w, "{},{},{}", format_ms(p.tolerance_s), cell(p.ppv), cell(p.f1))?;
    }
    Ok(())
}

fn format_ms(t: f64) -> String {
    let ms = t * 1e3;
    if (ms - ms.round()).abs() < 1e-9 {
        format!("{}", ms.round() as i64)
    } else {
        format!("{ms:.3}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::matching::tests::random_events;
    use proptest::prelude::*;
    use rand::SeedableRng;

    fn counts(tp: usize, fp: usize, fn_: usize) -> MatchResult {
        MatchResult {
            tolerance_s: 0.03,
            tp,
            fp,
            fn_,
            matched_pairs: Vec::new(),
        }
    }

    #[test]
    fn arithmetic() {
        let s = scores(&counts(97, 3, 3));
        assert!((s.ppv.unwrap() - 0.97).abs() < 1e-12);
        assert!((s.tpr.unwrap() - 0.97).abs() < 1e-12);
        assert!((s.f1.unwrap() - 0.97).abs() < 1e-12);
        let s = scores(&counts(0, 0, 5));
        assert_eq!(s.ppv, None);
        assert_eq!(s.tpr, Some(0.0));
        assert_eq!(s.f1, Some(0.0));
        // equal misses and false alarms of 2.5% give scores near 0.975
        let s = scores(&counts(975, 25, 25));
        assert!((s.f1.unwrap() - 0.975).abs() < 1e-12);
    }

    #[test]
    fn mean_absolute_error() {
        let mut m = counts(2, 0, 0);
        m.matched_pairs = vec![(1.0, 1.005), (2.0, 1.985)];
        let (mean, sd) = mae(&m).unwrap();
        assert!((mean - 10.0).abs() < 1e-9 && (sd - 5.0).abs() < 1e-9);
        m.matched_pairs = vec![(1.0, 1.01), (2.0, 2.01)];
        let (mean, sd) = mae(&m).unwrap();
        assert!((mean - 10.0).abs() < 1e-9 && sd.abs() < 1e-9);
        assert!(mae(&counts(0, 1, 1)).is_none());
    }

    #[test]
    fn mae_matches_recomputation() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let l = random_events(&mut rng, 8);
            let d = random_events(&mut rng, 8);
            let m = match_detections(&l, &d, 0.1).unwrap();
            if let Some((mean, sd)) = mae(&m) {
                let offs: Vec<f64> = m.matched_pairs.iter().map(|p| (p.0 - p.1).abs() * 1000.0).collect();
                let mu = offs.iter().sum::<f64>() / offs.len() as f64;
                let var = offs.iter().map(|o| (o - mu) * (o - mu)).sum::<f64>() / offs.len() as f64;
                assert!((mean - mu).abs() < 1e-9 && (sd - var.sqrt()).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn curve_shapes() {
        let l = [0.2, 0.6, 1.0];
        let c = score_vs_tolerance(&l, &l, &default_tolerances(100)).unwrap();
        assert_eq!(c.len(), 100);
        assert!(c.iter().all(|p| p.f1 == Some(1.0)));
        let d = [0.1, 0.9, 1.5, 1.7];
        let wide = score_vs_tolerance(&l, &d, &[10.0]).unwrap();
        assert!((wide[0].f1.unwrap() - 2.0 * 3.0 / 7.0).abs() < 1e-12);
        let s = summarize_curve(&c);
        assert_eq!(s.plateau_f1, 1.0);
        assert_eq!(s.rise_tolerance_s, Some(0.001));
        let mut buf = Vec::new();
        write_curve_csv(&mut buf, &c[..2]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "tolerance_ms,ppv,f1\n1,1.000000,1.000000\n2,1.000000,1.000000\n");
    }

    proptest! {
        #[test]
        fn f1_non_decreasing(seed in 0u64..10_000) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let l = random_events(&mut rng, 10);
            let d = random_events(&mut rng, 10);
            let c = score_vs_tolerance(&l, &d, &default_tolerances(100)).unwrap();
            for w in c.windows(2) {
                prop_assert!(w[1].f1.unwrap_or(0.0) >= w[0].f1.unwrap_or(0.0));
            }
        }
    }
}
