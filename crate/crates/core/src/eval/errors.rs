use serde::{Deserialize, Serialize};

use super::matching::{align, check_tolerance};
use crate::error::{Error, Result};
use crate::signal::Annotation;

/// Insertion, deletion and substitution rates relative to the label count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorRates {
    pub ins: f64,
    pub del: f64,
    pub sub: f64,
    pub sum: f64,
    pub n_ins: usize,
    pub n_del: usize,
    pub n_sub: usize,
    pub n_labels: usize,
}

impl ErrorRates {
    pub fn from_counts(n_ins: usize, n_del: usize, n_sub: usize, n_labels: usize) -> Result<Self> {
        if n_labels == 0 {
            return Err(Error::input("error rates need at least one label"));
        }
        let n = n_labels as f64;
        let (ins, del, sub) = (n_ins as f64 / n, n_del as f64 / n, n_sub as f64 / n);
        Ok(ErrorRates {
            ins,
            del,
            sub,
            sum: ins + del + sub,
            n_ins,
            n_del,
            n_sub,
            n_labels,
        })
    }
}

/// Labels and detections of both kinds are paired one-to-one within the
/// tolerance, preferring pairs of the same kind. A paired detection of the
/// other kind is a substitution, an unpaired label a deletion and an
/// unpaired detection an insertion.
pub fn error_rates(labels: &[Annotation], detections: &[Annotation], tolerance_s: f64) -> Result<ErrorRates> {
    check_tolerance(tolerance_s)?;
    if labels.is_empty() {
        return Err(Error::input("error rates need at least one label"));
    }
    let mut l = labels.to_vec();
    let mut d = detections.to_vec();
    l.sort_by(|a, b| a.t.total_cmp(&b.t));
    d.sort_by(|a, b| a.t.total_cmp(&b.t));
    let lt: Vec<f64> = l.iter().map(|a| a.t).collect();
    let dt: Vec<f64> = d.iter().map(|a| a.t).collect();
    let pairs = align(&lt, &dt, tolerance_s, |i, j| l[i].kind == d[j].kind);
    let n_sub = pairs.iter().filter(|&&(i, j)| l[i].kind != d[j].kind).count();
    ErrorRates::from_counts(d.len() - pairs.len(), l.len() - pairs.len(), n_sub, l.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::SoundKind;

    fn hundred() -> Vec<Annotation> {
        (0..100)
            .map(|i| {
                let kind = if i % 2 == 0 { SoundKind::S1 } else { SoundKind::S2 };
                let cycle = (i / 2) as f64 * 0.43;
                Annotation::new(0.2 + cycle + if kind == SoundKind::S2 { 0.15 } else { 0.0 }, kind)
            })
            .collect()
    }

    #[test]
    fn identity_is_error_free() {
        let l = hundred();
        let r = error_rates(&l, &l, 0.03).unwrap();
        assert_eq!((r.ins, r.del, r.sub, r.sum), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn single_perturbations() {
        let l = hundred();
        let mut added = l.clone();
        added.push(Annotation::new(30.0, SoundKind::S1));
        let r = error_rates(&l, &added, 0.03).unwrap();
        assert_eq!((r.ins, r.del, r.sub), (0.01, 0.0, 0.0));

        let mut removed = l.clone();
        removed.remove(37);
        let r = error_rates(&l, &removed, 0.03).unwrap();
        assert_eq!((r.ins, r.del, r.sub), (0.0, 0.01, 0.0));

        let mut flipped = l.clone();
        flipped[10].kind = SoundKind::S2;
        let r = error_rates(&l, &flipped, 0.03).unwrap();
        assert_eq!((r.ins, r.del, r.sub), (0.0, 0.0, 0.01));
        assert!((r.sum - (r.ins + r.del + r.sub)).abs() < 1e-12);
    }

    #[test]
    fn substitution_not_deletion() {
        let l = [Annotation::new(1.0, SoundKind::S1)];
        let d = [Annotation::new(1.01, SoundKind::S2)];
        let r = error_rates(&l, &d, 0.03).unwrap();
        assert_eq!((r.n_sub, r.n_del, r.n_ins), (1, 0, 0));
        assert!(error_rates(&[], &d, 0.03).is_err());
    }
}
