use rand::seq::SliceRandom;
use rayon::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::hsmm::{train_hsmm, HsmmConfig};
use super::DetectionSet;
use crate::error::{Error, Result};
use crate::eval::{evaluate_record, EvalReport, RecordReport};
use crate::fhr::{fhr_from_labels, FhrWindow};
use crate::signal::{AnnotationSet, Record};

/// Fold index of every record: records are shuffled with `seed` and dealt
/// round-robin into `k` folds.
pub fn kfold_assignment(n: usize, k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::config("k", "needs at least two folds"));
    }
    if n < k {
        return Err(Error::config("k", format!("{k} folds need at least {k} records, got {n}")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut fold = vec![0; n];
    for (pos, &rec) in order.iter().enumerate() {
        fold[rec] = pos % k;
    }
    Ok(fold)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossValReport {
    pub k: usize,
    pub seed: u64,
    /// Fold of each record, in dataset order.
    pub assignment: Vec<usize>,
    pub folds: Vec<EvalReport>,
    /// All held-out records scored together.
    pub aggregate: EvalReport,
    #[serde(skip)]
    pub detections: Vec<DetectionSet>,
}

/// Trains on `k - 1` folds and scores the held-out fold, for every fold.
/// Folds run in parallel; results do not depend on the thread count.
pub fn kfold_cross_validate(
    dataset: &[(Record, AnnotationSet)],
    k: usize,
    seed: u64,
    cfg: &HsmmConfig,
    tolerance_s: f64,
) -> Result<CrossValReport> {
    let assignment = kfold_assignment(dataset.len(), k, seed)?;
    let window = FhrWindow::default();
    let runs: Vec<Vec<(usize, RecordReport, DetectionSet)>> = (0..k)
        .into_par_iter()
        .map(|f| {
            let train: Vec<(Record, AnnotationSet)> = dataset
                .iter()
                .zip(&assignment)
                .filter(|(_, &a)| a != f)
                .map(|(d, _)| d.clone())
                .collect();
            let model = train_hsmm(&train, cfg)?;
            let mut out = Vec::new();
            for (i, (rec, ann)) in dataset.iter().enumerate().filter(|(i, _)| assignment[*i] == f) {
                let det = model.detect(rec)?;
                let est = fhr_from_labels(det.items(), rec.duration(), &window)?;
                let reference = fhr_from_labels(ann.items(), rec.duration(), &window)?;
                let r = evaluate_record(ann, &det, tolerance_s, Some((&est, &reference)))?;
                out.push((i, r, det));
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let mut detections: Vec<Option<DetectionSet>> = vec![None; dataset.len()];
    let mut by_record = vec![None; dataset.len()];
    let mut folds = Vec::with_capacity(k);
    for run in runs {
        let mut reports = Vec::with_capacity(run.len());
        for (i, r, det) in run {
            by_record[i] = Some(r.clone());
            reports.push(r);
            detections[i] = Some(det);
        }
        folds.push(EvalReport::new(cfg.method_name(), tolerance_s, reports)?);
    }
    let aggregate = EvalReport::new(
        cfg.method_name(),
        tolerance_s,
        by_record.into_iter().map(|r| r.expect("every record is tested once")).collect(),
    )?;
    Ok(CrossValReport {
        k,
        seed,
        assignment,
        folds,
        aggregate,
        detections: detections.into_iter().map(|d| d.expect("every record is tested once")).collect(),
    })
}
