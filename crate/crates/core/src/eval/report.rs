use serde::{Deserialize, Serialize};

use super::errors::{error_rates, ErrorRates};
use super::fhr_error::{aggregate_fhr_stats, fhr_mse, FhrErrorStats};
use super::matching::{match_detections, MatchResult};
use super::scores::{mae, mean_sd, scores};
use crate::detect::DetectionSet;
use crate::error::Result;
use crate::signal::{AnnotationSet, FhrSeries, SoundKind};

pub const SCHEMA_VERSION: u32 = 1;
pub const TOLERANCE_CONVENTION: &str = "a detection matches a label when |label - detection| <= tolerance (interval of +/- tolerance)";
pub const SD_CONVENTION: &str = "population (divide by n)";

/// Scores of one sound kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KindReport {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub ppv: Option<f64>,
    pub tpr: Option<f64>,
    pub f1: Option<f64>,
    pub mae_ms: Option<f64>,
    pub mae_sd_ms: Option<f64>,
    #[serde(skip)]
    offsets_ms: Vec<f64>,
}

impl KindReport {
    pub fn from_match(m: &MatchResult) -> Self {
        let s = scores(m);
        let e = mae(m);
        KindReport {
            tp: m.tp,
            fp: m.fp,
            fn_: m.fn_,
            ppv: s.ppv,
            tpr: s.tpr,
            f1: s.f1,
            mae_ms: e.map(|x| x.0),
            mae_sd_ms: e.map(|x| x.1),
            offsets_ms: m.matched_pairs.iter().map(|(l, d)| 1e3 * (l - d).abs()).collect(),
        }
    }

    /// Pools counts and matched offsets.
    pub fn pooled<'a>(parts: impl IntoIterator<Item = &'a KindReport>) -> Self {
        let mut m = MatchResult {
            tolerance_s: 0.0,
            tp: 0,
            fp: 0,
            fn_: 0,
            matched_pairs: Vec::new(),
        };
        let mut offsets = Vec::new();
        for p in parts {
            m.tp += p.tp;
            m.fp += p.fp;
            m.fn_ += p.fn_;
            offsets.extend_from_slice(&p.offsets_ms);
        }
        let s = scores(&m);
        let e = mean_sd(&offsets);
        KindReport {
            tp: m.tp,
            fp: m.fp,
            fn_: m.fn_,
            ppv: s.ppv,
            tpr: s.tpr,
            f1: s.f1,
            mae_ms: e.map(|x| x.0),
            mae_sd_ms: e.map(|x| x.1),
            offsets_ms: offsets,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordReport {
    pub record_id: String,
    pub s1: KindReport,
    pub s2: KindReport,
    pub error_rates: ErrorRates,
    pub fhr_mse: Option<f64>,
}

/// Scores one record; `fhr` is `(estimate, reference)`.
pub fn evaluate_record(
    labels: &AnnotationSet,
    det: &DetectionSet,
    tolerance_s: f64,
    fhr: Option<(&FhrSeries, &FhrSeries)>,
) -> Result<RecordReport> {
    let kind = |k| -> Result<KindReport> {
        Ok(KindReport::from_match(&match_detections(&labels.times(k), &det.times(k), tolerance_s)?))
    };
    Ok(RecordReport {
        record_id: labels.record_id().to_string(),
        s1: kind(SoundKind::S1)?,
        s2: kind(SoundKind::S2)?,
        error_rates: error_rates(labels.items(), det.items(), tolerance_s)?,
        fhr_mse: match fhr {
            Some((est, reference)) => fhr_mse(est, reference)?,
            None => None,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    /// Scores from counts summed over records.
    pub s1: KindReport,
    pub s2: KindReport,
    pub error_rates: ErrorRates,
    pub fhr_mse: Option<FhrErrorStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema_version: u32,
    pub method: String,
    pub tolerance_ms: f64,
    pub tolerance_convention: String,
    pub sd_convention: String,
    pub records: Vec<RecordReport>,
    pub aggregate: AggregateReport,
}

impl EvalReport {
    pub fn new(method: &str, tolerance_s: f64, records: Vec<RecordReport>) -> Result<Self> {
        let s1 = KindReport::pooled(records.iter().map(|r| &r.s1));
        let s2 = KindReport::pooled(records.iter().map(|r| &r.s2));
        let sum = |f: fn(&ErrorRates) -> usize| records.iter().map(|r| f(&r.error_rates)).sum::<usize>();
        let error_rates = ErrorRates::from_counts(sum(|e| e.n_ins), sum(|e| e.n_del), sum(|e| e.n_sub), sum(|e| e.n_labels))?;
        let mses: Vec<f64> = records.iter().filter_map(|r| r.fhr_mse).collect();
        let fhr_mse = if mses.is_empty() { None } else { Some(aggregate_fhr_stats(&mses)?) };
        Ok(EvalReport {
            schema_version: SCHEMA_VERSION,
            method: method.to_string(),
            tolerance_ms: tolerance_s * 1e3,
            tolerance_convention: TOLERANCE_CONVENTION.into(),
            sd_convention: SD_CONVENTION.into(),
            records,
            aggregate: AggregateReport {
                s1,
                s2,
                error_rates,
                fhr_mse,
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fhr::{fhr_from_labels, FhrWindow};
    use crate::synth::{simulate_record, SimConfig};

    #[test]
    fn identity_pipeline_is_perfect() {
        let sim = simulate_record("id", &SimConfig::default()).unwrap();
        let det = DetectionSet::new("id", "copy", sim.annotations.items().to_vec(), None).unwrap();
        let w = FhrWindow::default();
        let est = fhr_from_labels(det.items(), sim.record.duration(), &w).unwrap();
        let r = evaluate_record(&sim.annotations, &det, 0.03, Some((&est, &sim.fhr))).unwrap();
        assert_eq!(r.s1.f1, Some(1.0));
        assert_eq!(r.s2.f1, Some(1.0));
        assert_eq!(r.error_rates.sum, 0.0);
        assert_eq!(r.fhr_mse, Some(0.0));
        let rep = EvalReport::new("copy", 0.03, vec![r.clone(), r]).unwrap();
        assert_eq!(rep.aggregate.s1.tp, 2 * sim.annotations.times(SoundKind::S1).len());
        assert_eq!(rep.tolerance_ms, 30.0);
        assert_eq!(rep.aggregate.fhr_mse.unwrap().mean, 0.0);
    }
}
