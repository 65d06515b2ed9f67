//! Heart-sound detectors and the HSMM segmenter.

pub mod crossval;
pub mod heuristic;
pub mod hsmm;
pub mod kfd;
pub mod rms;
pub mod teager;
pub mod timing;

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{parse_event_rows, sort_events, write_annotations, Annotation, SoundKind};

pub use crossval::{kfold_assignment, kfold_cross_validate, CrossValReport};
pub use heuristic::{detect_heuristic_balogh, HeuristicConfig};
pub use hsmm::{
    decode_hsmm, extended_viterbi, states_to_detections, train_hsmm, DecodeMode, DurationTable, EmissionKind,
    HsmmConfig, HsmmModel, State, StateSequence,
};
pub use kfd::{detect_kfd_peakpeel, katz_fd, KfdConfig};
pub use rms::{detect_rms_chen, RmsConfig};
pub use teager::{detect_teager_cesarelli, select_nearest, TeagerConfig};
pub use timing::label_by_timing;

/// Detected heart sounds of one record, sorted by time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionSet {
    record_id: String,
    method: String,
    items: Vec<Annotation>,
}

impl DetectionSet {
    /// Sorts `items`; with `duration` given, rejects events outside `[0, duration]`.
    pub fn new(
        record_id: impl Into<String>,
        method: impl Into<String>,
        mut items: Vec<Annotation>,
        duration: Option<f64>,
    ) -> Result<Self> {
        for a in &items {
            if !a.t.is_finite() || a.t < 0.0 {
                return Err(Error::input(format!("detection time {} is not a non-negative number", a.t)));
            }
            if let Some(d) = duration {
                if a.t > d + 1e-9 {
                    return Err(Error::input(format!("detection at {} s is beyond the record end {d} s", a.t)));
                }
            }
        }
        sort_events(&mut items);
        Ok(DetectionSet {
            record_id: record_id.into(),
            method: method.into(),
            items,
        })
    }

    pub fn record_id(&self) -> &str {
        &self.record_id
    }

    pub fn method(&self) -> &str {
        &self.method
    }

    pub fn items(&self) -> &[Annotation] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn times(&self, kind: SoundKind) -> Vec<f64> {
        self.items.iter().filter(|a| a.kind == kind).map(|a| a.t).collect()
    }

    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        write_annotations(w, &self.items)
    }

    pub fn read_csv(record_id: &str, method: &str, text: impl BufRead, duration: Option<f64>) -> Result<Self> {
        DetectionSet::new(record_id, method, parse_event_rows(text)?, duration)
    }

    pub fn load(path: impl AsRef<Path>, record_id: &str, method: &str, duration: Option<f64>) -> Result<Self> {
        let path = path.as_ref();
        let f = std::fs::File::open(path).map_err(|e| Error::file(path, e))?;
        Self::read_csv(record_id, method, std::io::BufReader::new(f), duration).map_err(|e| match e {
            Error::Input(msg) => Error::file(path, msg),
            other => other,
        })
    }
}

/// Indices of strict-left local maxima (`x[i-1] < x[i] >= x[i+1]`).
pub(crate) fn local_maxima(x: &[f64]) -> Vec<usize> {
    (1..x.len().saturating_sub(1))
        .filter(|&i| x[i] > x[i - 1] && x[i] >= x[i + 1])
        .collect()
}

/// Maximal runs of `true` as inclusive index ranges.
pub(crate) fn true_runs(mask: &[bool]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, &m) in mask.iter().enumerate() {
        match (m, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                out.push((s, i - 1));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((s, mask.len() - 1));
    }
    out
}

/// Joins runs separated by fewer than `gap` indices.
pub(crate) fn merge_runs(runs: &[(usize, usize)], gap: usize) -> Vec<(usize, usize)> {
    let mut out: Vec<(usize, usize)> = Vec::new();
    for &(s, e) in runs {
        match out.last_mut() {
            Some(last) if s - last.1 - 1 < gap => last.1 = e,
            _ => out.push((s, e)),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn detection_set_sorts_and_bounds() {
        let d = DetectionSet::new(
            "r",
            "m",
            vec![Annotation::new(0.5, SoundKind::S2), Annotation::new(0.1, SoundKind::S1)],
            Some(1.0),
        )
        .unwrap();
        assert_eq!(d.items()[0].t, 0.1);
        assert!(DetectionSet::new("r", "m", vec![Annotation::new(2.0, SoundKind::S1)], Some(1.0)).is_err());
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        let back = DetectionSet::read_csv("r", "m", buf.as_slice(), Some(1.0)).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn runs_and_merging() {
        let m = [false, true, true, false, false, true, false, true];
        assert_eq!(true_runs(&m), vec![(1, 2), (5, 5), (7, 7)]);
        assert_eq!(merge_runs(&true_runs(&m), 2), vec![(1, 2), (5, 7)]);
        assert_eq!(local_maxima(&[0.0, 1.0, 1.0, 0.0, 2.0, 0.0]), vec![1, 4]);
    }
}
