//! Shared data model: sampled records, heart-sound annotations and
//! heart-rate series.

mod io;
pub(crate) mod resample;

pub use io::{
    load_annotations, load_fhr_csv, load_manifest, load_wav, parse_annotations, parse_event_rows, save_annotations,
    save_fhr_csv, save_manifest, save_wav, write_annotations, ManifestEntry, WavEncoding,
};
pub use resample::resample;

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Minimum spacing between two labels of the same kind (> 600 bpm).
pub const MIN_SAME_KIND_SPACING_S: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Synthetic,
    File,
}

/// A single-channel PCG recording.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    id: String,
    samples: Vec<f64>,
    fs: f64,
    source: Source,
}

impl Record {
    pub fn new(id: impl Into<String>, samples: Vec<f64>, fs: f64, source: Source) -> Result<Self> {
        if !(fs > 0.0) || !fs.is_finite() {
            return Err(Error::input(format!("sample rate must be positive, got {fs}")));
        }
        if samples.is_empty() {
            return Err(Error::input("record has no samples"));
        }
        if let Some(i) = samples.iter().position(|x| !x.is_finite()) {
            return Err(Error::input(format!("non-finite sample at index {i}")));
        }
        Ok(Record {
            id: id.into(),
            samples,
            fs,
            source,
        })
    }

    /// Same metadata, new samples (possibly at a new rate).
    pub fn with_samples(&self, samples: Vec<f64>, fs: f64) -> Result<Self> {
        Record::new(self.id.clone(), samples, fs, self.source)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn fs(&self) -> f64 {
        self.fs
    }

    pub fn source(&self) -> Source {
        self.source
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.fs
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SoundKind {
    S1,
    S2,
}

impl SoundKind {
    pub const ALL: [SoundKind; 2] = [SoundKind::S1, SoundKind::S2];

    pub fn as_str(self) -> &'static str {
        match self {
            SoundKind::S1 => "S1",
            SoundKind::S2 => "S2",
        }
    }
}

impl fmt::Display for SoundKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SoundKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "S1" => Ok(SoundKind::S1),
            "S2" => Ok(SoundKind::S2),
            other => Err(Error::input(format!("unknown kind `{other}`"))),
        }
    }
}

/// A time-stamped heart-sound event (label or detection).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub t: f64,
    pub kind: SoundKind,
}

impl Annotation {
    pub fn new(t: f64, kind: SoundKind) -> Self {
        Annotation { t, kind }
    }
}

/// Sorts events by time, then kind, so that equal inputs in any order give
/// identical outputs.
pub(crate) fn sort_events(items: &mut [Annotation]) {
    items.sort_by(|a, b| a.t.total_cmp(&b.t).then(a.kind.cmp(&b.kind)));
}

/// Manual S1/S2 labels of one record, sorted by time.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationSet {
    record_id: String,
    items: Vec<Annotation>,
}

impl AnnotationSet {
    pub fn new(record_id: impl Into<String>, mut items: Vec<Annotation>) -> Result<Self> {
        for a in &items {
            if !a.t.is_finite() {
                return Err(Error::input("annotation time is not finite"));
            }
            if a.t < 0.0 {
                return Err(Error::input(format!("negative annotation time {}", a.t)));
            }
        }
        sort_events(&mut items);
        for kind in SoundKind::ALL {
            let mut prev: Option<f64> = None;
            for a in items.iter().filter(|a| a.kind == kind) {
                if let Some(p) = prev {
                    // 1 us slack absorbs CSV rounding of labels placed exactly at the floor
                    if a.t - p < MIN_SAME_KIND_SPACING_S - 1e-6 {
                        return Err(Error::input(format!(
                            "{kind} labels at {p:.3} s and {:.3} s are closer than {MIN_SAME_KIND_SPACING_S} s",
                            a.t
                        )));
                    }
                }
                prev = Some(a.t);
            }
        }
        Ok(AnnotationSet {
            record_id: record_id.into(),
            items,
        })
    }

    pub fn record_id(&self) -> &str {
        &self.record_id
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

    /// Checks that every label lies within `[0, duration]`.
    pub fn check_bounds(&self, duration: f64) -> Result<()> {
        match self.items.iter().find(|a| a.t > duration) {
            Some(a) => Err(Error::input(format!(
                "label at {:.3} s is beyond the record end ({duration:.3} s)",
                a.t
            ))),
            None => Ok(()),
        }
    }
}

/// One heart-rate value; `bpm == None` marks a gap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FhrPoint {
    pub center_s: f64,
    pub bpm: Option<f64>,
}

/// Heart rate on a regular window grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FhrSeries {
    window_s: f64,
    overlap: f64,
    values: Vec<FhrPoint>,
}

impl FhrSeries {
    pub fn new(window_s: f64, overlap: f64, values: Vec<FhrPoint>) -> Result<Self> {
        if !(window_s > 0.0) {
            return Err(Error::config("window_s", "must be positive"));
        }
        if !(0.0..1.0).contains(&overlap) {
            return Err(Error::config("overlap", "must be in [0, 1)"));
        }
        let hop = window_s * (1.0 - overlap);
        for pair in values.windows(2) {
            let step = pair[1].center_s - pair[0].center_s;
            if (step - hop).abs() > 1e-6 * hop.max(1.0) {
                return Err(Error::input(format!(
                    "window centers {} and {} are not spaced by the hop {hop}",
                    pair[0].center_s, pair[1].center_s
                )));
            }
        }
        for p in &values {
            if let Some(b) = p.bpm {
                if !(b > 0.0 && b < 400.0) {
                    return Err(Error::input(format!("heart rate {b} bpm outside (0, 400)")));
                }
            }
        }
        Ok(FhrSeries {
            window_s,
            overlap,
            values,
        })
    }

    pub fn window_s(&self) -> f64 {
        self.window_s
    }

    pub fn overlap(&self) -> f64 {
        self.overlap
    }

    pub fn hop_s(&self) -> f64 {
        self.window_s * (1.0 - self.overlap)
    }

    pub fn values(&self) -> &[FhrPoint] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// True when both series sit on the same window grid.
    pub fn same_grid(&self, other: &FhrSeries) -> bool {
        self.values.len() == other.values.len()
            && (self.window_s - other.window_s).abs() < 1e-9
            && (self.overlap - other.overlap).abs() < 1e-9
            && self
                .values
                .iter()
                .zip(&other.values)
                .all(|(a, b)| (a.center_s - b.center_s).abs() < 1e-6)
    }
}

/// Start/end times of the analysis windows that fit inside `duration`.
pub fn window_grid(duration: f64, window_s: f64, overlap: f64) -> Vec<(f64, f64)> {
    let hop = window_s * (1.0 - overlap);
    let mut out = Vec::new();
    if !(hop > 0.0) {
        return out;
    }
    let mut j = 0usize;
    loop {
        let start = j as f64 * hop;
        let end = start + window_s;
        if end > duration + 1e-9 {
            break;
        }
        out.push((start, end));
        j += 1;
    }
    out
}
