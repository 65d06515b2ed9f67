use std::path::{Path, PathBuf};

use fpcg_core::detect::DetectionSet;
use fpcg_core::signal::{load_manifest, load_wav, parse_annotations, ManifestEntry};
use fpcg_core::{AnnotationSet, Error, Record, Result, Source};

pub struct Item {
    pub record: Record,
    pub annotations: Option<AnnotationSet>,
}

pub fn load_record(entry: &ManifestEntry) -> Result<Record> {
    let rec = load_wav(&entry.wav)?;
    let fs = rec.fs();
    Record::new(entry.id.clone(), rec.into_samples(), fs, Source::File)
}

pub fn load_labels(entry: &ManifestEntry) -> Result<Option<AnnotationSet>> {
    let Some(path) = &entry.annotations else {
        return Ok(None);
    };
    let f = std::fs::File::open(path).map_err(|e| Error::file(path, e))?;
    parse_annotations(&entry.id, std::io::BufReader::new(f))
        .map(Some)
        .map_err(|e| match e {
            Error::Input(msg) => Error::file(path, msg),
            other => other,
        })
}

pub fn load_item(entry: &ManifestEntry) -> Result<Item> {
    Ok(Item {
        record: load_record(entry)?,
        annotations: load_labels(entry)?,
    })
}

pub fn entries(manifest: &Path) -> Result<Vec<ManifestEntry>> {
    let e = load_manifest(manifest)?;
    if e.is_empty() {
        return Err(Error::file(manifest, "manifest lists no records"));
    }
    Ok(e)
}

/// Records with their labels; every entry must be annotated.
pub fn labelled(manifest: &Path) -> Result<Vec<(Record, AnnotationSet)>> {
    entries(manifest)?
        .iter()
        .map(|e| {
            let item = load_item(e)?;
            let labels = item
                .annotations
                .ok_or_else(|| Error::file(manifest, format!("record `{}` has no annotations", e.id)))?;
            Ok((item.record, labels))
        })
        .collect()
}

pub fn detections_path(dir: &Path, id: &str) -> PathBuf {
    dir.join(format!("{id}.detections.csv"))
}

pub fn load_detections(dir: &Path, rec: &Record, method: &str) -> Result<DetectionSet> {
    let path = detections_path(dir, rec.id());
    if !path.exists() {
        return Err(Error::file(&path, format!("no detections for record `{}`", rec.id())));
    }
    DetectionSet::load(&path, rec.id(), method, Some(rec.duration()))
}
