use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Annotation, AnnotationSet, FhrPoint, FhrSeries, Record, SoundKind, Source};
use crate::error::{Error, Result};

/// Sample encodings accepted by [`load_wav`] and produced by [`save_wav`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum WavEncoding {
    /// 8-bit unsigned PCM.
    Pcm8,
    #[default]
    Pcm16,
    Float32,
}

/// Reads a PCM WAV file. Multi-channel files contribute their first channel.
pub fn load_wav(path: impl AsRef<Path>) -> Result<Record> {
    let path = path.as_ref();
    let reader = hound::WavReader::open(path).map_err(|e| Error::file(path, e))?;
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    read_wav(reader, id, path)
}

fn read_wav<R: Read>(mut reader: hound::WavReader<R>, id: String, path: &Path) -> Result<Record> {
    let spec = reader.spec();
    let channels = spec.channels.max(1) as usize;
    let samples: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, 8) => reader
            .samples::<i8>()
            .step_by(channels)
            .map(|s| s.map(|v| v as f64 / 128.0))
            .collect::<std::result::Result<_, _>>(),
        (hound::SampleFormat::Int, 16) => reader
            .samples::<i16>()
            .step_by(channels)
            .map(|s| s.map(|v| v as f64 / 32768.0))
            .collect::<std::result::Result<_, _>>(),
        (hound::SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .step_by(channels)
            .map(|s| s.map(|v| v as f64))
            .collect::<std::result::Result<_, _>>(),
        (fmt, bits) => {
            return Err(Error::file(
                path,
                format!("unsupported encoding: {bits}-bit {fmt:?}"),
            ))
        }
    }
    .map_err(|e| Error::file(path, e))?;
    if samples.is_empty() {
        return Err(Error::file(path, "zero-length audio"));
    }
    Record::new(id, samples, spec.sample_rate as f64, Source::File)
}

/// Writes a mono WAV file. Samples must lie in [-1, 1].
pub fn save_wav(path: impl AsRef<Path>, rec: &Record, encoding: WavEncoding) -> Result<()> {
    let path = path.as_ref();
    let fs = rec.fs();
    if (fs - fs.round()).abs() > 1e-9 || fs < 1.0 || fs > u32::MAX as f64 {
        return Err(Error::input(format!("WAV needs an integer sample rate, got {fs}")));
    }
    if let Some(x) = rec.samples().iter().find(|x| x.abs() > 1.0) {
        return Err(Error::input(format!("sample {x} outside [-1, 1]; normalize before writing")));
    }
    let (bits, format) = match encoding {
        WavEncoding::Pcm8 => (8, hound::SampleFormat::Int),
        WavEncoding::Pcm16 => (16, hound::SampleFormat::Int),
        WavEncoding::Float32 => (32, hound::SampleFormat::Float),
    };
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: fs.round() as u32,
        bits_per_sample: bits,
        sample_format: format,
    };
    let map = |e: hound::Error| Error::file(path, e);
    let mut w = hound::WavWriter::create(path, spec).map_err(map)?;
    for &x in rec.samples() {
        match encoding {
            WavEncoding::Pcm8 => w
                .write_sample((x * 128.0).round().clamp(-128.0, 127.0) as i8)
                .map_err(map)?,
            WavEncoding::Pcm16 => w
                .write_sample((x * 32768.0).round().clamp(-32768.0, 32767.0) as i16)
                .map_err(map)?,
            WavEncoding::Float32 => w.write_sample(x as f32).map_err(map)?,
        }
    }
    w.finalize().map_err(map)
}

/// Parses annotation CSV text (`t_s,kind` header).
pub fn parse_annotations(record_id: &str, text: impl BufRead) -> Result<AnnotationSet> {
    AnnotationSet::new(record_id, parse_event_rows(text)?)
}

/// Parses `t_s,kind` rows without the label-set spacing rules (for detections).
pub fn parse_event_rows(text: impl BufRead) -> Result<Vec<Annotation>> {
    let mut items = Vec::new();
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, Ok(h))) if h.trim().trim_start_matches('\u{feff}') == "t_s,kind" => {}
        Some((_, Ok(h))) => return Err(Error::input(format!("expected header `t_s,kind`, got `{h}`"))),
        Some((_, Err(e))) => return Err(e.into()),
        None => return Err(Error::input("empty annotation file")),
    }
    for (lineno, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row = lineno + 1;
        let (t, kind) = line
            .split_once(',')
            .ok_or_else(|| Error::input(format!("malformed row {row}: `{line}`")))?;
        let t: f64 = t
            .trim()
            .parse()
            .map_err(|_| Error::input(format!("malformed row {row}: bad time `{t}`")))?;
        if t < 0.0 {
            return Err(Error::input(format!("negative time on row {row}")));
        }
        let kind: SoundKind = kind.parse()?;
        items.push(Annotation::new(t, kind));
    }
    Ok(items)
}

pub fn load_annotations(path: impl AsRef<Path>) -> Result<AnnotationSet> {
    let path = path.as_ref();
    let f = fs::File::open(path).map_err(|e| Error::file(path, e))?;
    let id = path
        .file_name()
        .map(|s| s.to_string_lossy())
        .and_then(|s| s.split('.').next().map(str::to_owned))
        .unwrap_or_default();
    parse_annotations(&id, BufReader::new(f)).map_err(|e| match e {
        Error::Input(msg) => Error::file(path, msg),
        other => other,
    })
}

/// Writes `t_s,kind` rows. Shared by annotation and detection files.
pub fn write_annotations(mut w: impl Write, items: &[Annotation]) -> Result<()> {
    writeln!(w, "t_s,kind")?;
    for a in items {
        writeln!(w, "{:.6},{}", a.t, a.kind)?;
    }
    Ok(())
}

pub fn save_annotations(path: impl AsRef<Path>, items: &[Annotation]) -> Result<()> {
    let mut buf = Vec::new();
    write_annotations(&mut buf, items)?;
    fs::write(path, buf)?;
    Ok(())
}

/// Writes `window_center_s,bpm`; gaps leave the bpm field empty.
pub fn save_fhr_csv(path: impl AsRef<Path>, series: &FhrSeries) -> Result<()> {
    let mut out = String::from("window_center_s,bpm\n");
    for p in series.values() {
        match p.bpm {
            Some(b) => out.push_str(&format!("{:.3},{:.4}\n", p.center_s, b)),
            None => out.push_str(&format!("{:.3},\n", p.center_s)),
        }
    }
    fs::write(path, out)?;
    Ok(())
}

/// Reads a heart-rate CSV written by [`save_fhr_csv`].
pub fn load_fhr_csv(path: impl AsRef<Path>, window_s: f64, overlap: f64) -> Result<FhrSeries> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("window_center_s,bpm") {
        return Err(Error::file(path, "expected header `window_center_s,bpm`"));
    }
    let mut values = Vec::new();
    for line in lines.filter(|l| !l.trim().is_empty()) {
        let (c, b) = line
            .split_once(',')
            .ok_or_else(|| Error::file(path, format!("malformed row `{line}`")))?;
        let center_s = c
            .trim()
            .parse()
            .map_err(|_| Error::file(path, format!("bad center `{c}`")))?;
        let bpm = match b.trim() {
            "" => None,
            s => Some(s.parse().map_err(|_| Error::file(path, format!("bad bpm `{s}`")))?),
        };
        values.push(FhrPoint { center_s, bpm });
    }
    FhrSeries::new(window_s, overlap, values)
}

/// One dataset entry. Relative paths are resolved against the manifest's
/// directory by [`load_manifest`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub wav: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotations: Option<PathBuf>,
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestEntry>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
    let mut entries: Vec<ManifestEntry> =
        serde_json::from_str(&text).map_err(|e| Error::file(path, e))?;
    let base = path.parent().unwrap_or_else(|| Path::new(""));
    for e in &mut entries {
        if e.wav.is_relative() {
            e.wav = base.join(&e.wav);
        }
        if let Some(a) = &mut e.annotations {
            if a.is_relative() {
                *a = base.join(&*a);
            }
        }
    }
    let mut seen = std::collections::HashSet::new();
    for e in &entries {
        if !seen.insert(e.id.as_str()) {
            return Err(Error::file(path, format!("duplicate record id `{}`", e.id)));
        }
    }
    Ok(entries)
}

pub fn save_manifest(path: impl AsRef<Path>, entries: &[ManifestEntry]) -> Result<()> {
    let text = serde_json::to_string_pretty(entries)?;
    fs::write(path, text + "\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn write_raw_wav(path: &Path, bits: u16, samples: &[i32]) {
        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: 1000,
            bits_per_sample: bits,
            sample_format: hound::SampleFormat::Int,
        };
        let mut w = hound::WavWriter::create(path, spec).unwrap();
        for &s in samples {
            match bits {
                8 => w.write_sample(s as i8).unwrap(),
                _ => w.write_sample(s as i16).unwrap(),
            }
        }
        w.finalize().unwrap();
    }

    #[test]
    fn sixteen_bit_half_scale() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.wav");
        write_raw_wav(&p, 16, &[16384, -16384]);
        let r = load_wav(&p).unwrap();
        assert_eq!(r.fs(), 1000.0);
        assert_eq!(r.samples(), &[0.5, -0.5]);
    }

    #[test]
    fn eight_bit_midpoint_is_zero() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("b.wav");
        // hound stores signed i8 as unsigned byte + 128, so 0 is the byte 128
        write_raw_wav(&p, 8, &[0; 20]);
        let bytes = fs::read(&p).unwrap();
        assert!(bytes[bytes.len() - 20..].iter().all(|&b| b == 128));
        let r = load_wav(&p).unwrap();
        assert!(r.samples().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn stereo_takes_first_channel() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.wav");
        let spec = hound::WavSpec {
            channels: 2,
            sample_rate: 500,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        let mut w = hound::WavWriter::create(&p, spec).unwrap();
        for _ in 0..4 {
            w.write_sample(8192i16).unwrap();
            w.write_sample(-32768i16).unwrap();
        }
        w.finalize().unwrap();
        let r = load_wav(&p).unwrap();
        assert_eq!(r.samples(), &[0.25; 4]);
    }

    #[test]
    fn rejects_unsupported_and_empty() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.wav");
        write_raw_wav(&p, 16, &[]);
        assert!(load_wav(&p).unwrap_err().to_string().contains("zero-length"));
        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: 500,
            bits_per_sample: 24,
            sample_format: hound::SampleFormat::Int,
        };
        let p24 = dir.path().join("c.wav");
        let mut w = hound::WavWriter::create(&p24, spec).unwrap();
        w.write_sample(1i32).unwrap();
        w.finalize().unwrap();
        assert!(load_wav(&p24).unwrap_err().to_string().contains("unsupported encoding"));
        assert!(load_wav(dir.path().join("missing.wav")).is_err());
    }

    #[test]
    fn annotation_parsing() {
        let ok = parse_annotations("r", Cursor::new("t_s,kind\n0.10,S1\n0.25,S2\n")).unwrap();
        let swapped = parse_annotations("r", Cursor::new("t_s,kind\n0.25,S2\n0.10,S1\n")).unwrap();
        assert_eq!(ok, swapped);
        assert_eq!(ok.len(), 2);
        let err = parse_annotations("r", Cursor::new("t_s,kind\n0.10,S3\n")).unwrap_err();
        assert!(err.to_string().contains("unknown kind"));
        assert!(parse_annotations("r", Cursor::new("t_s,kind\n-1,S1\n")).is_err());
        assert!(parse_annotations("r", Cursor::new("t_s,kind\nabc\n")).is_err());
        assert!(parse_annotations("r", Cursor::new("time,kind\n")).is_err());
    }

    #[test]
    fn fhr_csv_round_trip_with_gap() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.csv");
        let s = FhrSeries::new(
            10.0,
            0.5,
            vec![
                FhrPoint { center_s: 5.0, bpm: Some(140.25) },
                FhrPoint { center_s: 10.0, bpm: None },
            ],
        )
        .unwrap();
        save_fhr_csv(&p, &s).unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "window_center_s,bpm\n5.000,140.2500\n10.000,\n");
        assert_eq!(load_fhr_csv(&p, 10.0, 0.5).unwrap(), s);
    }

    #[test]
    fn manifest_resolves_relative_paths() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.json");
        fs::write(&p, r#"[{"id":"a","wav":"a.wav","annotations":"a.csv"},{"id":"b","wav":"/abs/b.wav"}]"#).unwrap();
        let m = load_manifest(&p).unwrap();
        assert_eq!(m[0].wav, dir.path().join("a.wav"));
        assert_eq!(m[0].annotations.as_deref(), Some(dir.path().join("a.csv").as_path()));
        assert_eq!(m[1].wav, PathBuf::from("/abs/b.wav"));
        assert!(m[1].annotations.is_none());
        fs::write(&p, r#"[{"id":"a","wav":"a.wav"},{"id":"a","wav":"b.wav"}]"#).unwrap();
        assert!(load_manifest(&p).is_err());
    }
}
