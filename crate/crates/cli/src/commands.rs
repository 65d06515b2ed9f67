use std::path::Path;

use fpcg_core::detect::{
    detect_heuristic_balogh, detect_kfd_peakpeel, detect_rms_chen, detect_teager_cesarelli, kfold_cross_validate,
    train_hsmm, DetectionSet, HeuristicConfig, HsmmConfig, HsmmModel, KfdConfig, RmsConfig, TeagerConfig,
};
use fpcg_core::eval::{
    evaluate_record, fhr_mse, aggregate_fhr_stats, match_detections, summarize_curve, write_curve_csv, EvalReport,
    SvtPoint,
};
use fpcg_core::fhr::{fhr_from_labels, fhr_tang_cyclic, fhr_zahorian, FhrWindow, TangConfig, ZahorianConfig};
use fpcg_core::signal::{save_fhr_csv, save_wav, write_annotations, ManifestEntry, WavEncoding};
use fpcg_core::synth::{rel_amp_for_snr, simulate_record, SimConfig};
use fpcg_core::{Error, FhrSeries, Record, Result, SoundKind};
use log::info;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::cli::{
    Command, ConfigArgs, CrossvalArgs, DetectArgs, EvaluateArgs, FhrArgs, FhrMethod, Method, SimulateArgs, TrainArgs,
};
use crate::config::resolve;
use crate::dataset::{self, detections_path};
use crate::output::{ensure_dir, relative_to, write_atomic, write_bytes, write_json, RunManifest, RUN_MANIFEST};

const PATH_KEYS: [&str; 6] = ["manifest", "detections", "model", "train_manifest", "config", "out"];

pub fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Simulate(a) => simulate(&a),
        Command::Detect(a) => detect(&a),
        Command::Train(a) => train(&a),
        Command::Evaluate(a) => evaluate(&a),
        Command::Crossval(a) => crossval(&a),
        Command::Fhr(a) => fhr(&a),
    }
}

/// Command options with paths rewritten relative to the output directory.
fn options(args: &impl Serialize, out_dir: &Path) -> Result<Value> {
    fn walk(v: &mut Value, out_dir: &Path) {
        if let Value::Object(map) = v {
            for (k, item) in map.iter_mut() {
                match item {
                    Value::String(s) if PATH_KEYS.contains(&k.as_str()) => {
                        *s = if k == "out" { ".".into() } else { relative_to(Path::new(s.as_str()), out_dir) };
                    }
                    other => walk(other, out_dir),
                }
            }
        }
    }
    let mut v = serde_json::to_value(args)?;
    walk(&mut v, out_dir);
    Ok(v)
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::config("jobs", e.to_string()))
}

/// Maps `f` over `items` on `jobs` threads, keeping input order.
fn par_map<T: Sync, R: Send>(jobs: usize, items: &[T], f: impl Fn(&T) -> Result<R> + Sync + Send) -> Result<Vec<R>> {
    pool(jobs)?.install(|| items.par_iter().map(f).collect())
}

fn simulate(a: &SimulateArgs) -> Result<()> {
    if a.count == 0 {
        return Err(Error::config("count", "must be at least 1"));
    }
    let mut overrides = a.cfg.set.clone();
    if let Some(s) = a.seed {
        overrides.push(("rng_seed".into(), json!(s)));
    }
    if let Some(d) = a.duration {
        overrides.push(("duration_s".into(), json!(d)));
    }
    if let Some(f) = a.base_fhr {
        overrides.push(("base_fhr".into(), json!(f)));
    }
    if let Some(snr) = a.snr {
        overrides.push(("noise.white.enabled".into(), json!(true)));
        overrides.push(("noise.white.rel_amp".into(), json!(rel_amp_for_snr(snr))));
    }
    let cfg = resolve(&SimConfig::default(), a.cfg.config.as_deref(), &overrides)?;
    cfg.validate()?;
    ensure_dir(&a.out)?;
    let width = a.count.saturating_sub(1).to_string().len().max(3);
    let indices: Vec<usize> = (0..a.count).collect();
    let entries = par_map(a.jobs, &indices, |&i| {
        let id = format!("{}_{i:0width$}", a.prefix);
        let c = SimConfig {
            rng_seed: cfg.rng_seed.wrapping_add(i as u64),
            ..cfg.clone()
        };
        write_simulation(&a.out, &id, &c)
    })?;
    write_json(&a.out.join("manifest.json"), &entries)?;
    let mut outputs = vec!["manifest.json".to_string()];
    for e in &entries {
        for ext in ["wav", "annotations.csv", "fhr.csv", "meta.json"] {
            outputs.push(format!("{}.{ext}", e.id));
        }
    }
    RunManifest::new("simulate")
        .options(options(a, &a.out)?)
        .config(&cfg)?
        .write(&a.out, outputs)
}

fn write_simulation(dir: &Path, id: &str, cfg: &SimConfig) -> Result<ManifestEntry> {
    let sim = simulate_record(id, cfg)?;
    let peak = sim.record.samples().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let gain = if peak > 0.0 { 0.99 / peak } else { 1.0 };
    let scaled = sim
        .record
        .with_samples(sim.record.samples().iter().map(|v| v * gain).collect(), sim.record.fs())?;
    let wav = format!("{id}.wav");
    let ann = format!("{id}.annotations.csv");
    write_atomic(&dir.join(&wav), |p| save_wav(p, &scaled, WavEncoding::Float32))?;
    let mut buf = Vec::new();
    write_annotations(&mut buf, sim.annotations.items())?;
    write_bytes(&dir.join(&ann), &buf)?;
    write_atomic(&dir.join(format!("{id}.fhr.csv")), |p| save_fhr_csv(p, &sim.fhr))?;
    write_json(
        &dir.join(format!("{id}.meta.json")),
        &json!({
            "id": id,
            "wav_gain": gain,
            "n_samples": scaled.len(),
            "fs": scaled.fs(),
            "stats": sim.meta,
            "config": cfg,
        }),
    )?;
    info!("simulated {id}");
    Ok(ManifestEntry {
        id: id.to_string(),
        wav: wav.into(),
        annotations: Some(ann.into()),
    })
}

enum Detector {
    Teager(TeagerConfig),
    Rms(RmsConfig),
    Heuristic(HeuristicConfig),
    Kfd(KfdConfig),
    Hsmm(Box<HsmmModel>),
}

impl Detector {
    fn detect(&self, rec: &Record) -> Result<DetectionSet> {
        match self {
            Detector::Teager(c) => detect_teager_cesarelli(rec, c),
            Detector::Rms(c) => detect_rms_chen(rec, c),
            Detector::Heuristic(c) => detect_heuristic_balogh(rec, c),
            Detector::Kfd(c) => detect_kfd_peakpeel(rec, c),
            Detector::Hsmm(m) => m.detect(rec),
        }
    }

    fn config(&self) -> Result<Value> {
        Ok(match self {
            Detector::Teager(c) => serde_json::to_value(c)?,
            Detector::Rms(c) => serde_json::to_value(c)?,
            Detector::Heuristic(c) => serde_json::to_value(c)?,
            Detector::Kfd(c) => serde_json::to_value(c)?,
            Detector::Hsmm(m) => serde_json::to_value(&m.config)?,
        })
    }
}

fn hsmm_config(method: Method, preset: Option<&str>, cfg: &ConfigArgs) -> Result<HsmmConfig> {
    let base = HsmmConfig::preset(preset.unwrap_or(method.default_preset()))?;
    let c = resolve(&base, cfg.config.as_deref(), &cfg.set)?;
    c.validate()?;
    if c.method_name() != method.name() {
        return Err(Error::config(
            "emission",
            format!("configuration describes `{}`, not `{}`", c.method_name(), method.name()),
        ));
    }
    Ok(c)
}

fn build_detector(a: &DetectArgs) -> Result<Detector> {
    let simple = a.model.is_none() && a.train_manifest.is_none() && a.preset.is_none();
    match a.method {
        Method::Teager | Method::Rms | Method::Heuristic | Method::Kfd if !simple => Err(Error::config(
            "method",
            format!("`{}` takes no model, training manifest or preset", a.method.name()),
        )),
        Method::Teager => Ok(Detector::Teager(resolve(&TeagerConfig::default(), a.cfg.config.as_deref(), &a.cfg.set)?)),
        Method::Rms => Ok(Detector::Rms(resolve(&RmsConfig::default(), a.cfg.config.as_deref(), &a.cfg.set)?)),
        Method::Heuristic => Ok(Detector::Heuristic(resolve(
            &HeuristicConfig::default(),
            a.cfg.config.as_deref(),
            &a.cfg.set,
        )?)),
        Method::Kfd => Ok(Detector::Kfd(resolve(&KfdConfig::default(), a.cfg.config.as_deref(), &a.cfg.set)?)),
        Method::Hsmm | Method::LrHsmm => match (&a.model, &a.train_manifest) {
            (Some(_), Some(_)) => Err(Error::config("model", "give either --model or --train-manifest")),
            (Some(path), None) => {
                if a.cfg.config.is_some() || !a.cfg.set.is_empty() || a.preset.is_some() {
                    return Err(Error::config("model", "a trained model fixes its configuration"));
                }
                let m = HsmmModel::load(path)?;
                if m.config.method_name() != a.method.name() {
                    return Err(Error::config(
                        "model",
                        format!("model is `{}`, not `{}`", m.config.method_name(), a.method.name()),
                    ));
                }
                Ok(Detector::Hsmm(Box::new(m)))
            }
            (None, Some(train)) => {
                let cfg = hsmm_config(a.method, a.preset.as_deref(), &a.cfg)?;
                Ok(Detector::Hsmm(Box::new(train_hsmm(&dataset::labelled(train)?, &cfg)?)))
            }
            (None, None) => Err(Error::config(
                "model",
                format!("`{}` needs --model or --train-manifest", a.method.name()),
            )),
        },
    }
}

fn detect(a: &DetectArgs) -> Result<()> {
    let detector = build_detector(a)?;
    let entries = dataset::entries(&a.manifest)?;
    ensure_dir(&a.out)?;
    let outputs = par_map(a.jobs, &entries, |e| {
        let rec = dataset::load_record(e)?;
        let det = detector.detect(&rec)?;
        let path = detections_path(&a.out, &e.id);
        let mut buf = Vec::new();
        det.write_csv(&mut buf)?;
        write_bytes(&path, &buf)?;
        info!("{}: {} detections", e.id, det.len());
        Ok(format!("{}.detections.csv", e.id))
    })?;
    let mut run = RunManifest::new("detect")
        .input("manifest", &a.manifest, &a.out)
        .options(options(a, &a.out)?)
        .config(&json!({ "method": a.method.name(), "detector": detector.config()? }))?;
    if let Some(m) = &a.model {
        run = run.input("model", m, &a.out);
    }
    if let Some(t) = &a.train_manifest {
        run = run.input("train_manifest", t, &a.out);
    }
    run.write(&a.out, outputs)
}

fn train(a: &TrainArgs) -> Result<()> {
    if !a.method.is_trainable() {
        return Err(Error::config("method", format!("`{}` is not trainable", a.method.name())));
    }
    let cfg = hsmm_config(a.method, a.preset.as_deref(), &a.cfg)?;
    let model = train_hsmm(&dataset::labelled(&a.manifest)?, &cfg)?;
    ensure_dir(&a.out)?;
    let mut text = model.to_json()?;
    text.push('\n');
    write_bytes(&a.out.join("model.json"), text.as_bytes())?;
    RunManifest::new("train")
        .input("manifest", &a.manifest, &a.out)
        .options(options(a, &a.out)?)
        .config(&cfg)?
        .write(&a.out, vec!["model.json".into()])
}

fn method_from_run(dir: &Path) -> Option<String> {
    let text = std::fs::read_to_string(dir.join(RUN_MANIFEST)).ok()?;
    let v: Value = serde_json::from_str(&text).ok()?;
    v["config"]["method"].as_str().map(str::to_string)
}

/// Score-vs-Tolerance with counts pooled over records.
fn pooled_curve(pairs: &[(Vec<f64>, Vec<f64>)], tolerances: &[f64]) -> Result<Vec<SvtPoint>> {
    tolerances
        .iter()
        .map(|&tol| {
            let (mut tp, mut n_l, mut n_d) = (0, 0, 0);
            for (l, d) in pairs {
                let m = match_detections(l, d, tol)?;
                tp += m.tp;
                n_l += m.n_labels();
                n_d += m.n_detections();
            }
            let ppv = (n_d > 0).then(|| tp as f64 / n_d as f64);
            let f1 = (n_l + n_d > 0).then(|| 2.0 * tp as f64 / (n_l + n_d) as f64);
            Ok(SvtPoint {
                tolerance_s: tol,
                ppv,
                f1,
            })
        })
        .collect()
}

fn evaluate(a: &EvaluateArgs) -> Result<()> {
    if !(a.tolerance_ms > 0.0) {
        return Err(Error::config("tolerance_ms", "must be positive"));
    }
    let method = a
        .method
        .clone()
        .or_else(|| method_from_run(&a.detections))
        .unwrap_or_else(|| "unknown".into());
    let tol = a.tolerance_ms / 1e3;
    let window = FhrWindow::default();
    let entries = dataset::entries(&a.manifest)?;
    let scored = par_map(a.jobs, &entries, |e| {
        let item = dataset::load_item(e)?;
        let labels = item
            .annotations
            .ok_or_else(|| Error::file(&a.manifest, format!("record `{}` has no annotations", e.id)))?;
        let det = dataset::load_detections(&a.detections, &item.record, &method)?;
        let dur = item.record.duration();
        let est = fhr_from_labels(det.items(), dur, &window)?;
        let reference = fhr_from_labels(labels.items(), dur, &window)?;
        let report = evaluate_record(&labels, &det, tol, Some((&est, &reference)))?;
        Ok((report, labels, det))
    })?;
    ensure_dir(&a.out)?;
    let mut outputs = vec!["report.json".to_string()];
    if a.sweep {
        if a.sweep_max_ms == 0 {
            return Err(Error::config("sweep_max_ms", "must be at least 1"));
        }
        let tolerances = fpcg_core::eval::default_tolerances(a.sweep_max_ms);
        let mut summaries = serde_json::Map::new();
        for kind in SoundKind::ALL {
            let pairs: Vec<(Vec<f64>, Vec<f64>)> =
                scored.iter().map(|(_, l, d)| (l.times(kind), d.times(kind))).collect();
            let curve = pooled_curve(&pairs, &tolerances)?;
            let name = format!("svt_{}.csv", kind.as_str());
            let mut buf = Vec::new();
            write_curve_csv(&mut buf, &curve)?;
            write_bytes(&a.out.join(&name), &buf)?;
            summaries.insert(kind.as_str().into(), serde_json::to_value(summarize_curve(&curve))?);
            outputs.push(name);
        }
        write_json(&a.out.join("svt_summary.json"), &summaries)?;
        outputs.push("svt_summary.json".into());
    }
    let report = EvalReport::new(&method, tol, scored.into_iter().map(|(r, _, _)| r).collect())?;
    write_json(&a.out.join("report.json"), &report)?;
    RunManifest::new("evaluate")
        .input("manifest", &a.manifest, &a.out)
        .input("detections", &a.detections, &a.out)
        .options(options(a, &a.out)?)
        .config(&json!({ "method": method, "tolerance_ms": a.tolerance_ms, "fhr_window": window }))?
        .write(&a.out, outputs)
}

fn crossval(a: &CrossvalArgs) -> Result<()> {
    if !a.method.is_trainable() {
        return Err(Error::config("method", format!("`{}` is not trainable", a.method.name())));
    }
    if !(a.tolerance_ms > 0.0) {
        return Err(Error::config("tolerance_ms", "must be positive"));
    }
    let cfg = hsmm_config(a.method, a.preset.as_deref(), &a.cfg)?;
    let data = dataset::labelled(&a.manifest)?;
    let report = kfold_cross_validate(&data, a.k, a.seed, &cfg, a.tolerance_ms / 1e3)?;
    let det_dir = a.out.join("detections");
    ensure_dir(&det_dir)?;
    let mut outputs = vec!["crossval.json".to_string()];
    for det in &report.detections {
        let mut buf = Vec::new();
        det.write_csv(&mut buf)?;
        write_bytes(&detections_path(&det_dir, det.record_id()), &buf)?;
        outputs.push(format!("detections/{}.detections.csv", det.record_id()));
    }
    write_json(&a.out.join("crossval.json"), &report)?;
    RunManifest::new("crossval")
        .input("manifest", &a.manifest, &a.out)
        .options(options(a, &a.out)?)
        .config(&cfg)?
        .write(&a.out, outputs)
}

enum Estimator {
    Labels(FhrWindow),
    Tang(TangConfig),
    Zahorian(ZahorianConfig),
}

impl Estimator {
    fn window(&self) -> FhrWindow {
        match self {
            Estimator::Labels(w) => *w,
            Estimator::Tang(c) => c.window,
            Estimator::Zahorian(c) => c.window,
        }
    }
}

fn fhr(a: &FhrArgs) -> Result<()> {
    let file = a.cfg.config.as_deref();
    let est = match a.method {
        FhrMethod::Labels => Estimator::Labels(resolve(&FhrWindow::default(), file, &a.cfg.set)?),
        FhrMethod::Tang => Estimator::Tang(resolve(&TangConfig::default(), file, &a.cfg.set)?),
        FhrMethod::Zahorian => Estimator::Zahorian(resolve(&ZahorianConfig::default(), file, &a.cfg.set)?),
    };
    if a.detections.is_some() && a.method != FhrMethod::Labels {
        return Err(Error::config("detections", "only used with --method labels"));
    }
    let window = est.window();
    window.validate()?;
    let entries = dataset::entries(&a.manifest)?;
    ensure_dir(&a.out)?;
    let results = par_map(a.jobs, &entries, |e| {
        let item = dataset::load_item(e)?;
        let rec = &item.record;
        let series: FhrSeries = match &est {
            Estimator::Labels(w) => match (&a.detections, &item.annotations) {
                (Some(dir), _) => fhr_from_labels(dataset::load_detections(dir, rec, "labels")?.items(), rec.duration(), w)?,
                (None, Some(ann)) => fhr_from_labels(ann.items(), rec.duration(), w)?,
                (None, None) => {
                    return Err(Error::file(&a.manifest, format!("record `{}` has no annotations", e.id)));
                }
            },
            Estimator::Tang(c) => fhr_tang_cyclic(rec, c)?,
            Estimator::Zahorian(c) => fhr_zahorian(rec, c)?,
        };
        write_atomic(&a.out.join(format!("{}.fhr.csv", e.id)), |p| save_fhr_csv(p, &series))?;
        let mse = match &item.annotations {
            Some(ann) => fhr_mse(&series, &fhr_from_labels(ann.items(), rec.duration(), &window)?)?,
            None => None,
        };
        Ok((e.id.clone(), mse))
    })?;
    let mut outputs: Vec<String> = results.iter().map(|(id, _)| format!("{id}.fhr.csv")).collect();
    let mses: Vec<f64> = results.iter().filter_map(|(_, m)| *m).collect();
    if !mses.is_empty() {
        let stats = aggregate_fhr_stats(&mses)?;
        let records: Vec<Value> = results.iter().map(|(id, m)| json!({ "record_id": id, "mse": m })).collect();
        write_json(
            &a.out.join("fhr_report.json"),
            &json!({ "method": a.method, "records": records, "mse": stats }),
        )?;
        outputs.push("fhr_report.json".into());
    }
    let config = match &est {
        Estimator::Labels(w) => serde_json::to_value(w)?,
        Estimator::Tang(c) => serde_json::to_value(c)?,
        Estimator::Zahorian(c) => serde_json::to_value(c)?,
    };
    let mut run = RunManifest::new("fhr")
        .input("manifest", &a.manifest, &a.out)
        .options(options(a, &a.out)?)
        .config(&json!({ "method": a.method, "estimator": config }))?;
    if let Some(d) = &a.detections {
        run = run.input("detections", d, &a.out);
    }
    run.write(&a.out, outputs)
}
