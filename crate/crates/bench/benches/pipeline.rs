use criterion::{criterion_group, criterion_main, Criterion};
use fpcg_bench::{dataset, record};
use fpcg_core::detect::{
    detect_heuristic_balogh, detect_kfd_peakpeel, detect_rms_chen, detect_teager_cesarelli, train_hsmm,
    HeuristicConfig, HsmmConfig, KfdConfig, RmsConfig, TeagerConfig,
};
use fpcg_core::eval::{default_tolerances, match_detections, score_vs_tolerance};
use fpcg_core::fhr::{fhr_tang_cyclic, fhr_zahorian, TangConfig, ZahorianConfig};
use fpcg_core::preprocess::{compute_envelogram, EnvelogramConfig};
use fpcg_core::SoundKind;
use std::hint::black_box;

fn detectors(c: &mut Criterion) {
    let sim = record(1, Some(0.0));
    let rec = &sim.record;
    let mut g = c.benchmark_group("detect_60s");
    g.sample_size(20);
    g.bench_function("teager", |b| b.iter(|| detect_teager_cesarelli(black_box(rec), &TeagerConfig::default())));
    g.bench_function("rms", |b| b.iter(|| detect_rms_chen(black_box(rec), &RmsConfig::default())));
    g.bench_function("heuristic", |b| b.iter(|| detect_heuristic_balogh(black_box(rec), &HeuristicConfig::default())));
    g.bench_function("kfd", |b| b.iter(|| detect_kfd_peakpeel(black_box(rec), &KfdConfig::default())));
    let model = train_hsmm(&dataset(4), &HsmmConfig::default()).expect("training");
    g.bench_function("lr-hsmm", |b| b.iter(|| model.detect(black_box(rec))));
    g.finish();
}

fn features(c: &mut Criterion) {
    let sim = record(2, None);
    c.bench_function("envelogram_60s", |b| {
        b.iter(|| compute_envelogram(black_box(&sim.record), &EnvelogramConfig::default()))
    });
}

fn heart_rate(c: &mut Criterion) {
    let sim = record(3, Some(0.0));
    let mut g = c.benchmark_group("fhr_60s");
    g.sample_size(10);
    g.bench_function("tang", |b| b.iter(|| fhr_tang_cyclic(black_box(&sim.record), &TangConfig::default())));
    g.bench_function("zahorian", |b| b.iter(|| fhr_zahorian(black_box(&sim.record), &ZahorianConfig::default())));
    g.finish();
}

fn scoring(c: &mut Criterion) {
    let sim = record(4, None);
    let labels = sim.annotations.times(SoundKind::S1);
    let det: Vec<f64> = labels.iter().enumerate().map(|(i, t)| t + 0.004 * ((i % 7) as f64 - 3.0)).collect();
    let tols = default_tolerances(100);
    c.bench_function("match_140_events", |b| b.iter(|| match_detections(black_box(&labels), black_box(&det), 0.03)));
    c.bench_function("svt_sweep_100", |b| b.iter(|| score_vs_tolerance(black_box(&labels), black_box(&det), &tols)));
}

criterion_group!(benches, detectors, features, heart_rate, scoring);
criterion_main!(benches);
