//! Synthetic fetal PCG records with exact per-beat ground truth.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fhr::{fhr_from_labels, FhrWindow};
use crate::preprocess::filter::{design_butterworth, Band};
use crate::signal::{Annotation, AnnotationSet, FhrSeries, Record, SoundKind, Source};

/// A bump of `delta_bpm` held over `[start_s, start_s + duration_s]`, with
/// raised-cosine ramps of [`RAMP_S`] on either side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccelDecel {
    pub start_s: f64,
    pub duration_s: f64,
    pub delta_bpm: f64,
}

pub const RAMP_S: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MaternalNoise {
    pub enabled: bool,
    pub hr_bpm: f64,
    pub rel_amp: f64,
    pub freq_hz: f64,
    pub width_s: f64,
}

impl Default for MaternalNoise {
    fn default() -> Self {
        MaternalNoise {
            enabled: false,
            hr_bpm: 75.0,
            rel_amp: 0.5,
            freq_hz: 15.0,
            width_s: 0.1,
        }
    }
}

/// White noise shaped by a 4th-order Butterworth low-pass at `cutoff_hz`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LowFreqNoise {
    pub enabled: bool,
    pub cutoff_hz: f64,
    pub rel_amp: f64,
}

impl Default for LowFreqNoise {
    fn default() -> Self {
        LowFreqNoise {
            enabled: false,
            cutoff_hz: 10.0,
            rel_amp: 0.5,
        }
    }
}

/// White noise shaped by a 4th-order Butterworth high-pass at `cutoff_hz`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HighFreqNoise {
    pub enabled: bool,
    pub cutoff_hz: f64,
    pub rel_amp: f64,
}

impl Default for HighFreqNoise {
    fn default() -> Self {
        HighFreqNoise {
            enabled: false,
            cutoff_hz: 100.0,
            rel_amp: 0.2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WhiteNoise {
    pub enabled: bool,
    pub rel_amp: f64,
}

impl Default for WhiteNoise {
    fn default() -> Self {
        WhiteNoise {
            enabled: false,
            rel_amp: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ImpulseBursts {
    pub enabled: bool,
    pub rate_per_min: f64,
    pub duration_s: f64,
}

impl Default for ImpulseBursts {
    fn default() -> Self {
        ImpulseBursts {
            enabled: false,
            rate_per_min: 2.0,
            duration_s: 0.05,
        }
    }
}

/// Additive noise components. Every `rel_amp` is the RMS of that component
/// relative to the RMS of the clean fetal signal.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseConfig {
    pub maternal_hs: MaternalNoise,
    pub low_freq_internal: LowFreqNoise,
    pub high_freq_env: HighFreqNoise,
    pub white: WhiteNoise,
    pub impulse_bursts: ImpulseBursts,
}

impl NoiseConfig {
    pub fn any_enabled(&self) -> bool {
        self.maternal_hs.enabled
            || self.low_freq_internal.enabled
            || self.high_freq_env.enabled
            || self.white.enabled
            || self.impulse_bursts.enabled
    }

    /// White noise only, scaled for the requested SNR against the clean signal.
    pub fn white_at_snr(snr_db: f64) -> Self {
        NoiseConfig {
            white: WhiteNoise {
                enabled: true,
                rel_amp: rel_amp_for_snr(snr_db),
            },
            ..NoiseConfig::default()
        }
    }
}

/// Noise-to-signal RMS ratio giving `snr_db`.
pub fn rel_amp_for_snr(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 20.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub duration_s: f64,
    pub base_fhr: f64,
    /// Stationary SD of the slow random walk around `base_fhr`, in bpm.
    pub fhr_variability: f64,
    pub accel_decel: Vec<AccelDecel>,
    /// Systole as a fraction of the cycle (`k`).
    pub systole_fraction: f64,
    pub s1_freq: f64,
    pub s2_freq: f64,
    pub s1_width: f64,
    pub s2_width: f64,
    pub s2_rel_amp: f64,
    pub s2_enabled: bool,
    pub fs: f64,
    pub noise: NoiseConfig,
    pub rng_seed: u64,
    /// Allows base rates outside 80-210 bpm (bradycardia/tachycardia scenarios).
    pub extreme_fhr: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            duration_s: 60.0,
            base_fhr: 140.0,
            fhr_variability: 3.0,
            accel_decel: Vec::new(),
            systole_fraction: 0.35,
            s1_freq: 30.0,
            s2_freq: 45.0,
            s1_width: 0.06,
            s2_width: 0.05,
            s2_rel_amp: 0.7,
            s2_enabled: true,
            fs: 333.0,
            noise: NoiseConfig::default(),
            rng_seed: 0,
            extreme_fhr: false,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64, field: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(field, format!("must be positive, got {v}")))
            }
        };
        positive(self.duration_s, "duration_s")?;
        positive(self.fs, "fs")?;
        positive(self.base_fhr, "base_fhr")?;
        positive(self.s1_width, "s1_width")?;
        positive(self.s2_width, "s2_width")?;
        if !self.extreme_fhr && !(80.0..=210.0).contains(&self.base_fhr) {
            return Err(Error::config(
                "base_fhr",
                format!("{} bpm is outside 80-210 (set extreme_fhr for such scenarios)", self.base_fhr),
            ));
        }
        if !(self.fhr_variability >= 0.0) {
            return Err(Error::config("fhr_variability", "must be non-negative"));
        }
        if !(self.systole_fraction > 0.2 && self.systole_fraction < 0.5) {
            return Err(Error::config(
                "systole_fraction",
                format!("must lie in (0.2, 0.5), got {}", self.systole_fraction),
            ));
        }
        if !(self.s2_freq > self.s1_freq) {
            return Err(Error::config("s2_freq", "must be above s1_freq"));
        }
        for (v, field) in [(self.s1_freq, "s1_freq"), (self.s2_freq, "s2_freq")] {
            positive(v, field)?;
            if v >= self.fs / 2.0 {
                return Err(Error::config(field, "must be below fs/2"));
            }
        }
        if !(self.s2_rel_amp >= 0.0) {
            return Err(Error::config("s2_rel_amp", "must be non-negative"));
        }
        for a in &self.accel_decel {
            if !(a.duration_s > 0.0) || !a.start_s.is_finite() || !a.delta_bpm.is_finite() {
                return Err(Error::config("accel_decel", "needs finite start/delta and positive duration"));
            }
        }
        let n = &self.noise;
        for (v, field) in [
            (n.maternal_hs.rel_amp, "noise.maternal_hs.rel_amp"),
            (n.low_freq_internal.rel_amp, "noise.low_freq_internal.rel_amp"),
            (n.high_freq_env.rel_amp, "noise.high_freq_env.rel_amp"),
            (n.white.rel_amp, "noise.white.rel_amp"),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::config(field, "must be non-negative"));
            }
        }
        if n.maternal_hs.enabled {
            positive(n.maternal_hs.hr_bpm, "noise.maternal_hs.hr_bpm")?;
            positive(n.maternal_hs.width_s, "noise.maternal_hs.width_s")?;
            positive(n.maternal_hs.freq_hz, "noise.maternal_hs.freq_hz")?;
            if n.maternal_hs.freq_hz >= self.fs / 2.0 {
                return Err(Error::config("noise.maternal_hs.freq_hz", "must be below fs/2"));
            }
        }
        for (enabled, cutoff, field) in [
            (n.low_freq_internal.enabled, n.low_freq_internal.cutoff_hz, "noise.low_freq_internal.cutoff_hz"),
            (n.high_freq_env.enabled, n.high_freq_env.cutoff_hz, "noise.high_freq_env.cutoff_hz"),
        ] {
            if enabled && !(cutoff > 0.0 && cutoff < self.fs / 2.0) {
                return Err(Error::config(field, "must lie in (0, fs/2)"));
            }
        }
        if n.impulse_bursts.enabled {
            if !(n.impulse_bursts.rate_per_min >= 0.0) {
                return Err(Error::config("noise.impulse_bursts.rate_per_min", "must be non-negative"));
            }
            positive(n.impulse_bursts.duration_s, "noise.impulse_bursts.duration_s")?;
        }
        Ok(())
    }

    fn accel_offset(&self, t: f64) -> f64 {
        self.accel_decel
            .iter()
            .map(|a| {
                let end = a.start_s + a.duration_s;
                let w = if t >= a.start_s && t <= end {
                    1.0
                } else if t < a.start_s && t > a.start_s - RAMP_S {
                    0.5 - 0.5 * (PI * (t - (a.start_s - RAMP_S)) / RAMP_S).cos()
                } else if t > end && t < end + RAMP_S {
                    0.5 + 0.5 * (PI * (t - end) / RAMP_S).cos()
                } else {
                    0.0
                };
                w * a.delta_bpm
            })
            .sum()
    }
}

/// One simulated heartbeat.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Beat {
    pub t: f64,
    pub bpm: f64,
}

/// Beat times and instantaneous rates. The rate is `base_fhr` plus an AR(1)
/// walk (per beat, coefficient 0.95, stationary SD `fhr_variability`,
/// clipped at three SDs) plus the accelerations; the gap from beat `i` to
/// beat `i+1` is `60 / bpm_i`. The first beat sits half an interval in.
pub fn simulate_fhr_trace(cfg: &SimConfig) -> Result<Vec<Beat>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    Ok(fhr_trace(cfg, &mut rng))
}

fn fhr_trace(cfg: &SimConfig, rng: &mut ChaCha8Rng) -> Vec<Beat> {
    const RHO: f64 = 0.95;
    let sd = cfg.fhr_variability;
    let innov = sd * (1.0 - RHO * RHO).sqrt();
    let mut walk = if sd > 0.0 { sd * rng.sample::<f64, _>(StandardNormal) } else { 0.0 };
    let rate = |t: f64, walk: f64| (cfg.base_fhr + walk.clamp(-3.0 * sd, 3.0 * sd) + cfg.accel_offset(t)).clamp(20.0, 390.0);

    let mut beats = Vec::new();
    let mut t = 0.5 * 60.0 / rate(0.0, walk);
    while t < cfg.duration_s {
        let bpm = rate(t, walk);
        beats.push(Beat { t, bpm });
        t += 60.0 / bpm;
        if sd > 0.0 {
            walk = RHO * walk + innov * rng.sample::<f64, _>(StandardNormal);
        }
    }
    beats
}

/// Gaussian-modulated cosine `amp * exp(-t^2 / 2 s^2) * cos(2 pi f t)` with
/// `s = width / 6`, sampled on `[-3s, 3s]` around its center sample.
pub fn gen_heart_sound(center_freq: f64, width: f64, amp: f64, fs: f64) -> Result<Vec<f64>> {
    if !(width > 0.0) {
        return Err(Error::config("width", "must be positive"));
    }
    if !(center_freq > 0.0 && center_freq < fs / 2.0) {
        return Err(Error::config("center_freq", format!("must lie in (0, fs/2), got {center_freq}")));
    }
    let sigma = width / 6.0;
    let half = (3.0 * sigma * fs).floor() as isize;
    Ok((-half..=half)
        .map(|i| pulse_value(i as f64 / fs, center_freq, sigma, amp))
        .collect())
}

fn pulse_value(dt: f64, freq: f64, sigma: f64, amp: f64) -> f64 {
    amp * (-dt * dt / (2.0 * sigma * sigma)).exp() * (2.0 * PI * freq * dt).cos()
}

/// Adds a pulse centered at the (fractional) time `t0`.
fn add_pulse(buf: &mut [f64], fs: f64, t0: f64, freq: f64, width: f64, amp: f64) {
    let sigma = width / 6.0;
    let first = ((t0 - 3.0 * sigma) * fs).ceil().max(0.0) as usize;
    let last = ((t0 + 3.0 * sigma) * fs).floor();
    if last < 0.0 {
        return;
    }
    let last = (last as usize).min(buf.len().saturating_sub(1));
    for (n, v) in buf.iter_mut().enumerate().take(last + 1).skip(first) {
        *v += pulse_value(n as f64 / fs - t0, freq, sigma, amp);
    }
}

/// Simulator output.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub record: Record,
    pub annotations: AnnotationSet,
    pub fhr: FhrSeries,
    pub beats: Vec<Beat>,
    /// Fetal sounds alone, before noise.
    pub clean: Vec<f64>,
    pub meta: SimMeta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimMeta {
    pub seed: u64,
    pub n_beats: usize,
    pub clean_rms: f64,
    pub noise_rms: f64,
    /// `None` when no noise was added.
    pub snr_db: Option<f64>,
}

fn rms(x: &[f64]) -> f64 {
    (x.iter().map(|v| v * v).sum::<f64>() / x.len().max(1) as f64).sqrt()
}

fn scale_to(x: &mut [f64], target_rms: f64) {
    let r = rms(x);
    let g = if r > 0.0 { target_rms / r } else { 0.0 };
    x.iter_mut().for_each(|v| *v *= g);
}

fn gaussian(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// Generates one record with its labels, windowed ground-truth heart rate
/// and noise statistics. All random draws come from one generator seeded
/// with `cfg.rng_seed`.
pub fn simulate_record(id: &str, cfg: &SimConfig) -> Result<Simulation> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let beats = fhr_trace(cfg, &mut rng);
    let fs = cfg.fs;
    let n = (cfg.duration_s * fs).round() as usize;
    if n == 0 {
        return Err(Error::config("duration_s", "shorter than one sample"));
    }

    let mut clean = vec![0.0; n];
    let mut labels = Vec::with_capacity(2 * beats.len());
    for b in &beats {
        add_pulse(&mut clean, fs, b.t, cfg.s1_freq, cfg.s1_width, 1.0);
        labels.push(Annotation::new(b.t, SoundKind::S1));
        let t2 = b.t + cfg.systole_fraction * 60.0 / b.bpm;
        if cfg.s2_enabled && t2 < cfg.duration_s {
            add_pulse(&mut clean, fs, t2, cfg.s2_freq, cfg.s2_width, cfg.s2_rel_amp);
            labels.push(Annotation::new(t2, SoundKind::S2));
        }
    }

    let clean_rms = rms(&clean);
    let mut total = clean.clone();
    let nc = &cfg.noise;
    let add = |total: &mut Vec<f64>, comp: Vec<f64>| {
        for (t, c) in total.iter_mut().zip(comp) {
            *t += c;
        }
    };
    if nc.maternal_hs.enabled {
        let m = &nc.maternal_hs;
        let cycle = 60.0 / m.hr_bpm;
        let mut comp = vec![0.0; n];
        let mut t = rng.random_range(0.0..cycle);
        while t < cfg.duration_s {
            add_pulse(&mut comp, fs, t, m.freq_hz, m.width_s, 1.0);
            add_pulse(&mut comp, fs, t + 0.35 * cycle, m.freq_hz, m.width_s, 0.7);
            t += cycle;
        }
        scale_to(&mut comp, m.rel_amp * clean_rms);
        add(&mut total, comp);
    }
    for (enabled, rel_amp, band) in [
        (
            nc.low_freq_internal.enabled,
            nc.low_freq_internal.rel_amp,
            Band::Lowpass(nc.low_freq_internal.cutoff_hz),
        ),
        (
            nc.high_freq_env.enabled,
            nc.high_freq_env.rel_amp,
            Band::Highpass(nc.high_freq_env.cutoff_hz),
        ),
    ] {
        if enabled {
            let spec = design_butterworth(band, 4, fs)?;
            let mut comp = spec.filter(&gaussian(&mut rng, n));
            scale_to(&mut comp, rel_amp * clean_rms);
            add(&mut total, comp);
        }
    }
    if nc.white.enabled {
        let mut comp = gaussian(&mut rng, n);
        scale_to(&mut comp, nc.white.rel_amp * clean_rms);
        add(&mut total, comp);
    }
    if nc.impulse_bursts.enabled {
        let b = &nc.impulse_bursts;
        let count = (b.rate_per_min * cfg.duration_s / 60.0).round() as usize;
        let len = ((b.duration_s * fs).round() as usize).clamp(1, n);
        for _ in 0..count {
            let onset = rng.random_range(0..=n - len);
            for v in &mut total[onset..onset + len] {
                let z: f64 = rng.sample(StandardNormal);
                *v = (*v + 10.0 * z).clamp(-1.0, 1.0);
            }
        }
    }

    let noise_rms = (total.iter().zip(&clean).map(|(t, c)| (t - c).powi(2)).sum::<f64>() / n as f64).sqrt();
    let snr_db = (nc.any_enabled() && noise_rms > 0.0 && clean_rms > 0.0)
        .then(|| 20.0 * (clean_rms / noise_rms).log10());

    let annotations = AnnotationSet::new(id, labels)?;
    let truth_window = FhrWindow {
        hr_range: (1.0, 399.0),
        ..FhrWindow::default()
    };
    let fhr = fhr_from_labels(annotations.items(), cfg.duration_s, &truth_window)?;
    let record = Record::new(id, total, fs, Source::Synthetic)?;
    Ok(Simulation {
        record,
        annotations,
        fhr,
        meta: SimMeta {
            seed: cfg.rng_seed,
            n_beats: beats.len(),
            clean_rms,
            noise_rms,
            snr_db,
        },
        beats,
        clean,
    })
}
