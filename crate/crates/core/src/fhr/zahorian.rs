use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::FhrWindow;
use crate::error::{Error, Result};
use crate::preprocess::fft::{forward_real, inverse_in_place, next_pow2};
use crate::preprocess::{bandpass_record, teager_energy, Band};
use crate::signal::{FhrPoint, FhrSeries, Record};
use crate::synth::gen_heart_sound;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ZahorianConfig {
    pub window: FhrWindow,
    pub band_hz: (f64, f64),
    pub filter_order: usize,
    /// Expected pulse whose magnitude spectrum forms the matched filter.
    pub template_freq_hz: f64,
    pub template_width_s: f64,
    pub frame_s: f64,
    /// Rates below this are never reported.
    pub min_bpm: f64,
    /// A peak counts when it reaches this fraction of the largest
    /// autocorrelation value in the search range.
    pub peak_frac: f64,
    pub merit_memory: f64,
    /// Rate change that drives the merit increment to zero.
    pub merit_scale_bpm: f64,
    pub merit_threshold: f64,
}

impl Default for ZahorianConfig {
    fn default() -> Self {
        ZahorianConfig {
            window: FhrWindow::default(),
            band_hz: (16.0, 50.0),
            filter_order: 4,
            template_freq_hz: 30.0,
            template_width_s: 0.06,
            frame_s: 6.0,
            min_bpm: 90.0,
            peak_frac: 0.7,
            merit_memory: 0.7,
            merit_scale_bpm: 20.0,
            merit_threshold: 0.5,
        }
    }
}

/// Per-frame estimate before merit gating.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZahorianFrame {
    pub center_s: f64,
    pub raw_bpm: Option<f64>,
    pub merit: f64,
}

/// Zero-phase filtering with the magnitude spectrum of the template.
pub fn matched_filter(x: &[f64], template: &[f64]) -> Vec<f64> {
    let n = next_pow2(x.len() + template.len());
    let mut spec = forward_real(x, n);
    let t = forward_real(template, n);
    let peak = t.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if peak == 0.0 {
        return vec![0.0; x.len()];
    }
    for (s, h) in spec.iter_mut().zip(&t) {
        *s *= h.norm() / peak;
    }
    inverse_in_place(&mut spec);
    spec.iter().take(x.len()).map(|c: &Complex64| c.re / n as f64).collect()
}

/// Normalized autocorrelation for lags `0..=max_lag`.
pub fn normalized_acf(x: &[f64], max_lag: usize) -> Vec<f64> {
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n.max(1) as f64;
    let c: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let e0: f64 = c.iter().map(|v| v * v).sum();
    (0..=max_lag.min(n.saturating_sub(1)))
        .map(|k| {
            if e0 > 0.0 {
                c.iter().zip(&c[k..]).map(|(a, b)| a * b).sum::<f64>() / e0
            } else {
                0.0
            }
        })
        .collect()
}

/// First local maximum in `[lag_min, lag_max]` reaching `frac` of the
/// largest value in that range, refined by a parabola through its
/// neighbours. Returns the fractional lag.
pub fn pick_acf_peak(acf: &[f64], lag_min: usize, lag_max: usize, frac: f64) -> Option<f64> {
    let lag_min = lag_min.max(1);
    let lag_max = lag_max.min(acf.len().saturating_sub(2));
    if lag_min > lag_max {
        return None;
    }
    let top = acf[lag_min..=lag_max].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(top > 0.0) {
        return None;
    }
    let k = (lag_min..=lag_max).find(|&k| acf[k] > acf[k - 1] && acf[k] >= acf[k + 1] && acf[k] >= frac * top)?;
    let (a, b, c) = (acf[k - 1], acf[k], acf[k + 1]);
    let den = a - 2.0 * b + c;
    let shift = if den < 0.0 { (0.5 * (a - c) / den).clamp(-0.5, 0.5) } else { 0.0 };
    Some(k as f64 + shift)
}

/// Next merit from the previous one and the apparent rate change; a frame
/// without estimate contributes no credit.
pub fn merit_update(prev: f64, change_bpm: Option<f64>, cfg: &ZahorianConfig) -> f64 {
    let credit = change_bpm.map_or(0.0, |d| 1.0 - (d.abs() / cfg.merit_scale_bpm).min(1.0));
    cfg.merit_memory * prev + (1.0 - cfg.merit_memory) * credit
}

fn energy_signal(rec: &Record, cfg: &ZahorianConfig) -> Result<Vec<f64>> {
    let filtered = bandpass_record(rec, Band::Bandpass(cfg.band_hz.0, cfg.band_hz.1), cfg.filter_order)?;
    let template = gen_heart_sound(cfg.template_freq_hz, cfg.template_width_s, 1.0, rec.fs())?;
    let matched = matched_filter(filtered.samples(), &template);
    Ok(teager_energy(&matched)?.into_iter().map(|v| v.max(0.0)).collect())
}

/// Raw rate and merit of the frame centered on every analysis window.
pub fn zahorian_frames(rec: &Record, cfg: &ZahorianConfig) -> Result<Vec<ZahorianFrame>> {
    cfg.window.validate()?;
    if rec.duration() < cfg.frame_s {
        return Err(Error::input(format!(
            "record of {} s is shorter than one {} s frame",
            rec.duration(),
            cfg.frame_s
        )));
    }
    let fs = rec.fs();
    let energy = energy_signal(rec, cfg)?;
    let lo_bpm = cfg.min_bpm.max(cfg.window.hr_range.0);
    let hi_bpm = cfg.window.hr_range.1;
    let lag_min = (60.0 / hi_bpm * fs).floor() as usize;
    let lag_max = (60.0 / lo_bpm * fs).ceil() as usize;
    let half = (0.5 * cfg.frame_s * fs).round() as usize;
    let mut merit = 1.0;
    let mut last: Option<f64> = None;
    let mut out = Vec::new();
    for (s, e) in cfg.window.grid(rec.duration()) {
        let center_s = 0.5 * (s + e);
        let c = (center_s * fs).round() as usize;
        let a = c.saturating_sub(half);
        let b = (a + 2 * half).min(energy.len());
        let a = b.saturating_sub(2 * half);
        let acf = normalized_acf(&energy[a..b], lag_max + 1);
        let raw = pick_acf_peak(&acf, lag_min, lag_max, cfg.peak_frac)
            .map(|lag| 60.0 * fs / lag)
            .filter(|&bpm| bpm >= lo_bpm && bpm <= hi_bpm);
        let change = match (raw, last) {
            (Some(r), Some(l)) => Some(r - l),
            (Some(_), None) => Some(0.0),
            (None, _) => None,
        };
        merit = merit_update(merit, change, cfg);
        if raw.is_some() {
            last = raw;
        }
        out.push(ZahorianFrame {
            center_s,
            raw_bpm: raw,
            merit,
        });
    }
    Ok(out)
}

/// Teager-energy autocorrelation heart rate; frames whose merit falls below
/// the threshold are gaps.
pub fn fhr_zahorian(rec: &Record, cfg: &ZahorianConfig) -> Result<FhrSeries> {
    let frames = zahorian_frames(rec, cfg)?;
    let values = frames
        .iter()
        .map(|f| FhrPoint {
            center_s: f.center_s,
            bpm: f.raw_bpm.filter(|_| f.merit >= cfg.merit_threshold),
        })
        .collect();
    FhrSeries::new(cfg.window.window_s, cfg.window.overlap, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{simulate_record, SimConfig};

    #[test]
    fn clean_record_at_140() {
        let sim = simulate_record(
            "z",
            &SimConfig {
                fhr_variability: 0.0,
                ..SimConfig::default()
            },
        )
        .unwrap();
        let s = fhr_zahorian(&sim.record, &ZahorianConfig::default()).unwrap();
        assert!(s.same_grid(&sim.fhr));
        let mut n = 0;
        for p in s.values() {
            if let Some(b) = p.bpm {
                assert!((b - 140.0).abs() <= 3.0, "{b}");
                n += 1;
            }
        }
        assert!(n > 0);
    }

    #[test]
    fn slow_peak_rejected() {
        let fs = 100.0;
        // single ACF peak at 0.8 s (75 bpm)
        let acf: Vec<f64> = (0..120).map(|k| (-((k as f64 - 80.0) / 5.0).powi(2)).exp()).collect();
        let lag_min = (60.0 / 210.0 * fs) as usize;
        let lag_max = (60.0 / 90.0 * fs) as usize;
        assert_eq!(pick_acf_peak(&acf, lag_min, lag_max, 0.7), None);
        let lag = pick_acf_peak(&acf, lag_min, 100, 0.7).unwrap();
        assert!((lag - 80.0).abs() < 1e-9);
    }

    #[test]
    fn merit_drops_on_jump() {
        let cfg = ZahorianConfig::default();
        let steady = merit_update(1.0, Some(0.0), &cfg);
        assert_eq!(steady, 1.0);
        let jumped = merit_update(steady, Some(60.0), &cfg);
        assert!((jumped - 0.7).abs() < 1e-12);
        assert!(merit_update(jumped, Some(60.0), &cfg) < cfg.merit_threshold);
    }

    #[test]
    fn constructed_rate_jump_is_flagged() {
        use crate::synth::AccelDecel;
        let sim = simulate_record(
            "j",
            &SimConfig {
                fhr_variability: 0.0,
                accel_decel: vec![AccelDecel {
                    start_s: 32.0,
                    duration_s: 40.0,
                    delta_bpm: 60.0,
                }],
                ..SimConfig::default()
            },
        )
        .unwrap();
        let frames = zahorian_frames(&sim.record, &ZahorianConfig::default()).unwrap();
        let before = frames.iter().find(|f| f.center_s == 25.0).unwrap();
        let dip = frames
            .iter()
            .filter(|f| (30.0..=40.0).contains(&f.center_s))
            .map(|f| f.merit)
            .fold(f64::INFINITY, f64::min);
        assert!(dip <= before.merit - 0.25, "{frames:?}");
    }

    #[test]
    fn too_short() {
        let r = Record::new("s", vec![0.1; 333], 333.0, crate::signal::Source::Synthetic).unwrap();
        assert!(zahorian_frames(&r, &ZahorianConfig::default()).is_err());
    }
}
