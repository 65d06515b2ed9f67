use serde::{Deserialize, Serialize};

use super::envelope::{hilbert_envelope, homomorphic_envelope, psd_energy_envelope};
use super::wavelet::{default_dwt_level, dwt_detail_envelope};
use crate::error::{Error, Result};
use crate::signal::resample::resample_slice;
use crate::signal::Record;

pub const CHANNEL_NAMES: [&str; 4] = ["homomorphic", "hilbert", "psd_energy", "dwt_detail"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvelogramConfig {
    pub feature_rate: f64,
    pub homomorphic_lpf_hz: f64,
    pub psd_band: (f64, f64),
    pub psd_frame_s: f64,
    /// `None` picks the level from the record rate.
    pub dwt_level: Option<usize>,
}

impl Default for EnvelogramConfig {
    fn default() -> Self {
        EnvelogramConfig {
            feature_rate: 50.0,
            homomorphic_lpf_hz: 8.0,
            psd_band: (40.0, 60.0),
            psd_frame_s: 0.1,
            dwt_level: None,
        }
    }
}

/// Four z-normalized envelope channels at a common feature rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelogram {
    feature_rate: f64,
    channels: [Vec<f64>; 4],
    /// Mean and SD each channel had before normalization.
    norm: [(f64, f64); 4],
}

impl Envelogram {
    /// Builds an envelogram from raw channels, z-normalizing each one.
    /// A constant channel becomes all zeros.
    pub fn from_raw(feature_rate: f64, raw: [Vec<f64>; 4]) -> Result<Self> {
        let len = raw[0].len();
        if raw.iter().any(|c| c.len() != len) {
            return Err(Error::input("envelogram channels differ in length"));
        }
        if raw.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite envelope value".into()));
        }
        let mut norm = [(0.0, 0.0); 4];
        let channels: [Vec<f64>; 4] = std::array::from_fn(|i| {
            let c = &raw[i];
            let n = c.len().max(1) as f64;
            let mean = c.iter().sum::<f64>() / n;
            let sd = (c.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
            norm[i] = (mean, sd);
            if sd > 1e-12 * mean.abs().max(f64::MIN_POSITIVE) {
                c.iter().map(|v| (v - mean) / sd).collect()
            } else {
                vec![0.0; c.len()]
            }
        });
        Ok(Envelogram {
            feature_rate,
            channels,
            norm,
        })
    }

    pub fn feature_rate(&self) -> f64 {
        self.feature_rate
    }

    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn channels(&self) -> &[Vec<f64>; 4] {
        &self.channels
    }

    pub fn channel(&self, name: &str) -> Option<&[f64]> {
        CHANNEL_NAMES
            .iter()
            .position(|&n| n == name)
            .map(|i| self.channels[i].as_slice())
    }

    pub fn normalization(&self) -> &[(f64, f64); 4] {
        &self.norm
    }

    /// Feature vector of frame `t`.
    pub fn frame(&self, t: usize) -> [f64; 4] {
        std::array::from_fn(|i| self.channels[i][t])
    }
}

fn fit_length(mut v: Vec<f64>, len: usize) -> Vec<f64> {
    let last = v.last().copied().unwrap_or(0.0);
    v.resize(len, last);
    v
}

/// Computes the homomorphic, Hilbert, band-energy and wavelet-detail
/// envelopes of `rec` and brings them to `cfg.feature_rate`, one frame per
/// `1 / feature_rate` seconds starting at t = 0.
pub fn compute_envelogram(rec: &Record, cfg: &EnvelogramConfig) -> Result<Envelogram> {
    let fr = cfg.feature_rate;
    if !(fr > 0.0) || fr > rec.fs() {
        return Err(Error::config("feature_rate", "must be positive and at most the record rate"));
    }
    let len = (rec.duration() * fr - 1e-9).ceil().max(1.0) as usize;
    let level = cfg.dwt_level.unwrap_or_else(|| default_dwt_level(rec.fs()));
    let to_rate = |v: Vec<f64>| fit_length(resample_slice(&v, rec.fs(), fr), len);

    let homomorphic = to_rate(homomorphic_envelope(rec, cfg.homomorphic_lpf_hz)?);
    let hilbert = to_rate(hilbert_envelope(rec)?);
    let psd = fit_length(psd_energy_envelope(rec, cfg.psd_band, cfg.psd_frame_s, 1.0 / fr)?, len);
    let dwt = to_rate(dwt_detail_envelope(rec, level)?);
    Envelogram::from_raw(fr, [homomorphic, hilbert, psd, dwt])
}
