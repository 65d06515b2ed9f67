use std::f64::consts::PI;

use super::Record;
use crate::error::{Error, Result};

const KAISER_BETA: f64 = 8.0;
const CUTOFF_FRACTION: f64 = 0.45;
/// Sinc zero crossings kept on each side of the kernel center.
const HALF_ZERO_CROSSINGS: f64 = 16.0;

/// Modified Bessel function of the first kind, order zero.
pub(crate) fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let half = x / 2.0;
    for k in 1..200 {
        let r = half / k as f64;
        term *= r * r;
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Band-limited resampling with a Kaiser-windowed sinc kernel
/// (beta 8, cutoff 0.45 of the lower rate).
///
/// The kernel is evaluated at the exact fractional position of every output
/// sample, so any rate ratio works. Weights are renormalized per output
/// sample, which keeps constants exact up to the record edges.
pub fn resample(rec: &Record, target_fs: f64) -> Result<Record> {
    if !(target_fs > 0.0) || !target_fs.is_finite() {
        return Err(Error::config("target_fs", format!("must be positive, got {target_fs}")));
    }
    let out = resample_slice(rec.samples(), rec.fs(), target_fs);
    rec.with_samples(out, target_fs)
}

pub(crate) fn resample_slice(x: &[f64], fs: f64, target_fs: f64) -> Vec<f64> {
    let n_out = ((x.len() as f64) * target_fs / fs).round().max(1.0) as usize;
    if (fs - target_fs).abs() < 1e-12 {
        return x.to_vec();
    }
    let cutoff = CUTOFF_FRACTION * fs.min(target_fs);
    let half_width_s = HALF_ZERO_CROSSINGS / (2.0 * cutoff);
    let half_taps = (half_width_s * fs).ceil() as isize;
    let i0_beta = bessel_i0(KAISER_BETA);
    let n = x.len() as isize;

    (0..n_out)
        .map(|m| {
            let t = m as f64 / target_fs;
            let center = (t * fs).floor() as isize;
            let (mut acc, mut wsum) = (0.0, 0.0);
            for k in (center - half_taps).max(0)..=(center + half_taps).min(n - 1) {
                let dt = t - k as f64 / fs;
                let u = dt / half_width_s;
                if u.abs() >= 1.0 {
                    continue;
                }
                let win = bessel_i0(KAISER_BETA * (1.0 - u * u).sqrt()) / i0_beta;
                let w = sinc(2.0 * cutoff * dt) * win;
                acc += w * x[k as usize];
                wsum += w;
            }
            if wsum.abs() > 1e-12 {
                acc / wsum
            } else {
                0.0
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::Source;

    fn tone(f: f64, fs: f64, secs: f64) -> Record {
        let n = (fs * secs) as usize;
        let x = (0..n).map(|i| (2.0 * PI * f * i as f64 / fs).sin()).collect();
        Record::new("t", x, fs, Source::Synthetic).unwrap()
    }

    fn rms(x: &[f64]) -> f64 {
        (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
    }

    #[test]
    fn bessel_matches_reference_values() {
        assert!((bessel_i0(0.0) - 1.0).abs() < 1e-15);
        assert!((bessel_i0(1.0) - 1.266_065_877_752_008_4).abs() < 1e-12);
        assert!((bessel_i0(8.0) - 427.564_115_721_804_7).abs() < 1e-9);
    }

    #[test]
    fn dc_is_preserved() {
        let r = Record::new("c", vec![1.0; 2000], 1000.0, Source::Synthetic).unwrap();
        let y = resample(&r, 500.0).unwrap();
        assert_eq!(y.len(), 1000);
        assert_eq!(y.fs(), 500.0);
        for v in &y.samples()[20..980] {
            assert!((v - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn in_band_tone_keeps_rms() {
        let x = tone(10.0, 1000.0, 4.0);
        let y = resample(&x, 333.0).unwrap();
        let edge = 40;
        let r_in = 1.0 / 2f64.sqrt();
        let r_out = rms(&y.samples()[edge..y.len() - edge]);
        assert!((r_out / r_in - 1.0).abs() < 0.01, "ratio {}", r_out / r_in);
    }

    #[test]
    fn out_of_band_tone_is_removed() {
        let x = tone(200.0, 1000.0, 4.0);
        let y = resample(&x, 333.0).unwrap();
        let edge = 40;
        let r_out = rms(&y.samples()[edge..y.len() - edge]);
        assert!(r_out < 0.05 / 2f64.sqrt(), "leak {r_out}");
    }

    #[test]
    fn round_trip_duration() {
        let x = tone(5.0, 1000.0, 3.217);
        let y = resample(&resample(&x, 333.0).unwrap(), 1000.0).unwrap();
        assert!((y.duration() - x.duration()).abs() <= 1.0 / 1000.0);
    }

    #[test]
    fn rejects_bad_rate() {
        let x = tone(5.0, 100.0, 1.0);
        assert!(resample(&x, 0.0).is_err());
        assert!(resample(&x, -5.0).is_err());
    }
}
