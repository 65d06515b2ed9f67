use std::f64::consts::PI;

use num_complex::Complex64;

use super::fft;
use super::filter::{apply_filter, clamp_band, design_butterworth, Band};
use crate::error::{Error, Result};
use crate::signal::Record;

/// Analytic signal `x + i H(x)` with the Hilbert transform applied as the
/// spectral multiplier `-i sgn(w)`.
pub fn analytic_signal(x: &[f64]) -> Vec<Complex64> {
    let n = x.len();
    let mut spec = fft::forward_real(x, n);
    for (k, c) in spec.iter_mut().enumerate() {
        let h = if k == 0 || (n.is_multiple_of(2) && k == n / 2) {
            1.0
        } else if k < n.div_ceil(2) {
            2.0
        } else {
            0.0
        };
        *c *= h / n as f64;
    }
    fft::inverse_in_place(&mut spec);
    spec
}

pub fn hilbert_envelope(rec: &Record) -> Result<Vec<f64>> {
    if rec.len() < 2 {
        return Err(Error::input("Hilbert envelope needs at least 2 samples"));
    }
    Ok(analytic_signal(rec.samples()).iter().map(|c| c.norm()).collect())
}

/// `exp(LPF(log(env)))` of the Hilbert envelope, with a first-order
/// zero-phase Butterworth low-pass at `lpf_cutoff` Hz.
pub fn homomorphic_envelope(rec: &Record, lpf_cutoff: f64) -> Result<Vec<f64>> {
    let env = hilbert_envelope(rec)?;
    let peak = env.iter().fold(0.0f64, |m, &v| m.max(v));
    let floor = if peak > 0.0 { 1e-8 * peak } else { f64::MIN_POSITIVE };
    let logs: Vec<f64> = env.iter().map(|&v| v.max(floor).ln()).collect();
    let spec = design_butterworth(Band::Lowpass(lpf_cutoff), 1, rec.fs())?;
    let smooth = apply_filter(&spec, &rec.with_samples(logs, rec.fs())?, true)?;
    Ok(smooth.samples().iter().map(|v| v.exp()).collect())
}

/// Short-time band energy: for frames centered at `j * hop_s`, the mean of
/// the Hann-windowed `|STFT|^2` bins whose frequency lies in `band`.
///
/// The frame count is `ceil(duration / hop_s)`; samples beyond the record
/// edges count as zero.
pub fn psd_energy_envelope(rec: &Record, band: (f64, f64), frame_s: f64, hop_s: f64) -> Result<Vec<f64>> {
    let fs = rec.fs();
    let frame = (frame_s * fs).round() as usize;
    if frame < 2 {
        return Err(Error::config("frame_s", "frame is shorter than 2 samples"));
    }
    if !(hop_s > 0.0) {
        return Err(Error::config("hop_s", "must be positive"));
    }
    let (lo, hi) = match clamp_band(Band::Bandpass(band.0, band.1), fs) {
        Band::Bandpass(lo, hi) => (lo, hi),
        _ => unreachable!(),
    };
    let nfft = fft::next_pow2(frame.max(fs.ceil() as usize));
    let bins: Vec<usize> = (0..=nfft / 2)
        .filter(|&k| {
            let f = k as f64 * fs / nfft as f64;
            f >= lo && f <= hi
        })
        .collect();
    if bins.is_empty() {
        return Err(Error::config("band", "no frequency bins inside the band"));
    }
    let hann: Vec<f64> = (0..frame)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / (frame - 1) as f64).cos())
        .collect();
    let x = rec.samples();
    let n_frames = (rec.duration() / hop_s - 1e-9).ceil().max(1.0) as usize;
    let half = frame as isize / 2;
    let mut buf = vec![Complex64::new(0.0, 0.0); nfft];
    Ok((0..n_frames)
        .map(|j| {
            let center = (j as f64 * hop_s * fs).round() as isize;
            buf.fill(Complex64::new(0.0, 0.0));
            for (i, w) in hann.iter().enumerate() {
                let idx = center - half + i as isize;
                if idx >= 0 && (idx as usize) < x.len() {
                    buf[i] = Complex64::new(x[idx as usize] * w, 0.0);
                }
            }
            fft::forward_in_place(&mut buf);
            bins.iter().map(|&k| buf[k].norm_sqr()).sum::<f64>() / bins.len() as f64
        })
        .collect())
}

/// Splits the energy of `x` over the frequency bands delimited by `edges`
/// (Hz, ascending, from 0 to fs/2). Bin `k` of the one-sided spectrum is
/// assigned to the band containing `k * fs / N`; the totals add up to the
/// time-domain energy.
pub fn band_energies(x: &[f64], fs: f64, edges: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut out = vec![0.0; edges.len().saturating_sub(1)];
    if n == 0 || out.is_empty() {
        return out;
    }
    let spec = fft::forward_real(x, n);
    for (k, c) in spec.iter().enumerate().take(n / 2 + 1) {
        let mirrored = k != 0 && !(n.is_multiple_of(2) && k == n / 2);
        let e = c.norm_sqr() / n as f64 * if mirrored { 2.0 } else { 1.0 };
        let f = k as f64 * fs / n as f64;
        let last = out.len() - 1;
        let band = edges[1..].iter().position(|&hi| f < hi).unwrap_or(last);
        out[band.min(last)] += e;
    }
    out
}

/// Teager-Kaiser energy `x[n]^2 - x[n-1] x[n+1]`, endpoints copied from
/// their neighbours.
pub fn teager_energy(x: &[f64]) -> Result<Vec<f64>> {
    let n = x.len();
    if n < 3 {
        return Err(Error::input("Teager energy needs at least 3 samples"));
    }
    let mut out = vec![0.0; n];
    for i in 1..n - 1 {
        out[i] = x[i] * x[i] - x[i - 1] * x[i + 1];
    }
    out[0] = out[1];
    out[n - 1] = out[n - 2];
    Ok(out)
}

/// Framed RMS: frame `j` covers samples `[j*hop, j*hop + window)`; frames
/// stop at the last one that fits.
pub fn rms_envelope(rec: &Record, window_s: f64, hop_s: f64) -> Result<Vec<f64>> {
    if !(window_s > 0.0) || !(hop_s > 0.0) {
        return Err(Error::config("window_s", "window and hop must be positive"));
    }
    let w = ((window_s * rec.fs()).round() as usize).max(1);
    let hop = ((hop_s * rec.fs()).round() as usize).max(1);
    let x = rec.samples();
    if w > x.len() {
        return Err(Error::input("RMS window is longer than the record"));
    }
    Ok((0..=(x.len() - w) / hop)
        .map(|j| {
            let f = &x[j * hop..j * hop + w];
            (f.iter().map(|v| v * v).sum::<f64>() / w as f64).sqrt()
        })
        .collect())
}

/// Centered moving RMS over `w` samples, one value per input sample.
/// Near the edges the average runs over the samples that exist.
pub fn moving_rms(x: &[f64], w: usize) -> Vec<f64> {
    moving_mean(&x.iter().map(|v| v * v).collect::<Vec<_>>(), w)
        .into_iter()
        .map(|v| v.max(0.0).sqrt())
        .collect()
}

/// Centered moving average over `w` samples (truncated at the edges).
pub fn moving_mean(x: &[f64], w: usize) -> Vec<f64> {
    let n = x.len();
    let w = w.max(1);
    let mut cum = Vec::with_capacity(n + 1);
    cum.push(0.0);
    for v in x {
        cum.push(cum.last().unwrap() + v);
    }
    let before = (w - 1) / 2;
    let after = w - 1 - before;
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(before);
            let hi = (i + after + 1).min(n);
            (cum[hi] - cum[lo]) / (hi - lo) as f64
        })
        .collect()
}
