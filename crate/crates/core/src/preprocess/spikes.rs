use crate::error::{Error, Result};
use crate::signal::Record;

/// Removes impulsive spikes window by window.
///
/// The record is cut into consecutive windows of `window_s`; while some
/// window's maximum absolute amplitude exceeds three times the median of
/// those maxima, the largest peak of the worst window is zeroed together with
/// the samples out to the neighbouring zero crossings. Records with fewer than
/// three full windows are returned unchanged.
pub fn remove_spikes(rec: &Record, window_s: f64) -> Result<Record> {
    if !(window_s > 0.0) {
        return Err(Error::config("window_s", "must be positive"));
    }
    let w = ((window_s * rec.fs()).round() as usize).max(1);
    let mut x = rec.samples().to_vec();
    let n_win = x.len() / w;
    if n_win < 3 {
        return Ok(rec.clone());
    }
    // each pass zeroes at least one nonzero sample, so this bound is never the binding one
    for _ in 0..x.len() {
        let maa: Vec<f64> = (0..n_win)
            .map(|k| x[k * w..(k + 1) * w].iter().fold(0.0f64, |m, v| m.max(v.abs())))
            .collect();
        let med = median(&maa);
        if med <= 0.0 {
            break;
        }
        let (worst, &peak) = maa
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
            .expect("at least three windows");
        if peak <= 3.0 * med {
            break;
        }
        let frame = &mut x[worst * w..(worst + 1) * w];
        let pos = frame
            .iter()
            .position(|v| v.abs() == peak)
            .expect("peak lies in its window");
        let crosses = |i: usize| frame[i].signum() != frame[i + 1].signum() || frame[i] == 0.0;
        let start = (0..pos).rev().find(|&i| crosses(i)).map_or(0, |i| i + 1);
        let end = (pos..w - 1).find(|&i| crosses(i)).unwrap_or(w - 1);
        for v in &mut frame[start..=end] {
            *v = 0.0;
        }
    }
    rec.with_samples(x, rec.fs())
}

pub(crate) fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::Source;
    use std::f64::consts::PI;

    fn sine(n: usize, fs: f64) -> Vec<f64> {
        (0..n).map(|i| (2.0 * PI * 7.0 * i as f64 / fs + 0.3).sin()).collect()
    }

    #[test]
    fn clean_sine_untouched() {
        let r = Record::new("s", sine(5000, 1000.0), 1000.0, Source::Synthetic).unwrap();
        assert_eq!(remove_spikes(&r, 0.5).unwrap(), r);
    }

    #[test]
    fn single_spike_removed() {
        let mut x = sine(5000, 1000.0);
        x[2345] = 10.0;
        let r = Record::new("s", x.clone(), 1000.0, Source::Synthetic).unwrap();
        let y = remove_spikes(&r, 0.5).unwrap();
        assert_eq!(y.samples()[2345], 0.0);
        let same = x.iter().zip(y.samples()).filter(|(a, b)| a == b).count();
        assert!(same as f64 > 0.95 * x.len() as f64);
    }

    #[test]
    fn silence_untouched() {
        let r = Record::new("s", vec![0.0; 3000], 1000.0, Source::Synthetic).unwrap();
        assert_eq!(remove_spikes(&r, 0.5).unwrap().samples(), r.samples());
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
