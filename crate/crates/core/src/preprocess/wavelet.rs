use crate::error::{Error, Result};
use crate::signal::Record;

/// Analysis and synthesis filter quadruple of a discrete wavelet.
#[derive(Debug, Clone, Copy)]
pub struct Wavelet {
    pub name: &'static str,
    pub dec_lo: &'static [f64],
    pub dec_hi: &'static [f64],
    pub rec_lo: &'static [f64],
    pub rec_hi: &'static [f64],
    /// Group delay of the analysis filters in samples.
    pub delay: f64,
}

pub const RBIO3_9: Wavelet = Wavelet {
    name: "rbio3.9",
    dec_lo: &[
        0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0,
        0.1767766952966369, 0.5303300858899106, 0.5303300858899106, 0.1767766952966369,
        0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0,
    ],
    dec_hi: &[
        0.0006797443727836989, 0.002039233118351097, -0.005060319219611981, -0.020618912641105536,
        0.014112787930175844, 0.09913478249423216, -0.012300136269419315, -0.32019196836077857,
        -0.0020500227115698858, 0.9421257006782068, -0.9421257006782068, 0.0020500227115698858,
        0.32019196836077857, 0.012300136269419315, -0.09913478249423216, -0.014112787930175844,
        0.020618912641105536, 0.005060319219611981, -0.002039233118351097, -0.0006797443727836989,
    ],
    rec_lo: &[
        -0.0006797443727836989, 0.002039233118351097, 0.005060319219611981, -0.020618912641105536,
        -0.014112787930175844, 0.09913478249423216, 0.012300136269419315, -0.32019196836077857,
        0.0020500227115698858, 0.9421257006782068, 0.9421257006782068, 0.0020500227115698858,
        -0.32019196836077857, 0.012300136269419315, 0.09913478249423216, -0.014112787930175844,
        -0.020618912641105536, 0.005060319219611981, 0.002039233118351097, -0.0006797443727836989,
    ],
    rec_hi: &[
        0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0,
        0.1767766952966369, -0.5303300858899106, 0.5303300858899106, -0.1767766952966369,
        0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0,
    ],
    delay: 9.5,
};

pub const DB4: Wavelet = Wavelet {
    name: "db4",
    dec_lo: &[
        -0.010597401785069032, 0.0328830116668852, 0.030841381835560764, -0.18703481171909309,
        -0.027983769416859854, 0.6308807679298589, 0.7148465705529157, 0.2303778133088965,
    ],
    dec_hi: &[
        -0.2303778133088965, 0.7148465705529157, -0.6308807679298589, -0.027983769416859854,
        0.18703481171909309, 0.030841381835560764, -0.0328830116668852, -0.010597401785069032,
    ],
    rec_lo: &[
        0.2303778133088965, 0.7148465705529157, 0.6308807679298589, -0.027983769416859854,
        -0.18703481171909309, 0.030841381835560764, 0.0328830116668852, -0.010597401785069032,
    ],
    rec_hi: &[
        -0.010597401785069032, -0.0328830116668852, 0.030841381835560764, 0.18703481171909309,
        -0.027983769416859854, -0.6308807679298589, 0.7148465705529157, -0.2303778133088965,
    ],
    delay: 3.5,
};

/// One periodized analysis step; `x.len()` must be even.
pub fn dwt_step(x: &[f64], w: &Wavelet) -> (Vec<f64>, Vec<f64>) {
    let n = x.len();
    let half = n / 2;
    let mut a = vec![0.0; half];
    let mut d = vec![0.0; half];
    for k in 0..half {
        for (j, (&lo, &hi)) in w.dec_lo.iter().zip(w.dec_hi).enumerate() {
            let idx = (2 * k + n * w.dec_lo.len() - j) % n;
            a[k] += lo * x[idx];
            d[k] += hi * x[idx];
        }
    }
    (a, d)
}

/// Inverse of [`dwt_step`].
pub fn idwt_step(a: &[f64], d: &[f64], w: &Wavelet) -> Vec<f64> {
    let n = 2 * a.len();
    let l = w.rec_lo.len();
    let mut y = vec![0.0; n];
    for k in 0..a.len() {
        for (j, (&lo, &hi)) in w.rec_lo.iter().zip(w.rec_hi).enumerate() {
            let idx = (2 * k + j + n * l - (l - 1)) % n;
            y[idx] += a[k] * lo + d[k] * hi;
        }
    }
    y
}

/// Multi-level decomposition. Returns the final approximation and the
/// details `[d1, d2, ..., d_level]` (finest first). The length must be a
/// multiple of `2^level`.
pub fn wavedec(x: &[f64], w: &Wavelet, level: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let block = 1usize << level;
    if level == 0 || x.is_empty() || !x.len().is_multiple_of(block) {
        return Err(Error::input(format!(
            "length {} is not a positive multiple of 2^{level}",
            x.len()
        )));
    }
    let mut a = x.to_vec();
    let mut details = Vec::with_capacity(level);
    for _ in 0..level {
        let (na, d) = dwt_step(&a, w);
        details.push(d);
        a = na;
    }
    Ok((a, details))
}

pub fn waverec(approx: &[f64], details: &[Vec<f64>], w: &Wavelet) -> Vec<f64> {
    let mut a = approx.to_vec();
    for d in details.iter().rev() {
        a = idwt_step(&a, d, w);
    }
    a
}

/// Extends `x` by mirror reflection (without repeating the edge sample) to
/// the next multiple of `block`.
pub fn pad_reflect(x: &[f64], block: usize) -> Vec<f64> {
    let n = x.len();
    let target = n.div_ceil(block) * block;
    let mut out = x.to_vec();
    let mut i = 0;
    while out.len() < target {
        let period = 2 * (n.max(2) - 1);
        let m = (n + i) % period;
        let src = if m < n { m } else { period - m };
        out.push(x[src.min(n - 1)]);
        i += 1;
    }
    out
}

/// Detail level whose lower band edge `fs / 2^(level+1)` is closest to 40 Hz.
pub fn default_dwt_level(fs: f64) -> usize {
    (1..=8)
        .min_by(|&a, &b| {
            let da = (fs / 2f64.powi(a as i32 + 1) - 40.0).abs();
            let db = (fs / 2f64.powi(b as i32 + 1) - 40.0).abs();
            da.total_cmp(&db)
        })
        .unwrap_or(1)
}

/// Absolute value of the rbio3.9 detail coefficients at `level`, held and
/// delay-aligned back onto the sample grid of `rec`.
pub fn dwt_detail_envelope(rec: &Record, level: usize) -> Result<Vec<f64>> {
    let w = &RBIO3_9;
    let block = 1usize << level;
    if level == 0 || rec.len() < 2 * block {
        return Err(Error::input(format!(
            "record of {} samples is too short for a level-{level} decomposition",
            rec.len()
        )));
    }
    let padded = pad_reflect(rec.samples(), block);
    let (_, details) = wavedec(&padded, w, level)?;
    let d = &details[level - 1];
    let mut delay = 0.0;
    for j in 0..level {
        delay += w.delay * (1usize << j) as f64;
    }
    Ok((0..rec.len())
        .map(|n| {
            let k = ((n as f64 + delay) / block as f64).round() as usize;
            d[k % d.len()].abs()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::Source;
    use rand::{Rng, SeedableRng};

    #[test]
    fn perfect_reconstruction() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for w in [&RBIO3_9, &DB4] {
            for _ in 0..20 {
                let level = rng.random_range(1..5);
                let n = (1usize << level) * rng.random_range(3..40);
                let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
                let (a, d) = wavedec(&x, w, level).unwrap();
                let y = waverec(&a, &d, w);
                for (p, q) in x.iter().zip(&y) {
                    assert!((p - q).abs() < 1e-8, "{} level {level}", w.name);
                }
            }
        }
    }

    #[test]
    fn filter_tables_are_consistent() {
        for w in [&RBIO3_9, &DB4] {
            let s: f64 = w.dec_lo.iter().sum();
            assert!((s - 2f64.sqrt()).abs() < 1e-12, "{}", w.name);
            assert!(w.dec_hi.iter().sum::<f64>().abs() < 1e-12);
            assert_eq!(w.dec_lo.len(), w.rec_hi.len());
        }
    }

    #[test]
    fn level_rule() {
        assert_eq!(default_dwt_level(333.0), 2);
        assert_eq!(default_dwt_level(1000.0), 4);
    }

    #[test]
    fn reflect_padding() {
        assert_eq!(pad_reflect(&[1.0, 2.0, 3.0], 4), vec![1.0, 2.0, 3.0, 2.0]);
        assert_eq!(pad_reflect(&[1.0, 2.0, 3.0, 4.0], 4), vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(pad_reflect(&[1.0, 2.0, 3.0], 8).len(), 8);
    }

    #[test]
    fn detail_envelope_basics() {
        let r = Record::new("w", vec![0.0; 500], 333.0, Source::Synthetic).unwrap();
        let e = dwt_detail_envelope(&r, 2).unwrap();
        assert_eq!(e.len(), 500);
        assert!(e.iter().all(|&v| v == 0.0));
        let short = Record::new("w", vec![0.0; 5], 333.0, Source::Synthetic).unwrap();
        assert!(dwt_detail_envelope(&short, 2).is_err());
    }

    #[test]
    fn detail_envelope_is_aligned() {
        let fs = 333.0;
        let mut x = vec![0.0; 999];
        let c = 500;
        for (i, v) in x.iter_mut().enumerate() {
            let t = (i as f64 - c as f64) / fs;
            *v = (-t * t / (2.0 * 0.01f64.powi(2))).exp() * (2.0 * std::f64::consts::PI * 55.0 * t).cos();
        }
        let r = Record::new("w", x, fs, Source::Synthetic).unwrap();
        let e = dwt_detail_envelope(&r, 2).unwrap();
        let peak = e
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert!((peak as isize - c as isize).abs() <= 8, "peak at {peak}");
        assert!(e.iter().all(|&v| v >= 0.0));
    }
}
