use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::Record;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterKind {
    Lowpass,
    Highpass,
    Bandpass,
    Bandstop,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterDesign {
    Butterworth,
}

/// Pass band of a filter in Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "hz", rename_all = "lowercase")]
pub enum Band {
    Lowpass(f64),
    Highpass(f64),
    Bandpass(f64, f64),
    Bandstop(f64, f64),
}

impl Band {
    pub fn kind(&self) -> FilterKind {
        match self {
            Band::Lowpass(_) => FilterKind::Lowpass,
            Band::Highpass(_) => FilterKind::Highpass,
            Band::Bandpass(..) => FilterKind::Bandpass,
            Band::Bandstop(..) => FilterKind::Bandstop,
        }
    }

    pub fn cutoffs(&self) -> Vec<f64> {
        match *self {
            Band::Lowpass(f) | Band::Highpass(f) => vec![f],
            Band::Bandpass(lo, hi) | Band::Bandstop(lo, hi) => vec![lo, hi],
        }
    }
}

/// Limits the upper edge of a band to `0.45 * fs`, warning when it moves.
///
/// A band pass whose lower edge is also above the limit cannot be rescued and
/// is returned unchanged so that the design step reports it.
pub fn clamp_band(band: Band, fs: f64) -> Band {
    let limit = 0.45 * fs;
    let clamp = |f: f64, what: &str| {
        if f > limit {
            log::warn!("{what} cutoff {f} Hz exceeds 0.45*fs at fs {fs} Hz; clamped to {limit} Hz");
            limit
        } else {
            f
        }
    };
    match band {
        Band::Lowpass(f) => Band::Lowpass(clamp(f, "low-pass")),
        Band::Highpass(f) => Band::Highpass(f),
        Band::Bandpass(lo, hi) if lo < limit => Band::Bandpass(lo, clamp(hi, "band-pass upper")),
        Band::Bandstop(lo, hi) if lo < limit => Band::Bandstop(lo, clamp(hi, "band-stop upper")),
        other => other,
    }
}

/// One second-order section, `b0 + b1 z^-1 + b2 z^-2` over `1 + a1 z^-1 + a2 z^-2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 3],
}

impl Biquad {
    fn response(&self, z_inv: Complex64) -> Complex64 {
        let z2 = z_inv * z_inv;
        (self.b[0] + self.b[1] * z_inv + self.b[2] * z2) / (self.a[0] + self.a[1] * z_inv + self.a[2] * z2)
    }

    fn dc_gain(&self) -> f64 {
        (self.b[0] + self.b[1] + self.b[2]) / (self.a[0] + self.a[1] + self.a[2])
    }

    /// Direct-form II transposed state for a unit step held since forever.
    fn step_state(&self) -> [f64; 2] {
        let g = self.dc_gain();
        let z2 = self.b[2] - self.a[2] * g;
        let z1 = self.b[1] - self.a[1] * g + z2;
        [z1, z2]
    }

    fn run(&self, x: &mut [f64], mut z: [f64; 2]) {
        let [b0, b1, b2] = self.b;
        let [_, a1, a2] = self.a;
        for v in x.iter_mut() {
            let y = b0 * *v + z[0];
            z[0] = b1 * *v - a1 * y + z[1];
            z[1] = b2 * *v - a2 * y;
            *v = y;
        }
    }
}

/// A designed digital IIR filter.
///
/// The coefficient polynomials `b`, `a` (with `a[0] == 1`) describe the
/// transfer function; filtering itself runs through cascaded second-order
/// sections, which stay well conditioned at high orders and narrow bands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    pub kind: FilterKind,
    pub design: FilterDesign,
    pub order: usize,
    pub cutoffs: Vec<f64>,
    pub fs: f64,
    pub b: Vec<f64>,
    pub a: Vec<f64>,
    sections: Vec<Biquad>,
    poles: Vec<(f64, f64)>,
}

impl FilterSpec {
    pub fn sections(&self) -> &[Biquad] {
        &self.sections
    }

    pub fn poles(&self) -> Vec<Complex64> {
        self.poles.iter().map(|&(re, im)| Complex64::new(re, im)).collect()
    }

    pub fn is_stable(&self) -> bool {
        self.poles.iter().all(|&(re, im)| re.hypot(im) < 1.0)
    }

    /// Complex frequency response at `f` Hz.
    pub fn response(&self, f: f64) -> Complex64 {
        let z_inv = Complex64::from_polar(1.0, -2.0 * PI * f / self.fs);
        self.sections.iter().map(|s| s.response(z_inv)).product()
    }

    pub fn magnitude(&self, f: f64) -> f64 {
        self.response(f).norm()
    }

    /// Causal single-pass filtering from rest.
    pub fn filter(&self, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        for s in &self.sections {
            s.run(&mut y, [0.0; 2]);
        }
        y
    }

    /// Forward-backward filtering with odd-extension padding and
    /// steady-state initial conditions at both ends.
    pub fn filtfilt(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        if n == 0 {
            return Vec::new();
        }
        let pad = (3 * (2 * self.sections.len() + 1)).min(n - 1);
        let mut ext = Vec::with_capacity(n + 2 * pad);
        ext.extend((1..=pad).rev().map(|i| 2.0 * x[0] - x[i]));
        ext.extend_from_slice(x);
        ext.extend((1..=pad).map(|i| 2.0 * x[n - 1] - x[n - 1 - i]));

        self.run_steady(&mut ext);
        ext.reverse();
        self.run_steady(&mut ext);
        ext.reverse();
        ext[pad..pad + n].to_vec()
    }

    fn run_steady(&self, x: &mut [f64]) {
        let mut level = x[0];
        for s in &self.sections {
            let [z1, z2] = s.step_state();
            s.run(x, [z1 * level, z2 * level]);
            level *= s.dc_gain();
        }
    }
}

/// Designs a Butterworth filter by the bilinear transform of the analog
/// prototype, with prewarped band edges.
pub fn design_butterworth(band: Band, order: usize, fs: f64) -> Result<FilterSpec> {
    if !(1..=10).contains(&order) {
        return Err(Error::config("order", format!("must be in 1..=10, got {order}")));
    }
    if !(fs > 0.0) {
        return Err(Error::config("fs", "must be positive"));
    }
    let cutoffs = band.cutoffs();
    for &f in &cutoffs {
        if !(f > 0.0 && f < fs / 2.0) {
            return Err(Error::config(
                "cutoff",
                format!("{f} Hz must lie strictly between 0 and fs/2 = {} Hz", fs / 2.0),
            ));
        }
    }
    if cutoffs.len() == 2 && cutoffs[0] >= cutoffs[1] {
        return Err(Error::config("cutoff", "band edges must be increasing"));
    }

    let warp = |f: f64| 2.0 * fs * (PI * f / fs).tan();
    let (z, p, k) = prototype(order);
    let (z, p, k) = match band {
        Band::Lowpass(f) => lp2lp(&z, &p, k, warp(f)),
        Band::Highpass(f) => lp2hp(&z, &p, k, warp(f)),
        Band::Bandpass(lo, hi) => {
            let (wl, wh) = (warp(lo), warp(hi));
            lp2bp(&z, &p, k, (wl * wh).sqrt(), wh - wl)
        }
        Band::Bandstop(lo, hi) => {
            let (wl, wh) = (warp(lo), warp(hi));
            lp2bs(&z, &p, k, (wl * wh).sqrt(), wh - wl)
        }
    };
    let (z, p, k) = bilinear(&z, &p, k, fs);
    let sections = to_sections(&z, &p, k);
    let (b, a) = expand(&sections);
    let spec = FilterSpec {
        kind: band.kind(),
        design: FilterDesign::Butterworth,
        order,
        cutoffs,
        fs,
        b,
        a,
        sections,
        poles: p.iter().map(|c| (c.re, c.im)).collect(),
    };
    if !spec.is_stable() {
        return Err(Error::Numerical("designed filter has a pole on or outside the unit circle".into()));
    }
    Ok(spec)
}

/// Applies `spec` to a record; `zero_phase` selects forward-backward filtering.
pub fn apply_filter(spec: &FilterSpec, rec: &Record, zero_phase: bool) -> Result<Record> {
    if (spec.fs - rec.fs()).abs() > 1e-9 * rec.fs() {
        return Err(Error::config(
            "fs",
            format!("filter designed for {} Hz applied to a {} Hz record", spec.fs, rec.fs()),
        ));
    }
    if !spec.is_stable() {
        return Err(Error::Numerical("filter is unstable".into()));
    }
    let y = if zero_phase {
        spec.filtfilt(rec.samples())
    } else {
        spec.filter(rec.samples())
    };
    rec.with_samples(y, rec.fs())
}

/// Clamps the band, designs the filter at the record rate and applies it zero-phase.
pub fn bandpass_record(rec: &Record, band: Band, order: usize) -> Result<Record> {
    let spec = design_butterworth(clamp_band(band, rec.fs()), order, rec.fs())?;
    apply_filter(&spec, rec, true)
}

type Zpk = (Vec<Complex64>, Vec<Complex64>, f64);

fn prototype(order: usize) -> Zpk {
    let n = order as f64;
    let p = (0..order)
        .map(|k| {
            let theta = PI * (2.0 * k as f64 + n + 1.0) / (2.0 * n);
            Complex64::from_polar(1.0, theta)
        })
        .collect();
    (Vec::new(), p, 1.0)
}

fn lp2lp(z: &[Complex64], p: &[Complex64], k: f64, wo: f64) -> Zpk {
    let degree = (p.len() - z.len()) as i32;
    (
        z.iter().map(|&v| v * wo).collect(),
        p.iter().map(|&v| v * wo).collect(),
        k * wo.powi(degree),
    )
}

fn lp2hp(z: &[Complex64], p: &[Complex64], k: f64, wo: f64) -> Zpk {
    let degree = p.len() - z.len();
    let mut zh: Vec<Complex64> = z.iter().map(|&v| wo / v).collect();
    zh.extend(std::iter::repeat_n(Complex64::new(0.0, 0.0), degree));
    let ph = p.iter().map(|&v| wo / v).collect();
    let num: Complex64 = z.iter().map(|&v| -v).product();
    let den: Complex64 = p.iter().map(|&v| -v).product();
    (zh, ph, k * (num / den).re)
}

fn lp2bp(z: &[Complex64], p: &[Complex64], k: f64, wo: f64, bw: f64) -> Zpk {
    let degree = p.len() - z.len();
    let split = |v: &[Complex64]| -> Vec<Complex64> {
        let scaled: Vec<Complex64> = v.iter().map(|&x| x * bw / 2.0).collect();
        let root = |x: Complex64| (x * x - wo * wo).sqrt();
        scaled
            .iter()
            .map(|&x| x + root(x))
            .chain(scaled.iter().map(|&x| x - root(x)))
            .collect()
    };
    let mut zb = split(z);
    zb.extend(std::iter::repeat_n(Complex64::new(0.0, 0.0), degree));
    (zb, split(p), k * bw.powi(degree as i32))
}

fn lp2bs(z: &[Complex64], p: &[Complex64], k: f64, wo: f64, bw: f64) -> Zpk {
    let degree = p.len() - z.len();
    let split = |v: &[Complex64]| -> Vec<Complex64> {
        let inv: Vec<Complex64> = v.iter().map(|&x| (bw / 2.0) / x).collect();
        let root = |x: Complex64| (x * x - wo * wo).sqrt();
        inv.iter()
            .map(|&x| x + root(x))
            .chain(inv.iter().map(|&x| x - root(x)))
            .collect()
    };
    let mut zs = split(z);
    zs.extend(std::iter::repeat_n(Complex64::new(0.0, wo), degree));
    zs.extend(std::iter::repeat_n(Complex64::new(0.0, -wo), degree));
    let num: Complex64 = z.iter().map(|&v| -v).product();
    let den: Complex64 = p.iter().map(|&v| -v).product();
    (zs, split(p), k * (num / den).re)
}

fn bilinear(z: &[Complex64], p: &[Complex64], k: f64, fs: f64) -> Zpk {
    let fs2 = 2.0 * fs;
    let degree = p.len() - z.len();
    let mut zd: Vec<Complex64> = z.iter().map(|&v| (fs2 + v) / (fs2 - v)).collect();
    zd.extend(std::iter::repeat_n(Complex64::new(-1.0, 0.0), degree));
    let pd = p.iter().map(|&v| (fs2 + v) / (fs2 - v)).collect();
    let num: Complex64 = z.iter().map(|&v| fs2 - v).product();
    let den: Complex64 = p.iter().map(|&v| fs2 - v).product();
    (zd, pd, k * (num / den).re)
}

/// Groups roots into conjugate pairs first, then pairs of real roots; a lone
/// real root is returned as a first-order factor.
fn pair_roots(roots: &[Complex64]) -> Vec<[f64; 3]> {
    const TOL: f64 = 1e-10;
    let mut complex: Vec<Complex64> = roots.iter().copied().filter(|r| r.im > TOL).collect();
    complex.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    let mut real: Vec<f64> = roots.iter().filter(|r| r.im.abs() <= TOL).map(|r| r.re).collect();
    real.sort_by(f64::total_cmp);

    let mut out: Vec<[f64; 3]> = complex
        .iter()
        .map(|r| [1.0, -2.0 * r.re, r.norm_sqr()])
        .collect();
    for pair in real.chunks(2) {
        match *pair {
            [r1, r2] => out.push([1.0, -(r1 + r2), r1 * r2]),
            [r] => out.push([1.0, -r, 0.0]),
            _ => unreachable!(),
        }
    }
    out
}

fn to_sections(z: &[Complex64], p: &[Complex64], k: f64) -> Vec<Biquad> {
    let pole_quads = pair_roots(p);
    let mut zero_quads = pair_roots(z);
    zero_quads.resize(pole_quads.len().max(zero_quads.len()), [1.0, 0.0, 0.0]);
    let mut sections: Vec<Biquad> = pole_quads
        .iter()
        .zip(&zero_quads)
        .map(|(&a, &b)| Biquad { b, a })
        .collect();
    if let Some(first) = sections.first_mut() {
        for c in first.b.iter_mut() {
            *c *= k;
        }
    }
    sections
}

fn poly_mul(x: &[f64], y: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; x.len() + y.len() - 1];
    for (i, a) in x.iter().enumerate() {
        for (j, b) in y.iter().enumerate() {
            out[i + j] += a * b;
        }
    }
    out
}

fn expand(sections: &[Biquad]) -> (Vec<f64>, Vec<f64>) {
    let mut b = vec![1.0];
    let mut a = vec![1.0];
    for s in sections {
        let trim = |c: &[f64; 3]| if c[2] == 0.0 { c[..2].to_vec() } else { c.to_vec() };
        b = poly_mul(&b, &trim(&s.b));
        a = poly_mul(&a, &trim(&s.a));
    }
    // first-order sections carry a trailing zero numerator coefficient when paired with a
    // first-order denominator; keep the two polynomials the same length
    let len = a.len().max(b.len());
    b.resize(len, 0.0);
    a.resize(len, 0.0);
    (b, a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::Source;

    fn rec(x: Vec<f64>, fs: f64) -> Record {
        Record::new("f", x, fs, Source::Synthetic).unwrap()
    }

    #[test]
    fn first_order_lowpass_cutoff() {
        let s = design_butterworth(Band::Lowpass(8.0), 1, 1000.0).unwrap();
        assert!((s.magnitude(8.0) - 0.5f64.sqrt()).abs() < 0.01 * 0.5f64.sqrt());
        assert_eq!(s.a[0], 1.0);
    }

    #[test]
    fn bandpass_pass_and_stop() {
        let s = design_butterworth(Band::Bandpass(15.0, 55.0), 4, 333.0).unwrap();
        assert!(s.magnitude(35.0) > 0.99);
        assert!(s.magnitude(100.0) < 0.1);
        for f in [15.0, 55.0] {
            assert!((s.magnitude(f) - 0.5f64.sqrt()).abs() < 0.007);
        }
        assert!(s.is_stable());
    }

    #[test]
    fn polynomials_match_reference_design() {
        // order 2 band-stop 25-60 Hz at 333 Hz, reference values from a
        // standard filter-design package
        let s = design_butterworth(Band::Bandstop(25.0, 60.0), 2, 333.0).unwrap();
        let b = [0.6241458, -1.83510111, 2.59717358, -1.83510111, 0.6241458];
        let a = [1.0, -2.2798519, 2.4505312, -1.39035032, 0.39493397];
        for (x, y) in s.b.iter().zip(b) {
            assert!((x - y).abs() < 1e-7, "{:?}", s.b);
        }
        for (x, y) in s.a.iter().zip(a) {
            assert!((x - y).abs() < 1e-7, "{:?}", s.a);
        }
    }

    #[test]
    fn monotone_outside_and_inside_cutoff() {
        for order in 1..=10 {
            let s = design_butterworth(Band::Lowpass(40.0), order, 333.0).unwrap();
            let mags: Vec<f64> = (1..1660).map(|i| s.magnitude(i as f64 * 0.1)).collect();
            assert!(mags.windows(2).all(|w| w[1] <= w[0] + 1e-12), "order {order}");
            assert!((s.magnitude(40.0) - 0.5f64.sqrt()).abs() < 0.007);
        }
    }

    #[test]
    fn rejects_bad_design() {
        assert!(design_butterworth(Band::Lowpass(200.0), 2, 333.0).is_err());
        assert!(design_butterworth(Band::Lowpass(20.0), 0, 333.0).is_err());
        assert!(design_butterworth(Band::Lowpass(20.0), 11, 333.0).is_err());
        assert!(design_butterworth(Band::Bandpass(50.0, 20.0), 2, 333.0).is_err());
    }

    #[test]
    fn clamping_moves_upper_edge_only() {
        assert_eq!(clamp_band(Band::Bandpass(25.0, 400.0), 333.0), Band::Bandpass(25.0, 0.45 * 333.0));
        assert_eq!(clamp_band(Band::Bandpass(25.0, 55.0), 333.0), Band::Bandpass(25.0, 55.0));
    }

    #[test]
    fn highpass_removes_dc() {
        let s = design_butterworth(Band::Highpass(35.0), 4, 333.0).unwrap();
        let y = apply_filter(&s, &rec(vec![1.0; 3000], 333.0), false).unwrap();
        assert!(y.samples()[300..].iter().all(|v| v.abs() < 1e-3));
        let y = apply_filter(&s, &rec(vec![1.0; 3000], 333.0), true).unwrap();
        assert!(y.samples().iter().all(|v| v.abs() < 1e-3));
    }

    #[test]
    fn zero_phase_has_no_lag() {
        let fs = 333.0;
        let x: Vec<f64> = (0..2000).map(|i| (2.0 * PI * 35.0 * i as f64 / fs).sin()).collect();
        let s = design_butterworth(Band::Bandpass(15.0, 55.0), 4, fs).unwrap();
        let y = apply_filter(&s, &rec(x.clone(), fs), true).unwrap();
        let xc = |lag: isize| -> f64 {
            (200..1800).map(|i| x[i] * y.samples()[(i as isize + lag) as usize]).sum()
        };
        let best = (-10..=10).max_by(|&a, &b| xc(a).total_cmp(&xc(b))).unwrap();
        assert_eq!(best, 0);
    }

    #[test]
    fn lowpass_impulse_response_obeys_parseval() {
        let s = design_butterworth(Band::Lowpass(30.0), 4, 333.0).unwrap();
        let mut x = vec![0.0; 4096];
        x[10] = 1.0;
        let y = s.filter(&x);
        let time: f64 = y.iter().map(|v| v * v).sum();
        let freq = super::super::fft::spectral_energy(&y);
        assert!((time - freq).abs() <= 1e-9 * time);
    }

    #[test]
    fn wrong_rate_is_rejected() {
        let s = design_butterworth(Band::Lowpass(30.0), 2, 1000.0).unwrap();
        assert!(apply_filter(&s, &rec(vec![0.0; 100], 333.0), true).is_err());
    }

    #[test]
    fn length_preserved() {
        let s = design_butterworth(Band::Bandpass(20.0, 50.0), 3, 333.0).unwrap();
        for n in [1, 2, 5, 50, 1000] {
            assert_eq!(s.filtfilt(&vec![0.3; n]).len(), n);
        }
    }
}
