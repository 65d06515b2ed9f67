use num_complex::Complex64;
use rustfft::FftPlanner;

/// Forward DFT of a real sequence, zero-padded (or truncated) to `n`.
pub fn forward_real(x: &[f64], n: usize) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = x.iter().take(n).map(|&v| Complex64::new(v, 0.0)).collect();
    buf.resize(n, Complex64::new(0.0, 0.0));
    forward_in_place(&mut buf);
    buf
}

pub fn forward_in_place(buf: &mut [Complex64]) {
    if buf.is_empty() {
        return;
    }
    FftPlanner::new().plan_fft_forward(buf.len()).process(buf);
}

/// Unnormalized inverse DFT (divide by `len` to invert [`forward_in_place`]).
pub fn inverse_in_place(buf: &mut [Complex64]) {
    if buf.is_empty() {
        return;
    }
    FftPlanner::new().plan_fft_inverse(buf.len()).process(buf);
}

pub fn next_pow2(n: usize) -> usize {
    n.max(1).next_power_of_two()
}

/// Energy of `x` computed in the frequency domain, `sum |X_k|^2 / N`.
pub fn spectral_energy(x: &[f64]) -> f64 {
    let n = x.len();
    if n == 0 {
        return 0.0;
    }
    forward_real(x, n).iter().map(|c| c.norm_sqr()).sum::<f64>() / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn round_trip() {
        let x = [1.0, -2.0, 0.5, 3.0, 0.0];
        let mut buf = forward_real(&x, 5);
        inverse_in_place(&mut buf);
        for (a, b) in x.iter().zip(&buf) {
            assert!((a - b.re / 5.0).abs() < 1e-12);
        }
    }

    #[test]
    fn parseval_on_random_signals() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let n = rng.random_range(2..600);
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let time: f64 = x.iter().map(|v| v * v).sum();
            let freq = spectral_energy(&x);
            assert!((time - freq).abs() <= 1e-9 * time);
        }
    }
}
