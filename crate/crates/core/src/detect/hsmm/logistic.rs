use serde::{Deserialize, Serialize};

use super::linalg::{cholesky, solve};
use crate::error::{Error, Result};

/// Binary logistic regression weights: `[bias, w1, .., w4]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticFit {
    pub weights: [f64; 5],
    /// Objective value after each accepted step (first entry: initial point).
    pub loss_history: Vec<f64>,
    pub converged: bool,
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn linear(w: &[f64; 5], x: &[f64; 4]) -> f64 {
    w[0] + w[1] * x[0] + w[2] * x[1] + w[3] * x[2] + w[4] * x[3]
}

fn objective(w: &[f64; 5], x: &[[f64; 4]], y: &[bool], l2: f64) -> f64 {
    let n = x.len() as f64;
    let data: f64 = x
        .iter()
        .zip(y)
        .map(|(xi, &yi)| {
            let z = linear(w, xi);
            softplus(z) - if yi { z } else { 0.0 }
        })
        .sum::<f64>()
        / n;
    data + 0.5 * l2 * w[1..].iter().map(|v| v * v).sum::<f64>()
}

/// Minimizes mean log-loss plus `l2/2 * |w|^2` (bias unpenalized) by Newton
/// steps with Armijo backtracking, until the gradient norm drops below
/// `grad_tol` or `max_iter` steps have been taken.
pub fn fit_logistic(x: &[[f64; 4]], y: &[bool], l2: f64, max_iter: usize, grad_tol: f64) -> Result<LogisticFit> {
    if x.is_empty() || x.len() != y.len() {
        return Err(Error::input("logistic regression needs matching, non-empty data"));
    }
    let n = x.len() as f64;
    let mut w = [0.0; 5];
    let mut loss = objective(&w, x, y, l2);
    let mut history = vec![loss];
    for _ in 0..max_iter {
        let mut g = [0.0; 5];
        let mut h = vec![vec![0.0; 5]; 5];
        for (xi, &yi) in x.iter().zip(y) {
            let p = sigmoid(linear(&w, xi));
            let r = p - if yi { 1.0 } else { 0.0 };
            let s = p * (1.0 - p);
            let row = [1.0, xi[0], xi[1], xi[2], xi[3]];
            for a in 0..5 {
                g[a] += r * row[a] / n;
                for b in 0..=a {
                    h[a][b] += s * row[a] * row[b] / n;
                }
            }
        }
        for a in 0..5 {
            if a > 0 {
                g[a] += l2 * w[a];
                h[a][a] += l2;
            }
            h[a][a] += 1e-12;
            for b in 0..a {
                h[b][a] = h[a][b];
            }
        }
        let gnorm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if gnorm < grad_tol {
            return Ok(LogisticFit {
                weights: w,
                loss_history: history,
                converged: true,
            });
        }
        let l = cholesky(&h).ok_or_else(|| Error::Numerical("logistic Hessian is not positive definite".into()))?;
        let step: Vec<f64> = solve(&l, &g).into_iter().map(|v| -v).collect();
        let slope: f64 = g.iter().zip(&step).map(|(a, b)| a * b).sum();
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let cand: [f64; 5] = std::array::from_fn(|i| w[i] + t * step[i]);
            let cl = objective(&cand, x, y, l2);
            if cl <= loss + 1e-4 * t * slope {
                w = cand;
                loss = cl;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            // no decrease possible at machine precision: treat as converged
            return Ok(LogisticFit {
                weights: w,
                loss_history: history,
                converged: true,
            });
        }
        history.push(loss);
    }
    Ok(LogisticFit {
        weights: w,
        loss_history: history,
        converged: false,
    })
}

pub fn predict(w: &[f64; 5], x: &[f64; 4]) -> f64 {
    sigmoid(linear(w, x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn data(seed: u64, n: usize, noise: f64) -> (Vec<[f64; 4]>, Vec<bool>) {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for _ in 0..n {
            let r: [f64; 4] = std::array::from_fn(|_| rng.random_range(-2.0..2.0));
            let z = 1.5 * r[0] - r[2] + 0.3 + noise * rng.random_range(-3.0..3.0);
            x.push(r);
            y.push(z > 0.0);
        }
        (x, y)
    }

    #[test]
    fn converges_and_separates() {
        let (x, y) = data(1, 500, 0.3);
        let fit = fit_logistic(&x, &y, 1e-4, 500, 1e-6).unwrap();
        assert!(fit.converged);
        let acc = x.iter().zip(&y).filter(|(xi, &yi)| (predict(&fit.weights, xi) > 0.5) == yi).count();
        assert!(acc as f64 > 0.8 * x.len() as f64);
        assert!(fit.weights[1] > 0.0 && fit.weights[3] < 0.0);
    }

    #[test]
    fn separable_data_stays_finite() {
        let (x, y) = data(2, 300, 0.0);
        let fit = fit_logistic(&x, &y, 1e-4, 500, 1e-6).unwrap();
        assert!(fit.weights.iter().all(|w| w.is_finite()));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn loss_never_increases(seed in 0u64..1000, noise in 0.0f64..2.0) {
            let (x, y) = data(seed, 200, noise);
            let fit = fit_logistic(&x, &y, 1e-4, 500, 1e-6).unwrap();
            for w in fit.loss_history.windows(2) {
                prop_assert!(w[1] <= w[0]);
            }
        }
    }
}
