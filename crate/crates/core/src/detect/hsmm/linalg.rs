//! Small dense symmetric positive-definite helpers.

use std::f64::consts::PI;

pub type Matrix = Vec<Vec<f64>>;

/// Lower Cholesky factor, or `None` when `a` is not positive definite.
pub fn cholesky(a: &Matrix) -> Option<Matrix> {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let d = a[i][i] - s;
                if !(d > 0.0) {
                    return None;
                }
                l[i][j] = d.sqrt();
            } else {
                l[i][j] = (a[i][j] - s) / l[j][j];
            }
        }
    }
    Some(l)
}

/// Solves `L y = b` by forward substitution.
pub fn forward(l: &Matrix, b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut y = vec![0.0; n];
    for i in 0..n {
        let s: f64 = (0..i).map(|k| l[i][k] * y[k]).sum();
        y[i] = (b[i] - s) / l[i][i];
    }
    y
}

/// Solves `A x = b` given the Cholesky factor `L` of `A`.
pub fn solve(l: &Matrix, b: &[f64]) -> Vec<f64> {
    let y = forward(l, b);
    let n = y.len();
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| l[k][i] * x[k]).sum();
        x[i] = (y[i] - s) / l[i][i];
    }
    x
}

/// Multivariate normal log density with a precomputed Cholesky factor.
#[derive(Debug, Clone)]
pub struct Gaussian {
    mean: Vec<f64>,
    chol: Matrix,
    log_norm: f64,
}

impl Gaussian {
    pub fn new(mean: &[f64], cov: &Matrix) -> Option<Self> {
        let chol = cholesky(cov)?;
        let d = mean.len() as f64;
        let log_det: f64 = 2.0 * chol.iter().enumerate().map(|(i, r)| r[i].ln()).sum::<f64>();
        Some(Gaussian {
            mean: mean.to_vec(),
            chol,
            log_norm: -0.5 * (d * (2.0 * PI).ln() + log_det),
        })
    }

    pub fn log_pdf(&self, x: &[f64]) -> f64 {
        let diff: Vec<f64> = x.iter().zip(&self.mean).map(|(a, b)| a - b).collect();
        let z = forward(&self.chol, &diff);
        self.log_norm - 0.5 * z.iter().map(|v| v * v).sum::<f64>()
    }
}

/// Sample mean and (population) covariance of `rows`, plus `reg` on the diagonal.
pub fn mean_cov(rows: &[[f64; 4]], reg: f64) -> ([f64; 4], [[f64; 4]; 4]) {
    let n = rows.len().max(1) as f64;
    let mut mean = [0.0; 4];
    for r in rows {
        for k in 0..4 {
            mean[k] += r[k] / n;
        }
    }
    let mut cov = [[0.0; 4]; 4];
    for r in rows {
        for i in 0..4 {
            for j in 0..4 {
                cov[i][j] += (r[i] - mean[i]) * (r[j] - mean[j]) / n;
            }
        }
    }
    for (i, row) in cov.iter_mut().enumerate() {
        row[i] += reg;
    }
    (mean, cov)
}

pub fn to_matrix(a: &[[f64; 4]; 4]) -> Matrix {
    a.iter().map(|r| r.to_vec()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solve_spd() {
        let a = vec![vec![4.0, 2.0, 0.6], vec![2.0, 5.0, 1.0], vec![0.6, 1.0, 3.0]];
        let l = cholesky(&a).unwrap();
        let x = solve(&l, &[1.0, 2.0, 3.0]);
        for i in 0..3 {
            let r: f64 = (0..3).map(|j| a[i][j] * x[j]).sum();
            assert!((r - [1.0, 2.0, 3.0][i]).abs() < 1e-12);
        }
        assert!(cholesky(&vec![vec![1.0, 2.0], vec![2.0, 1.0]]).is_none());
    }

    #[test]
    fn standard_normal_density() {
        let g = Gaussian::new(&[0.0, 0.0], &vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert!((g.log_pdf(&[0.0, 0.0]) + (2.0 * PI).ln()).abs() < 1e-12);
        assert!((g.log_pdf(&[1.0, 0.0]) + (2.0 * PI).ln() + 0.5).abs() < 1e-12);
    }
}
