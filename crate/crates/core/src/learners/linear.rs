//! Ordinary least squares.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::linalg::{lstsq_min_norm, mean};
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub intercept: f64,
    pub coef: Vec<f64>,
}

impl LinearModel {
    pub fn predict(&self, x: &Matrix) -> Vec<f64> {
        x.iter_rows()
            .map(|row| self.intercept + row.iter().zip(&self.coef).map(|(a, b)| a * b).sum::<f64>())
            .collect()
    }
}

/// Least-squares fit with an unpenalized intercept.
///
/// Predictors and target are centred, then the slope vector is the
/// minimum-norm solution, so collinear lag columns never cause an error.
pub fn fit_ols(x: &Matrix, y: &[f64]) -> LinearModel {
    let (n, d) = (x.rows(), x.cols());
    let col_means: Vec<f64> = (0..d).map(|j| mean(&x.column(j))).collect();
    let y_mean = mean(y);
    let a = DMatrix::from_fn(n, d, |i, j| x.get(i, j) - col_means[j]);
    let b = DVector::from_iterator(n, y.iter().map(|v| v - y_mean));
    let beta = lstsq_min_norm(&a, &b);
    let coef: Vec<f64> = beta.iter().copied().collect();
    let intercept = y_mean - coef.iter().zip(&col_means).map(|(c, m)| c * m).sum::<f64>();
    LinearModel { intercept, coef }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn exact_line() {
        let x = Matrix::column_vector(&[1.0, 2.0, 3.0]);
        let m = fit_ols(&x, &[2.0, 4.0, 6.0]);
        assert!((m.coef[0] - 2.0).abs() < 1e-12);
        assert!(m.intercept.abs() < 1e-12);
        let pred = m.predict(&x);
        for (p, y) in pred.iter().zip([2.0, 4.0, 6.0]) {
            assert!((p - y).abs() < 1e-12);
        }
    }

    #[test]
    fn residuals_orthogonal_to_predictors() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (n, d) = (60, 4);
        let data: Vec<f64> = (0..n * d).map(|_| rng.random::<f64>() * 10.0).collect();
        let x = Matrix::new(n, d, data).unwrap();
        let y: Vec<f64> = (0..n)
            .map(|i| x.get(i, 0) - 2.0 * x.get(i, 2) + rng.random::<f64>())
            .collect();
        let m = fit_ols(&x, &y);
        let r: Vec<f64> = m.predict(&x).iter().zip(&y).map(|(p, o)| o - p).collect();
        assert!(r.iter().sum::<f64>().abs() < 1e-8);
        for j in 0..d {
            let ip: f64 = (0..n).map(|i| r[i] * x.get(i, j)).sum();
            assert!(ip.abs() < 1e-8, "column {j}: {ip}");
        }
    }

    #[test]
    fn collinear_columns_do_not_fail() {
        let x = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0], vec![3.0, 6.0], vec![4.0, 8.0]]).unwrap();
        let y = [1.0, 2.0, 3.0, 4.0];
        let m = fit_ols(&x, &y);
        assert!(m.coef.iter().all(|c| c.is_finite()));
        // minimum norm splits the slope as 1:2 between the columns
        assert!((m.coef[1] - 2.0 * m.coef[0]).abs() < 1e-10);
        for (p, o) in m.predict(&x).iter().zip(&y) {
            assert!((p - o).abs() < 1e-10);
        }
    }
}
