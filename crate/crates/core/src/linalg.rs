//! Small dense solvers shared by the learners.

use nalgebra::{DMatrix, DVector};

/// Minimum-norm least-squares solution of `a * x ≈ b` via SVD.
///
/// Singular values below `max(rows, cols) * eps * s_max` are treated as zero,
/// so rank-deficient designs produce the minimum-norm solution instead of an error.
pub fn lstsq_min_norm(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    if a.ncols() == 0 {
        return DVector::zeros(0);
    }
    let svd = a.clone().svd(true, true);
    let s_max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    if s_max == 0.0 {
        return DVector::zeros(a.ncols());
    }
    let eps = s_max * (a.nrows().max(a.ncols()) as f64) * f64::EPSILON;
    svd.solve(b, eps).unwrap_or_else(|_| DVector::zeros(a.ncols()))
}

/// Solves a symmetric positive-definite system stored row-major in `a` (p × p).
///
/// The matrix is equilibrated to unit diagonal first; returns `None` when a
/// pivot falls below `1e-10`, which callers treat as a singular design.
pub fn spd_solve(a: &[f64], b: &[f64], p: usize) -> Option<Vec<f64>> {
    debug_assert_eq!(a.len(), p * p);
    let mut scale = vec![0.0; p];
    for i in 0..p {
        let d = a[i * p + i];
        if !(d > 0.0) || !d.is_finite() {
            return None;
        }
        scale[i] = 1.0 / d.sqrt();
    }
    // lower-triangular Cholesky factor of D A D
    let mut l = vec![0.0; p * p];
    for i in 0..p {
        for j in 0..=i {
            let mut s = a[i * p + j] * scale[i] * scale[j];
            for k in 0..j {
                s -= l[i * p + k] * l[j * p + k];
            }
            if i == j {
                if s < 1e-10 {
                    return None;
                }
                l[i * p + i] = s.sqrt();
            } else {
                l[i * p + j] = s / l[j * p + j];
            }
        }
    }
    let mut z: Vec<f64> = (0..p).map(|i| b[i] * scale[i]).collect();
    for i in 0..p {
        let mut s = z[i];
        for k in 0..i {
            s -= l[i * p + k] * z[k];
        }
        z[i] = s / l[i * p + i];
    }
    for i in (0..p).rev() {
        let mut s = z[i];
        for k in i + 1..p {
            s -= l[k * p + i] * z[k];
        }
        z[i] = s / l[i * p + i];
    }
    Some(z.iter().zip(&scale).map(|(v, s)| v * s).collect())
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.iter().sum::<f64>() / v.len() as f64
}

/// Population variance.
pub fn variance(v: &[f64]) -> f64 {
    let m = mean(v);
    if v.is_empty() {
        return 0.0;
    }
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64
}

pub fn mse(pred: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(pred.len(), y.len());
    pred.iter().zip(y).map(|(p, o)| (p - o).powi(2)).sum::<f64>() / y.len() as f64
}
