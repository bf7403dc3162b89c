//! L1-penalized least squares by cyclic coordinate descent.
//!
//! The solver works on standardized predictors and a centred target, minimizing
//! `(1/2n)||y - X b||^2 + lambda ||b||_1`. The learner wraps it in a
//! log-spaced lambda path with warm starts and picks lambda by K-fold CV.

use serde::{Deserialize, Serialize};

use super::Standardizer;
use crate::error::{Error, Result};
use crate::linalg::mean;
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LassoConfig {
    pub n_lambda: usize,
    /// Smallest lambda as a fraction of lambda_max.
    pub lambda_min_ratio: f64,
    pub cv_folds: usize,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for LassoConfig {
    fn default() -> Self {
        Self {
            n_lambda: 100,
            lambda_min_ratio: 1e-4,
            cv_folds: 10,
            tol: 1e-7,
            max_iter: 10_000,
        }
    }
}

impl LassoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_lambda == 0 || self.cv_folds < 2 || self.max_iter == 0 {
            return Err(Error::Config(
                "lasso: n_lambda, cv_folds >= 2 and max_iter must be positive".into(),
            ));
        }
        if !(self.lambda_min_ratio > 0.0 && self.lambda_min_ratio < 1.0) || !(self.tol > 0.0) {
            return Err(Error::Config(
                "lasso: lambda_min_ratio must lie in (0, 1) and tol > 0".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoModel {
    pub intercept: f64,
    /// Coefficients on the original predictor scale.
    pub coef: Vec<f64>,
    pub lambda: f64,
    pub lambda_path: Vec<f64>,
    pub cv_mse: Vec<f64>,
}

impl LassoModel {
    pub fn predict(&self, x: &Matrix) -> Vec<f64> {
        x.iter_rows()
            .map(|row| self.intercept + row.iter().zip(&self.coef).map(|(a, b)| a * b).sum::<f64>())
            .collect()
    }
}

#[inline]
pub fn soft_threshold(z: f64, gamma: f64) -> f64 {
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

/// Sufficient statistics `X'X/n` and `X'y/n` for the covariance-update solver.
struct Gram {
    d: usize,
    xtx: Vec<f64>,
    xty: Vec<f64>,
}

impl Gram {
    fn new(x: &Matrix, y: &[f64]) -> Self {
        let (n, d) = (x.rows(), x.cols());
        let mut xtx = vec![0.0; d * d];
        let mut xty = vec![0.0; d];
        for (i, row) in x.iter_rows().enumerate() {
            for a in 0..d {
                xty[a] += row[a] * y[i];
                for b in a..d {
                    xtx[a * d + b] += row[a] * row[b];
                }
            }
        }
        let nf = n as f64;
        for a in 0..d {
            xty[a] /= nf;
            for b in a..d {
                xtx[a * d + b] /= nf;
                xtx[b * d + a] = xtx[a * d + b];
            }
        }
        Self { d, xtx, xty }
    }

    fn lambda_max(&self) -> f64 {
        self.xty.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Runs coordinate descent from `beta` in place; returns sweeps used.
    fn solve(&self, lambda: f64, tol: f64, max_iter: usize, beta: &mut [f64]) -> Result<usize> {
        let d = self.d;
        for sweep in 1..=max_iter {
            let mut max_change: f64 = 0.0;
            for j in 0..d {
                let gjj = self.xtx[j * d + j];
                if gjj == 0.0 {
                    beta[j] = 0.0;
                    continue;
                }
                let row = &self.xtx[j * d..(j + 1) * d];
                let fitted: f64 = row.iter().zip(beta.iter()).map(|(g, b)| g * b).sum();
                let rho = self.xty[j] - fitted + gjj * beta[j];
                let new = soft_threshold(rho, lambda) / gjj;
                max_change = max_change.max((new - beta[j]).abs());
                beta[j] = new;
            }
            if max_change < tol {
                return Ok(sweep);
            }
            if sweep == max_iter {
                return Err(Error::Convergence {
                    iterations: max_iter,
                    max_change,
                    last_iterate: beta.to_vec(),
                });
            }
        }
        unreachable!("max_iter is positive")
    }
}

fn check_standardized(x: &Matrix, y: &[f64]) -> Result<()> {
    const TOL: f64 = 1e-6;
    let n = x.rows() as f64;
    for j in 0..x.cols() {
        let col = x.column(j);
        let m = col.iter().sum::<f64>() / n;
        let v = col.iter().map(|c| (c - m).powi(2)).sum::<f64>() / n;
        let constant = v <= TOL * TOL;
        if m.abs() > TOL || (!constant && (v - 1.0).abs() > TOL) {
            return Err(Error::NotStandardized {
                column: j,
                mean: m,
                variance: v,
            });
        }
    }
    let ym = mean(y);
    let ysd = (y.iter().map(|v| (v - ym).powi(2)).sum::<f64>() / n).sqrt();
    if ym.abs() > TOL * ysd.max(1.0) {
        return Err(Error::InvalidInput(format!("target is not centred (mean {ym:.3e})")));
    }
    Ok(())
}

/// Lasso coefficients for standardized `x` and centred `y` at a single `lambda`.
///
/// Stops when the largest coefficient change within a sweep falls below `tol`.
/// Columns that are identically zero get coefficient 0.
pub fn coordinate_descent_lasso(x: &Matrix, y: &[f64], lambda: f64, tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    if x.rows() != y.len() || x.rows() == 0 {
        return Err(Error::InvalidInput("lasso: row count mismatch or empty input".into()));
    }
    if !(lambda >= 0.0) || max_iter == 0 {
        return Err(Error::InvalidInput(
            "lasso: lambda must be >= 0 and max_iter > 0".into(),
        ));
    }
    check_standardized(x, y)?;
    let gram = Gram::new(x, y);
    let mut beta = vec![0.0; x.cols()];
    gram.solve(lambda, tol, max_iter, &mut beta)?;
    Ok(beta)
}

/// `lambda_max = max_j |x_j'y| / n` for standardized `x` and centred `y`.
pub fn lambda_max(x: &Matrix, y: &[f64]) -> f64 {
    Gram::new(x, y).lambda_max()
}

pub fn lambda_path(lambda_max: f64, n_lambda: usize, min_ratio: f64) -> Vec<f64> {
    if n_lambda == 1 {
        return vec![lambda_max];
    }
    let step = min_ratio.ln() / (n_lambda - 1) as f64;
    (0..n_lambda).map(|k| lambda_max * (step * k as f64).exp()).collect()
}

struct Prepared {
    standardizer: Standardizer,
    y_mean: f64,
    gram: Gram,
}

fn prepare(x: &Matrix, y: &[f64]) -> Prepared {
    let standardizer = Standardizer::fit(x);
    let mut xs = standardizer.transform(x);
    // constant columns become exactly zero
    for j in 0..x.cols() {
        let first = x.get(0, j);
        if (0..x.rows()).all(|i| x.get(i, j) == first) {
            for i in 0..xs.rows() {
                xs.set(i, j, 0.0);
            }
        }
    }
    let y_mean = mean(y);
    let yc: Vec<f64> = y.iter().map(|v| v - y_mean).collect();
    Prepared {
        gram: Gram::new(&xs, &yc),
        standardizer,
        y_mean,
    }
}

/// Walks the path with warm starts, calling `visit(k, beta)` after each lambda.
/// Non-converged lambdas keep their last iterate.
fn walk_path(gram: &Gram, path: &[f64], cfg: &LassoConfig, mut visit: impl FnMut(usize, &[f64])) {
    let mut beta = vec![0.0; gram.d];
    for (k, &lambda) in path.iter().enumerate() {
        if let Err(Error::Convergence { last_iterate, .. }) = gram.solve(lambda, cfg.tol, cfg.max_iter, &mut beta) {
            log::warn!("lasso: lambda {lambda:.3e} did not converge; keeping last iterate");
            beta = last_iterate;
        }
        visit(k, &beta);
    }
}

fn to_original(prep: &Prepared, beta: &[f64]) -> (f64, Vec<f64>) {
    let coef: Vec<f64> = beta.iter().zip(&prep.standardizer.scale).map(|(b, s)| b / s).collect();
    let intercept = prep.y_mean
        - coef
            .iter()
            .zip(&prep.standardizer.mean)
            .map(|(c, m)| c * m)
            .sum::<f64>();
    (intercept, coef)
}

pub fn fit_lasso(x: &Matrix, y: &[f64], cfg: &LassoConfig) -> Result<LassoModel> {
    let n = x.rows();
    let full = prepare(x, y);
    let lmax = full.gram.lambda_max();
    if lmax == 0.0 {
        let (intercept, coef) = to_original(&full, &vec![0.0; x.cols()]);
        return Ok(LassoModel {
            intercept,
            coef,
            lambda: 0.0,
            lambda_path: vec![0.0],
            cv_mse: vec![0.0],
        });
    }
    let path = lambda_path(lmax, cfg.n_lambda, cfg.lambda_min_ratio);

    // contiguous folds, as many as the data allow
    let k = cfg.cv_folds.min(n);
    let mut sse = vec![0.0; path.len()];
    for fold in 0..k {
        let (lo, hi) = (fold * n / k, (fold + 1) * n / k);
        let train: Vec<usize> = (0..lo).chain(hi..n).collect();
        let test: Vec<usize> = (lo..hi).collect();
        let xt = x.select_rows(&train);
        let yt: Vec<f64> = train.iter().map(|&i| y[i]).collect();
        let prep = prepare(&xt, &yt);
        let xv = x.select_rows(&test);
        walk_path(&prep.gram, &path, cfg, |step, beta| {
            let (b0, coef) = to_original(&prep, beta);
            for (r, &i) in test.iter().enumerate() {
                let row = xv.row(r);
                let pred = b0 + row.iter().zip(&coef).map(|(a, c)| a * c).sum::<f64>();
                sse[step] += (pred - y[i]).powi(2);
            }
        });
    }
    let cv_mse: Vec<f64> = sse.iter().map(|s| s / n as f64).collect();
    let best = cv_mse
        .iter()
        .enumerate()
        .fold(0, |best, (k, &v)| if v < cv_mse[best] { k } else { best });

    let mut chosen = vec![0.0; x.cols()];
    walk_path(&full.gram, &path[..=best], cfg, |step, beta| {
        if step == best {
            chosen = beta.to_vec();
        }
    });
    let (intercept, coef) = to_original(&full, &chosen);
    Ok(LassoModel {
        intercept,
        coef,
        lambda: path[best],
        lambda_path: path,
        cv_mse,
    })
}
