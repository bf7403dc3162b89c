//! Epsilon-insensitive support vector regression with an RBF kernel.
//!
//! Solved in the dual by coordinate descent over `beta_i in [-C, C]`:
//! `min 1/2 b'Kb - y'b + eps ||b||_1`, with the bias absorbed into the kernel
//! (`K + 1`). Inputs and targets are standardized internally.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Standardizer;
use crate::error::{Error, Result};
use crate::linalg::mean;
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvrConfig {
    pub c: f64,
    pub epsilon: f64,
    /// RBF `gamma` in `exp(-gamma ||x - x'||^2)`; `None` uses the inverse median
    /// squared pairwise distance of the standardized training inputs.
    pub gamma: Option<f64>,
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for SvrConfig {
    fn default() -> Self {
        Self {
            c: 1.0,
            epsilon: 0.1,
            gamma: None,
            tol: 1e-3,
            max_sweeps: 2000,
        }
    }
}

impl SvrConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0) || self.epsilon < 0.0 || !(self.tol > 0.0) || self.max_sweeps == 0 {
            return Err(Error::Config(
                "svr: C > 0, epsilon >= 0, tol > 0 and max_sweeps >= 1 required".into(),
            ));
        }
        if self.gamma.is_some_and(|g| !(g > 0.0)) {
            return Err(Error::Config("svr: gamma must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvrModel {
    pub standardizer: Standardizer,
    pub y_mean: f64,
    pub y_scale: f64,
    pub gamma: f64,
    /// Standardized support vectors and their dual coefficients.
    pub support: Matrix,
    pub beta: Vec<f64>,
    pub sweeps: usize,
    pub kkt_violation: f64,
}

#[inline]
fn rbf(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(u, v)| (u - v).powi(2)).sum();
    (-gamma * d2).exp()
}

/// Inverse of the median squared distance over (a deterministic subsample of) pairs.
pub fn median_gamma(xs: &Matrix) -> f64 {
    let n = xs.rows();
    let stride = n.div_ceil(400).max(1);
    let idx: Vec<usize> = (0..n).step_by(stride).collect();
    let mut d2 = Vec::with_capacity(idx.len() * idx.len() / 2);
    for (a, &i) in idx.iter().enumerate() {
        for &j in &idx[a + 1..] {
            d2.push(
                xs.row(i)
                    .iter()
                    .zip(xs.row(j))
                    .map(|(u, v)| (u - v).powi(2))
                    .sum::<f64>(),
            );
        }
    }
    if d2.is_empty() {
        return 1.0;
    }
    let mid = d2.len() / 2;
    d2.select_nth_unstable_by(mid, f64::total_cmp);
    let med = d2[mid];
    if med > 0.0 {
        1.0 / med
    } else {
        1.0
    }
}

/// Largest violation of the dual optimality conditions for coordinate `i`.
#[inline]
fn violation(beta: f64, grad: f64, c: f64, eps: f64) -> f64 {
    if beta > 0.0 && beta < c {
        (grad + eps).abs()
    } else if beta < 0.0 && beta > -c {
        (grad - eps).abs()
    } else if beta == 0.0 {
        (grad.abs() - eps).max(0.0)
    } else if beta >= c {
        // only decreasing is feasible
        (grad + eps).max(0.0)
    } else {
        (eps - grad).max(0.0)
    }
}

pub fn fit_svr(x: &Matrix, y: &[f64], cfg: &SvrConfig, seed: u64) -> Result<SvrModel> {
    cfg.validate()?;
    let n = x.rows();
    let standardizer = Standardizer::fit(x);
    let xs = standardizer.transform(x);
    let y_mean = mean(y);
    let sd = (y.iter().map(|v| (v - y_mean).powi(2)).sum::<f64>() / n as f64).sqrt();
    let y_scale = if sd > 0.0 { sd } else { 1.0 };
    let ys: Vec<f64> = y.iter().map(|v| (v - y_mean) / y_scale).collect();
    let gamma = cfg.gamma.unwrap_or_else(|| median_gamma(&xs));

    let mut k = vec![0.0; n * n];
    for i in 0..n {
        k[i * n + i] = 2.0;
        for j in 0..i {
            let v = rbf(xs.row(i), xs.row(j), gamma) + 1.0;
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
    }

    let (c, eps) = (cfg.c, cfg.epsilon);
    let mut beta = vec![0.0; n];
    // grad = K beta - y
    let mut grad: Vec<f64> = ys.iter().map(|v| -v).collect();
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sweeps = 0;
    let mut worst = f64::INFINITY;
    while sweeps < cfg.max_sweeps {
        worst = (0..n).map(|i| violation(beta[i], grad[i], c, eps)).fold(0.0, f64::max);
        if worst < cfg.tol {
            break;
        }
        sweeps += 1;
        order.shuffle(&mut rng);
        for &i in &order {
            let kii = k[i * n + i];
            let u = kii * beta[i] - grad[i];
            let shrunk = if u > eps {
                u - eps
            } else if u < -eps {
                u + eps
            } else {
                0.0
            };
            let new = (shrunk / kii).clamp(-c, c);
            let delta = new - beta[i];
            if delta != 0.0 {
                beta[i] = new;
                let row = &k[i * n..(i + 1) * n];
                grad.iter_mut().zip(row).for_each(|(g, kij)| *g += delta * kij);
            }
        }
    }
    if worst >= cfg.tol {
        worst = (0..n).map(|i| violation(beta[i], grad[i], c, eps)).fold(0.0, f64::max);
        if worst >= cfg.tol {
            log::warn!("svr: KKT violation {worst:.2e} after {sweeps} sweeps");
        }
    }

    let support_idx: Vec<usize> = (0..n).filter(|&i| beta[i] != 0.0).collect();
    Ok(SvrModel {
        support: xs.select_rows(&support_idx),
        beta: support_idx.iter().map(|&i| beta[i]).collect(),
        standardizer,
        y_mean,
        y_scale,
        gamma,
        sweeps,
        kkt_violation: worst,
    })
}

impl SvrModel {
    pub fn predict(&self, x: &Matrix) -> Vec<f64> {
        let mut q = vec![0.0; x.cols()];
        x.iter_rows()
            .map(|row| {
                q.copy_from_slice(row);
                self.standardizer.transform_row_in_place(&mut q);
                let f: f64 = self
                    .support
                    .iter_rows()
                    .zip(&self.beta)
                    .map(|(s, b)| b * (rbf(s, &q, self.gamma) + 1.0))
                    .sum();
                self.y_mean + self.y_scale * f
            })
            .collect()
    }
}
