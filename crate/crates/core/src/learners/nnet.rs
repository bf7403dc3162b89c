//! Single-hidden-layer feed-forward network with logistic hidden units and a
//! linear output, trained by full-batch gradient descent on penalized squared
//! loss `sum (f - y)^2 + decay * ||w||^2`.
//!
//! Search directions come from a BFGS inverse-Hessian estimate and every step
//! is accepted by Armijo backtracking, so the loss never increases.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Standardizer;
use crate::error::{Error, Result};
use crate::linalg::{dot, mean};
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NnetConfig {
    pub hidden_units: usize,
    pub decay: f64,
    pub max_iter: usize,
    pub grad_tol: f64,
}

impl Default for NnetConfig {
    fn default() -> Self {
        Self {
            hidden_units: 5,
            decay: 1e-4,
            max_iter: 500,
            grad_tol: 1e-6,
        }
    }
}

impl NnetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_units == 0 || self.decay < 0.0 || !(self.grad_tol > 0.0) {
            return Err(Error::Config(
                "neural_net: hidden_units >= 1, decay >= 0, grad_tol > 0".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NnetModel {
    pub standardizer: Standardizer,
    pub y_mean: f64,
    pub y_scale: f64,
    pub hidden_units: usize,
    /// `[w1 (h x d, row per unit), b1 (h), w2 (h), b2]`
    pub weights: Vec<f64>,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub iterations: usize,
}

#[inline]
fn logistic(a: f64) -> f64 {
    1.0 / (1.0 + (-a).exp())
}

pub fn n_weights(d: usize, hidden: usize) -> usize {
    hidden * (d + 2) + 1
}

fn forward_row(w: &[f64], row: &[f64], hidden: usize, act: &mut [f64]) -> f64 {
    let d = row.len();
    let (w1, rest) = w.split_at(hidden * d);
    let (b1, rest) = rest.split_at(hidden);
    let (w2, b2) = rest.split_at(hidden);
    let mut out = b2[0];
    for k in 0..hidden {
        let a = b1[k] + dot(&w1[k * d..(k + 1) * d], row);
        act[k] = logistic(a);
        out += w2[k] * act[k];
    }
    out
}

/// Penalized loss and its analytic gradient with respect to `w`.
pub fn penalized_loss_and_gradient(w: &[f64], x: &Matrix, y: &[f64], hidden: usize, decay: f64) -> (f64, Vec<f64>) {
    let d = x.cols();
    let mut grad = vec![0.0; w.len()];
    let mut act = vec![0.0; hidden];
    let mut loss = 0.0;
    let (o_b1, o_w2, o_b2) = (hidden * d, hidden * d + hidden, hidden * d + 2 * hidden);
    for (i, row) in x.iter_rows().enumerate() {
        let out = forward_row(w, row, hidden, &mut act);
        let r = out - y[i];
        loss += r * r;
        let e = 2.0 * r;
        grad[o_b2] += e;
        for k in 0..hidden {
            grad[o_w2 + k] += e * act[k];
            let delta = e * w[o_w2 + k] * act[k] * (1.0 - act[k]);
            grad[o_b1 + k] += delta;
            let g = &mut grad[k * d..(k + 1) * d];
            g.iter_mut().zip(row).for_each(|(gj, xj)| *gj += delta * xj);
        }
    }
    loss += decay * dot(w, w);
    grad.iter_mut().zip(w).for_each(|(g, wi)| *g += 2.0 * decay * wi);
    (loss, grad)
}

fn loss_only(w: &[f64], x: &Matrix, y: &[f64], hidden: usize, decay: f64) -> f64 {
    let mut act = vec![0.0; hidden];
    let sse: f64 = x
        .iter_rows()
        .zip(y)
        .map(|(row, yi)| (forward_row(w, row, hidden, &mut act) - yi).powi(2))
        .sum();
    sse + decay * dot(w, w)
}

fn identity(p: usize, scale: f64) -> Vec<f64> {
    let mut m = vec![0.0; p * p];
    (0..p).for_each(|i| m[i * p + i] = scale);
    m
}

fn mat_vec(m: &[f64], v: &[f64], p: usize) -> Vec<f64> {
    (0..p).map(|i| dot(&m[i * p..(i + 1) * p], v)).collect()
}

/// `H <- (I - r s y') H (I - r y s') + r s s'` with `r = 1 / s'y`.
fn bfgs_update(hinv: &mut [f64], s: &[f64], y: &[f64], sy: f64) {
    let p = s.len();
    let r = 1.0 / sy;
    let hy = mat_vec(hinv, y, p);
    let yhy = dot(y, &hy);
    let c = (1.0 + r * yhy) * r;
    for i in 0..p {
        for j in 0..p {
            hinv[i * p + j] += c * s[i] * s[j] - r * (hy[i] * s[j] + s[i] * hy[j]);
        }
    }
}

pub fn train_neural_net(x: &Matrix, y: &[f64], cfg: &NnetConfig, seed: u64) -> Result<NnetModel> {
    cfg.validate()?;
    let n = x.rows();
    if n < cfg.hidden_units {
        return Err(Error::InvalidInput(format!(
            "neural_net: {n} rows cannot support {} hidden units",
            cfg.hidden_units
        )));
    }
    let standardizer = Standardizer::fit(x);
    let xs = standardizer.transform(x);
    let y_mean = mean(y);
    let sd = (y.iter().map(|v| (v - y_mean).powi(2)).sum::<f64>() / n as f64).sqrt();
    let y_scale = if sd > 0.0 { sd } else { 1.0 };
    let ys: Vec<f64> = y.iter().map(|v| (v - y_mean) / y_scale).collect();

    let h = cfg.hidden_units;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w: Vec<f64> = (0..n_weights(x.cols(), h)).map(|_| rng.random::<f64>() - 0.5).collect();

    let (mut loss, mut grad) = penalized_loss_and_gradient(&w, &xs, &ys, h, cfg.decay);
    if !loss.is_finite() {
        return Err(Error::Divergence { iteration: 0 });
    }
    let initial_loss = loss;
    let p = w.len();
    // inverse Hessian approximation, reset to a scaled identity when the
    // direction stops descending
    let mut hinv = identity(p, 1.0 / dot(&grad, &grad).sqrt().max(1.0));
    let mut iterations = 0;
    while iterations < cfg.max_iter {
        let gnorm2 = dot(&grad, &grad);
        if gnorm2.sqrt() < cfg.grad_tol {
            break;
        }
        let mut dir = mat_vec(&hinv, &grad, p);
        dir.iter_mut().for_each(|v| *v = -*v);
        let mut slope = dot(&dir, &grad);
        if !(slope < 0.0) {
            hinv = identity(p, 1.0 / gnorm2.sqrt().max(1.0));
            dir = grad.iter().map(|g| -g * hinv[0]).collect();
            slope = dot(&dir, &grad);
        }
        let mut accepted = None;
        let mut any_finite = false;
        let mut t = 1.0;
        for _ in 0..60 {
            let trial: Vec<f64> = w.iter().zip(&dir).map(|(wi, di)| wi + t * di).collect();
            let l = loss_only(&trial, &xs, &ys, h, cfg.decay);
            any_finite |= l.is_finite();
            if l.is_finite() && l <= loss + 1e-4 * t * slope {
                accepted = Some(trial);
                break;
            }
            t *= 0.5;
        }
        let Some(next) = accepted else {
            if !any_finite {
                return Err(Error::Divergence { iteration: iterations });
            }
            // no further decrease representable at this precision
            break;
        };
        let (next_loss, next_grad) = penalized_loss_and_gradient(&next, &xs, &ys, h, cfg.decay);
        if !next_loss.is_finite() {
            return Err(Error::Divergence { iteration: iterations });
        }
        let s: Vec<f64> = next.iter().zip(&w).map(|(a, b)| a - b).collect();
        let yv: Vec<f64> = next_grad.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &yv);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&yv, &yv).sqrt() {
            if iterations == 0 {
                hinv = identity(p, sy / dot(&yv, &yv));
            }
            bfgs_update(&mut hinv, &s, &yv, sy);
        }
        w = next;
        loss = next_loss;
        grad = next_grad;
        iterations += 1;
    }
    Ok(NnetModel {
        standardizer,
        y_mean,
        y_scale,
        hidden_units: h,
        weights: w,
        initial_loss,
        final_loss: loss,
        iterations,
    })
}

impl NnetModel {
    pub fn predict(&self, x: &Matrix) -> Vec<f64> {
        let mut q = vec![0.0; x.cols()];
        let mut act = vec![0.0; self.hidden_units];
        x.iter_rows()
            .map(|row| {
                q.copy_from_slice(row);
                self.standardizer.transform_row_in_place(&mut q);
                self.y_mean + self.y_scale * forward_row(&self.weights, &q, self.hidden_units, &mut act)
            })
            .collect()
    }
}
