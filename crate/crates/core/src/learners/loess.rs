//! Nearest-neighbour local polynomial regression with tricube weights.
//!
//! Distances are Euclidean in standardized predictor space. The local
//! quadratic uses pure square terms only (`1 + 2d` coefficients) so the fit
//! stays well posed with many predictors.

use serde::{Deserialize, Serialize};

use super::Standardizer;
use crate::error::{Error, Result};
use crate::linalg::spd_solve;
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LoessConfig {
    pub span: f64,
    pub degree: usize,
}

impl Default for LoessConfig {
    fn default() -> Self {
        Self { span: 0.75, degree: 2 }
    }
}

impl LoessConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.span > 0.0 && self.span <= 1.0) {
            return Err(Error::Config("loess: span must lie in (0, 1]".into()));
        }
        if !(1..=2).contains(&self.degree) {
            return Err(Error::Config("loess: degree must be 1 or 2".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoessModel {
    pub standardizer: Standardizer,
    pub x: Matrix,
    pub y: Vec<f64>,
    pub span: f64,
    pub degree: usize,
}

pub fn neighbourhood_size(span: f64, n: usize) -> usize {
    ((span * n as f64).ceil() as usize).clamp(1, n)
}

pub fn fit_loess(x: &Matrix, y: &[f64], cfg: &LoessConfig) -> Result<LoessModel> {
    cfg.validate()?;
    let k = neighbourhood_size(cfg.span, x.rows());
    let needed = 1 + cfg.degree * x.cols();
    if k < needed {
        return Err(Error::InvalidInput(format!(
            "loess: neighbourhood of {k} rows cannot support {needed} local coefficients"
        )));
    }
    let standardizer = Standardizer::fit(x);
    Ok(LoessModel {
        x: standardizer.transform(x),
        standardizer,
        y: y.to_vec(),
        span: cfg.span,
        degree: cfg.degree,
    })
}

impl LoessModel {
    pub fn predict(&self, x: &Matrix) -> Vec<f64> {
        let mut q = vec![0.0; x.cols()];
        x.iter_rows()
            .map(|row| {
                q.copy_from_slice(row);
                self.standardizer.transform_row_in_place(&mut q);
                self.predict_standardized(&q)
            })
            .collect()
    }

    fn predict_standardized(&self, query: &[f64]) -> f64 {
        let n = self.x.rows();
        let d = self.x.cols();
        let k = neighbourhood_size(self.span, n);
        let mut dist: Vec<(f64, usize)> = (0..n)
            .map(|i| {
                let r = self.x.row(i);
                let s: f64 = r.iter().zip(query).map(|(a, b)| (a - b).powi(2)).sum();
                (s.sqrt(), i)
            })
            .collect();
        let by_distance = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < n {
            dist.select_nth_unstable_by(k - 1, by_distance);
            dist.truncate(k);
        }
        dist.sort_unstable_by(by_distance);
        let d_max = dist.last().map_or(0.0, |v| v.0);

        let weights: Vec<f64> = dist
            .iter()
            .map(|&(di, _)| {
                if d_max > 0.0 {
                    (1.0 - (di / d_max).powi(3)).max(0.0).powi(3)
                } else {
                    1.0
                }
            })
            .collect();
        let unit = if d_max > 0.0 { d_max } else { 1.0 };

        for degree in (1..=self.degree).rev() {
            if let Some(v) = self.local_fit(query, &dist, &weights, degree, unit, d) {
                return v;
            }
        }
        let wsum: f64 = weights.iter().sum();
        if wsum > 0.0 {
            dist.iter().zip(&weights).map(|(&(_, i), w)| w * self.y[i]).sum::<f64>() / wsum
        } else {
            dist.iter().map(|&(_, i)| self.y[i]).sum::<f64>() / dist.len() as f64
        }
    }

    /// Weighted least squares in coordinates centred at the query; the
    /// intercept is the prediction.
    fn local_fit(
        &self,
        query: &[f64],
        neighbours: &[(f64, usize)],
        weights: &[f64],
        degree: usize,
        unit: f64,
        d: usize,
    ) -> Option<f64> {
        let p = 1 + degree * d;
        let mut ata = vec![0.0; p * p];
        let mut atb = vec![0.0; p];
        let mut z = vec![0.0; p];
        for (&(_, i), &w) in neighbours.iter().zip(weights) {
            if w == 0.0 {
                continue;
            }
            let row = self.x.row(i);
            z[0] = 1.0;
            for j in 0..d {
                let u = (row[j] - query[j]) / unit;
                z[1 + j] = u;
                if degree == 2 {
                    z[1 + d + j] = u * u;
                }
            }
            let yi = self.y[i];
            for a in 0..p {
                let wa = w * z[a];
                atb[a] += wa * yi;
                for b in a..p {
                    ata[a * p + b] += wa * z[b];
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                ata[a * p + b] = ata[b * p + a];
            }
        }
        let beta = spd_solve(&ata, &atb, p)?;
        beta[0].is_finite().then_some(beta[0])
    }
}
