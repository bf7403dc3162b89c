//! Cross-validated stacking: fold construction, level-one predictions,
//! convex weights on the probability simplex and the simple combiners.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::LaggedDataset;
use crate::error::{Error, Result};
use crate::learners::{fit_learner, FittedModel, LearnerConfig, LearnerId};
use crate::linalg::{dot, mse};
use crate::matrix::Matrix;

pub const DEFAULT_FOLDS: usize = 5;
pub const SIMPLEX_TOL: f64 = 1e-10;
pub const SIMPLEX_MAX_ITER: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FoldScheme {
    /// Consecutive blocks of rows.
    #[default]
    Contiguous,
    /// Blocks of a seeded permutation of the rows.
    Shuffled { seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub fold_of: Vec<usize>,
    pub k: usize,
    pub scheme: FoldScheme,
}

impl FoldAssignment {
    pub fn n(&self) -> usize {
        self.fold_of.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.k];
        self.fold_of.iter().for_each(|&f| s[f] += 1);
        s
    }

    /// `(training rows, held-out rows)` for fold `f`, both ascending.
    pub fn split(&self, f: usize) -> (Vec<usize>, Vec<usize>) {
        (0..self.n()).partition(|&i| self.fold_of[i] != f)
    }
}

/// Assigns `n` rows to `k` folds whose sizes differ by at most one.
pub fn cv_folds(n: usize, k: usize, scheme: FoldScheme) -> Result<FoldAssignment> {
    if k < 2 || k > n {
        return Err(Error::Config(format!("fold count {k} must lie in [2, {n}]")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    if let FoldScheme::Shuffled { seed } = scheme {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    let (base, extra) = (n / k, n % k);
    let mut fold_of = vec![0; n];
    let mut pos = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        for &i in &order[pos..pos + size] {
            fold_of[i] = f;
        }
        pos += size;
    }
    Ok(FoldAssignment { fold_of, k, scheme })
}

/// Anything that can be trained on some rows and predict others.
pub trait FoldLearner {
    fn name(&self) -> String;
    fn fit_predict(&self, train: &LaggedDataset, test: &LaggedDataset) -> Result<Vec<f64>>;
}

/// A built-in learner with its hyperparameters.
#[derive(Debug, Clone, Copy)]
pub struct Configured<'a> {
    pub id: LearnerId,
    pub config: &'a LearnerConfig,
}

impl FoldLearner for Configured<'_> {
    fn name(&self) -> String {
        self.id.name().to_string()
    }

    fn fit_predict(&self, train: &LaggedDataset, test: &LaggedDataset) -> Result<Vec<f64>> {
        fit_learner(self.id, train, self.config)?.predict(test)
    }
}

/// Out-of-fold predictions of every learner, one column per learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelOneData {
    pub z: Matrix,
    pub y: Vec<f64>,
    pub folds: FoldAssignment,
    pub learners: Vec<String>,
}

impl LevelOneData {
    pub fn column_mse(&self) -> Vec<f64> {
        (0..self.z.cols()).map(|j| mse(&self.z.column(j), &self.y)).collect()
    }
}

pub fn cv_predictions(
    data: &LaggedDataset,
    learners: &[&dyn FoldLearner],
    folds: &FoldAssignment,
) -> Result<LevelOneData> {
    let n = data.n_rows();
    if folds.n() != n {
        return Err(Error::InvalidInput(format!("{} fold labels for {n} rows", folds.n())));
    }
    if learners.is_empty() {
        return Err(Error::InvalidInput("no learners to cross-validate".into()));
    }
    let m = learners.len();
    let mut z = Matrix::zeros(n, m);
    for f in 0..folds.k {
        let (train_idx, test_idx) = folds.split(f);
        let train = data.subset_rows(&train_idx);
        let test = data.subset_rows(&test_idx);
        for (j, learner) in learners.iter().enumerate() {
            let wrap = |source: Error| Error::Learner {
                learner: learner.name(),
                fold: Some(f),
                source: Box::new(source),
            };
            let pred = learner.fit_predict(&train, &test).map_err(wrap)?;
            if pred.len() != test_idx.len() || pred.iter().any(|v| !v.is_finite()) {
                return Err(wrap(Error::InvalidInput(
                    "missing or non-finite out-of-fold predictions".into(),
                )));
            }
            for (&i, p) in test_idx.iter().zip(pred) {
                z.set(i, j, p);
            }
        }
    }
    Ok(LevelOneData {
        z,
        y: data.y().to_vec(),
        folds: folds.clone(),
        learners: learners.iter().map(|l| l.name()).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleWeights {
    pub learners: Vec<String>,
    pub w: Vec<f64>,
    pub achieved_cv_mse: f64,
    pub iterations: usize,
    /// Norm of the projected-gradient step at termination.
    pub residual: f64,
    pub fold_scheme: Option<FoldScheme>,
}

impl EnsembleWeights {
    pub fn weight_of(&self, learner: &str) -> Option<f64> {
        self.learners.iter().position(|l| l == learner).map(|i| self.w[i])
    }
}

/// Euclidean projection onto `{w >= 0, sum w = 1}` by sorting.
pub fn project_to_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cum += uj;
        let t = (cum - 1.0) / (j + 1) as f64;
        if uj - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

fn combine_rows(z: &Matrix, w: &[f64]) -> Vec<f64> {
    z.iter_rows().map(|r| dot(r, w)).collect()
}

/// Minimizes `||Z w - y||^2` over the simplex by projected gradient with
/// backtracking, starting from uniform weights.
pub fn solve_simplex_weights(z: &Matrix, y: &[f64], tol: f64, max_iter: usize) -> Result<EnsembleWeights> {
    let (n, m) = (z.rows(), z.cols());
    if n == 0 || m == 0 || y.len() != n {
        return Err(Error::InvalidInput(format!(
            "weight solver got a {n}x{m} matrix and {} targets",
            y.len()
        )));
    }
    if !z.is_finite() || y.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("weight solver inputs must be finite".into()));
    }
    // objective (1/n)(w'Qw - 2c'w + y'y), gradient (2/n)(Qw - c)
    let mut q = vec![0.0; m * m];
    let mut c = vec![0.0; m];
    for (row, yi) in z.iter_rows().zip(y) {
        for a in 0..m {
            c[a] += row[a] * yi;
            for b in a..m {
                q[a * m + b] += row[a] * row[b];
            }
        }
    }
    for a in 0..m {
        for b in 0..a {
            q[a * m + b] = q[b * m + a];
        }
    }
    let scale = 2.0 / n as f64;
    let grad = |w: &[f64]| -> Vec<f64> {
        (0..m)
            .map(|a| scale * (dot(&q[a * m..(a + 1) * m], w) - c[a]))
            .collect()
    };
    let curvature =
        |d: &[f64]| -> f64 { (0..m).map(|a| d[a] * dot(&q[a * m..(a + 1) * m], d)).sum::<f64>() / n as f64 };

    let trace: f64 = (0..m).map(|a| q[a * m + a]).sum::<f64>() * scale;
    let mut step = if trace > 0.0 { 1.0 / trace } else { 1.0 };
    let mut w = vec![1.0 / m as f64; m];
    let mut g = grad(&w);
    let mut iterations = 0;
    let mut residual = f64::INFINITY;
    while iterations < max_iter {
        // backtrack until the quadratic upper bound holds along the step
        let (next, d) = loop {
            let next = project_to_simplex(&w.iter().zip(&g).map(|(wi, gi)| wi - step * gi).collect::<Vec<_>>());
            let d: Vec<f64> = next.iter().zip(&w).map(|(a, b)| a - b).collect();
            let dd = dot(&d, &d);
            if dd == 0.0 || curvature(&d) <= dd / (2.0 * step) || step < 1e-300 {
                break (next, d);
            }
            step *= 0.5;
        };
        residual = dot(&d, &d).sqrt() / step;
        w = next;
        g = grad(&w);
        iterations += 1;
        if residual < tol {
            break;
        }
        step *= 1.5;
    }

    let achieved = mse(&combine_rows(z, &w), y);
    let best_vertex = (0..m).map(|j| mse(&z.column(j), y)).fold(f64::INFINITY, f64::min);
    if !(achieved <= best_vertex + 1e-9) {
        return Err(Error::Solver(format!(
            "combined MSE {achieved:e} exceeds best single column {best_vertex:e} after {iterations} iterations"
        )));
    }
    Ok(EnsembleWeights {
        learners: (0..m).map(|j| format!("column_{j}")).collect(),
        w,
        achieved_cv_mse: achieved,
        iterations,
        residual,
        fold_scheme: None,
    })
}

/// Index of the column with minimal cross-validated MSE; ties go to the
/// earliest column.
pub fn best_learner_select(level_one: &LevelOneData) -> Result<usize> {
    let mses = level_one.column_mse();
    if mses.is_empty() {
        return Err(Error::InvalidInput("level-one data has no columns".into()));
    }
    let mut best = 0;
    for (j, &v) in mses.iter().enumerate() {
        if v < mses[best] {
            best = j;
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuperLearner {
    pub weights: EnsembleWeights,
    pub models: Vec<FittedModel>,
    pub level_one: LevelOneData,
}

/// Cross-validates `ids`, solves for weights and refits every learner on all rows.
pub fn super_learner_fit(
    data: &LaggedDataset,
    ids: &[LearnerId],
    config: &LearnerConfig,
    k: usize,
    scheme: FoldScheme,
) -> Result<SuperLearner> {
    if ids.is_empty() {
        return Err(Error::InvalidInput("super learner needs at least one learner".into()));
    }
    let folds = cv_folds(data.n_rows(), k, scheme)?;
    let configured: Vec<Configured> = ids.iter().map(|&id| Configured { id, config }).collect();
    let refs: Vec<&dyn FoldLearner> = configured.iter().map(|c| c as &dyn FoldLearner).collect();
    let level_one = cv_predictions(data, &refs, &folds)?;
    let mut weights = solve_simplex_weights(&level_one.z, &level_one.y, SIMPLEX_TOL, SIMPLEX_MAX_ITER)?;
    weights.learners = level_one.learners.clone();
    weights.fold_scheme = Some(scheme);
    let models = ids
        .iter()
        .map(|&id| {
            fit_learner(id, data, config).map_err(|e| Error::Learner {
                learner: id.name().to_string(),
                fold: None,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SuperLearner {
        weights,
        models,
        level_one,
    })
}

/// Row-wise weighted sum of base predictions.
pub fn weighted_combination(w: &[f64], predictions: &[Vec<f64>]) -> Result<Vec<f64>> {
    if w.len() != predictions.len() || predictions.is_empty() {
        return Err(Error::InvalidInput(format!(
            "{} weights for {} prediction vectors",
            w.len(),
            predictions.len()
        )));
    }
    let n = predictions[0].len();
    if predictions.iter().any(|p| p.len() != n) {
        return Err(Error::InvalidInput("prediction vectors differ in length".into()));
    }
    Ok((0..n)
        .map(|i| w.iter().zip(predictions).map(|(wj, p)| wj * p[i]).sum())
        .collect())
}

/// Row-wise arithmetic mean of base predictions.
pub fn equal_weight_combination(predictions: &[Vec<f64>]) -> Result<Vec<f64>> {
    let m = predictions.len();
    if m == 0 {
        return Err(Error::InvalidInput("no predictions to average".into()));
    }
    let n = predictions[0].len();
    if predictions.iter().any(|p| p.len() != n) {
        return Err(Error::InvalidInput("prediction vectors differ in length".into()));
    }
    Ok((0..n)
        .map(|i| predictions.iter().map(|p| p[i]).sum::<f64>() / m as f64)
        .collect())
}

fn predict_all(models: &[FittedModel], data: &LaggedDataset) -> Result<Vec<Vec<f64>>> {
    models.iter().map(|m| m.predict(data)).collect()
}

pub fn super_learner_predict(
    weights: &EnsembleWeights,
    models: &[FittedModel],
    data: &LaggedDataset,
) -> Result<Vec<f64>> {
    weighted_combination(&weights.w, &predict_all(models, data)?)
}

pub fn equal_weight_predict(models: &[FittedModel], data: &LaggedDataset) -> Result<Vec<f64>> {
    if models.is_empty() {
        return Err(Error::InvalidInput("no models to average".into()));
    }
    equal_weight_combination(&predict_all(models, data)?)
}
