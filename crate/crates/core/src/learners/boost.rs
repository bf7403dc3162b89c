//! Gradient boosted regression trees with L2-regularized leaf weights.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tree::{grow_tree, RegressionTree, SplitMode, TreeInput, TreeParams};
use crate::error::{Error, Result};
use crate::linalg::mean;
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoostConfig {
    pub n_rounds: usize,
    pub learning_rate: f64,
    /// `None` grows each tree until no positive-gain split remains.
    pub max_depth: Option<usize>,
    pub l2_leaf: f64,
    pub min_child: usize,
}

impl Default for BoostConfig {
    fn default() -> Self {
        Self {
            n_rounds: 100,
            learning_rate: 0.1,
            max_depth: Some(6),
            l2_leaf: 1.0,
            min_child: 1,
        }
    }
}

impl BoostConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::Config("grad_boost: learning_rate must lie in (0, 1]".into()));
        }
        if self.l2_leaf < 0.0 || self.min_child == 0 || self.max_depth == Some(0) {
            return Err(Error::Config(
                "grad_boost: l2_leaf >= 0, min_child >= 1, max_depth >= 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostModel {
    pub base_score: f64,
    pub learning_rate: f64,
    pub trees: Vec<RegressionTree>,
}

impl BoostModel {
    pub fn predict(&self, x: &Matrix) -> Vec<f64> {
        self.predict_rounds(x, self.trees.len())
    }

    /// Prediction using only the first `rounds` trees.
    pub fn predict_rounds(&self, x: &Matrix, rounds: usize) -> Vec<f64> {
        x.iter_rows()
            .map(|r| {
                self.base_score
                    + self.trees[..rounds.min(self.trees.len())]
                        .iter()
                        .map(|t| self.learning_rate * t.predict_row(r))
                        .sum::<f64>()
            })
            .collect()
    }
}

/// Each round fits a tree to the current residuals; leaf weights are
/// `sum(residuals) / (count + l2_leaf)`.
pub fn fit_gradient_boosting(x: &Matrix, y: &[f64], cfg: &BoostConfig) -> Result<BoostModel> {
    cfg.validate()?;
    let n = x.rows();
    let base_score = mean(y);
    let mut fitted = vec![base_score; n];
    let params = TreeParams {
        mode: SplitMode::Exact,
        mtry: x.cols(),
        min_node: 2 * cfg.min_child,
        max_depth: cfg.max_depth,
        min_child: cfg.min_child,
        l2_leaf: cfg.l2_leaf,
    };
    let rows: Vec<usize> = (0..n).collect();
    // exact mode with mtry = d draws no random numbers that matter
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut trees = Vec::with_capacity(cfg.n_rounds);
    let input = TreeInput::new(x);
    for _ in 0..cfg.n_rounds {
        let resid: Vec<f64> = y.iter().zip(&fitted).map(|(o, f)| o - f).collect();
        let tree = grow_tree(&input, &resid, &rows, &params, &mut rng)?;
        for (i, row) in x.iter_rows().enumerate() {
            fitted[i] += cfg.learning_rate * tree.predict_row(row);
        }
        trees.push(tree);
    }
    Ok(BoostModel {
        base_score,
        learning_rate: cfg.learning_rate,
        trees,
    })
}
