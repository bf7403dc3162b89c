//! Bagged ensembles of regression trees: random forests and extremely
//! randomized trees.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tree::{grow_tree, RegressionTree, SplitMode, TreeInput, TreeParams};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// Candidate features per split; `None` means `max(1, d/3)`.
    pub mtry: Option<usize>,
    pub min_node: usize,
    pub bootstrap: bool,
    pub mode: SplitMode,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self::random_forest()
    }
}

impl ForestConfig {
    pub fn random_forest() -> Self {
        Self {
            n_trees: 500,
            mtry: None,
            min_node: 5,
            bootstrap: true,
            mode: SplitMode::Exact,
        }
    }

    pub fn extra_trees() -> Self {
        Self {
            n_trees: 500,
            mtry: None,
            min_node: 5,
            bootstrap: false,
            mode: SplitMode::Random,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 || self.min_node == 0 || self.mtry == Some(0) {
            return Err(Error::Config(
                "forest: n_trees, min_node and mtry must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn mtry_for(&self, d: usize) -> usize {
        self.mtry.unwrap_or((d / 3).max(1)).min(d).max(1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<RegressionTree>,
}

impl Forest {
    /// Arithmetic mean of the per-tree predictions.
    pub fn predict(&self, x: &Matrix) -> Vec<f64> {
        x.iter_rows()
            .map(|r| self.trees.iter().map(|t| t.predict_row(r)).sum::<f64>() / self.trees.len() as f64)
            .collect()
    }

    pub fn per_tree_predictions(&self, row: &[f64]) -> Vec<f64> {
        self.trees.iter().map(|t| t.predict_row(row)).collect()
    }
}

/// A forest together with the out-of-bag rows of every tree.
pub struct OobForest {
    pub forest: Forest,
    pub oob_rows: Vec<Vec<usize>>,
}

pub fn fit_forest(x: &Matrix, y: &[f64], cfg: &ForestConfig, seed: u64) -> Result<Forest> {
    Ok(fit_forest_oob(x, y, cfg, seed)?.forest)
}

/// Fits the forest, recording each tree's out-of-bag rows (empty without bootstrap).
pub fn fit_forest_oob(x: &Matrix, y: &[f64], cfg: &ForestConfig, seed: u64) -> Result<OobForest> {
    cfg.validate()?;
    let n = x.rows();
    let params = TreeParams {
        mode: cfg.mode,
        mtry: cfg.mtry_for(x.cols()),
        min_node: cfg.min_node,
        max_depth: None,
        min_child: 1,
        l2_leaf: 0.0,
    };
    let mut trees = Vec::with_capacity(cfg.n_trees);
    let mut oob_rows = Vec::with_capacity(cfg.n_trees);
    let mut in_bag = vec![false; n];
    let input = TreeInput::new(x);
    for t in 0..cfg.n_trees {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(t as u64);
        let rows: Vec<usize> = if cfg.bootstrap {
            in_bag.iter_mut().for_each(|b| *b = false);
            let rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            rows.iter().for_each(|&i| in_bag[i] = true);
            oob_rows.push((0..n).filter(|&i| !in_bag[i]).collect());
            rows
        } else {
            oob_rows.push(Vec::new());
            (0..n).collect()
        };
        trees.push(grow_tree(&input, y, &rows, &params, &mut rng)?);
    }
    Ok(OobForest {
        forest: Forest { trees },
        oob_rows,
    })
}
