//! Predictor selection by out-of-bag permutation importance.

use log::warn;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{canonical_columns, ColumnDescriptor, LaggedDataset, Process};
use crate::error::{Error, Result};
use crate::learners::forest::{fit_forest_oob, ForestConfig};
use crate::seed::mix_seed;

pub const DEFAULT_PER_TYPE: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VimConfig {
    pub forest: ForestConfig,
    /// Permutations averaged per tree and feature.
    pub repeats: usize,
}

impl Default for VimConfig {
    fn default() -> Self {
        Self {
            forest: ForestConfig::random_forest(),
            repeats: 1,
        }
    }
}

impl VimConfig {
    pub fn validate(&self) -> Result<()> {
        self.forest.validate()?;
        if !self.forest.bootstrap {
            return Err(Error::Config("importance forest needs bootstrap sampling".into()));
        }
        if self.repeats == 0 {
            return Err(Error::Config("importance repeats must be positive".into()));
        }
        Ok(())
    }
}

/// Mean increase in out-of-bag MSE when one predictor is permuted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VimScores {
    pub columns: Vec<ColumnDescriptor>,
    pub scores: Vec<f64>,
    pub rf_seed: u64,
}

impl VimScores {
    pub fn score_of(&self, col: ColumnDescriptor) -> Option<f64> {
        self.columns.iter().position(|&c| c == col).map(|i| self.scores[i])
    }

    /// Columns of one process, best first, ties going to the smaller lag.
    pub fn ranked(&self, process: Process) -> Vec<(ColumnDescriptor, f64)> {
        let mut v: Vec<(ColumnDescriptor, f64)> = self
            .columns
            .iter()
            .zip(&self.scores)
            .filter(|(c, _)| c.process == process)
            .map(|(c, s)| (*c, *s))
            .collect();
        v.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.lag.cmp(&b.0.lag)));
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictorSet {
    /// Canonical order: by process, then lag.
    pub selected: Vec<ColumnDescriptor>,
    /// Set when no score was positive and the set fell back to `Q1`.
    pub fallback: bool,
}

impl PredictorSet {
    pub fn count(&self, process: Process) -> usize {
        self.selected.iter().filter(|c| c.process == process).count()
    }
}

pub fn permutation_vim(data: &LaggedDataset, cfg: &VimConfig, seed: u64) -> Result<VimScores> {
    cfg.validate()?;
    let d = data.n_cols();
    if d == 0 || !d.is_multiple_of(3) || data.columns() != canonical_columns(d / 3).as_slice() {
        return Err(Error::InvalidInput(format!(
            "importance ranking needs the full candidate column set, got {d} columns"
        )));
    }
    let (x, y) = (data.x(), data.y());
    let fitted = fit_forest_oob(x, y, &cfg.forest, seed)?;
    if let Some(t) = fitted.oob_rows.iter().position(|r| r.is_empty()) {
        return Err(Error::InvalidInput(format!(
            "tree {t} has no out-of-bag rows; {} rows are too few",
            data.n_rows()
        )));
    }

    let mut totals = vec![0.0; d];
    for (t, (tree, oob)) in fitted.forest.trees.iter().zip(&fitted.oob_rows).enumerate() {
        let m = oob.len() as f64;
        let base: f64 = oob
            .iter()
            .map(|&i| (tree.predict_row(x.row(i)) - y[i]).powi(2))
            .sum::<f64>()
            / m;
        let tree_seed = mix_seed(seed, t as u64 + 1);
        for (f, total) in totals.iter_mut().enumerate() {
            // permuting an unused feature cannot change any prediction
            if !tree.uses_feature(f) {
                continue;
            }
            let mut rng = ChaCha8Rng::seed_from_u64(tree_seed);
            rng.set_stream(f as u64);
            let mut increase = 0.0;
            for _ in 0..cfg.repeats {
                let mut values: Vec<f64> = oob.iter().map(|&i| x.get(i, f)).collect();
                values.shuffle(&mut rng);
                let mut sse = 0.0;
                for (&i, &v) in oob.iter().zip(&values) {
                    sse += (tree.predict_row_with(x.row(i), f, v) - y[i]).powi(2);
                }
                increase += sse / m - base;
            }
            *total += increase / cfg.repeats as f64;
        }
    }
    let n_trees = fitted.forest.trees.len() as f64;
    Ok(VimScores {
        columns: data.columns().to_vec(),
        scores: totals.into_iter().map(|s| s / n_trees).collect(),
        rf_seed: seed,
    })
}

/// Keeps the `per_type` best columns of each process whose score is positive.
pub fn select_predictors(vim: &VimScores, per_type: usize) -> Result<PredictorSet> {
    if vim.columns.len() != vim.scores.len() {
        return Err(Error::InvalidInput(
            "importance scores and columns differ in length".into(),
        ));
    }
    for p in Process::ALL {
        if !vim.columns.iter().any(|c| c.process == p) {
            return Err(Error::InvalidInput(format!("no candidate columns for process {p}")));
        }
    }
    let mut selected: Vec<ColumnDescriptor> = Process::ALL
        .iter()
        .flat_map(|&p| {
            vim.ranked(p)
                .into_iter()
                .take(per_type)
                .filter(|&(_, s)| s > 0.0)
                .map(|(c, _)| c)
        })
        .collect();
    selected.sort();
    if selected.is_empty() {
        warn!("no predictor has positive importance; falling back to Q1");
        return Ok(PredictorSet {
            selected: vec![ColumnDescriptor::new(Process::Q, 1)],
            fallback: true,
        });
    }
    Ok(PredictorSet {
        selected,
        fallback: false,
    })
}
