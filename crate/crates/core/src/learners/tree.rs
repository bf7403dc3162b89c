//! Binary regression trees shared by random forests, extra trees and boosting.
//!
//! Splits maximize the regularized gain
//! `G_L^2/(n_L+l2) + G_R^2/(n_R+l2) - G^2/(n+l2)`, `G` being the target sum.
//! With `l2 = 0` this is exactly the reduction in within-node squared error
//! and leaves predict the target mean.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    /// Scan every midpoint between consecutive distinct values.
    Exact,
    /// One uniform cut drawn within the node's range per candidate feature.
    Random,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeParams {
    pub mode: SplitMode,
    pub mtry: usize,
    /// Nodes with fewer rows than this become leaves.
    pub min_node: usize,
    pub max_depth: Option<usize>,
    /// Minimum rows on each side of a split.
    pub min_child: usize,
    pub l2_leaf: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<Node>,
}

impl RegressionTree {
    fn leaf_node(&self, row: &[f64]) -> usize {
        let mut k = 0;
        loop {
            match self.nodes[k] {
                Node::Leaf { .. } => return k,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    k = if row[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    #[inline]
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        match self.nodes[self.leaf_node(row)] {
            Node::Leaf { value } => value,
            Node::Split { .. } => unreachable!(),
        }
    }

    /// Prediction for `row` with `feature` replaced by `value`.
    pub fn predict_row_with(&self, row: &[f64], feature: usize, value: f64) -> f64 {
        let mut k = 0;
        loop {
            match self.nodes[k] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature: f,
                    threshold,
                    left,
                    right,
                } => {
                    let v = if f == feature { value } else { row[f] };
                    k = if v <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn predict(&self, x: &Matrix) -> Vec<f64> {
        x.iter_rows().map(|r| self.predict_row(r)).collect()
    }

    /// Index of the leaf that `row` lands in.
    pub fn leaf_index(&self, row: &[f64]) -> usize {
        self.leaf_node(row)
    }

    pub fn uses_feature(&self, feature: usize) -> bool {
        self.nodes
            .iter()
            .any(|n| matches!(n, Node::Split { feature: f, .. } if *f == feature))
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }
}

struct BestSplit {
    gain: f64,
    feature: usize,
    threshold: f64,
}

/// Grows a tree on `rows` of (`x`, `y`); `rows` may repeat indices (bootstrap).
/// Predictors prepared once for growing many trees: column-major values and
/// per-column dense ranks, so split searches sort integers.
pub struct TreeInput {
    cols: Vec<Vec<f64>>,
    ranks: Vec<Vec<u32>>,
}

impl TreeInput {
    pub fn new(x: &Matrix) -> Self {
        let cols: Vec<Vec<f64>> = (0..x.cols()).map(|j| x.column(j)).collect();
        let ranks = cols
            .iter()
            .map(|c| {
                let mut order: Vec<usize> = (0..c.len()).collect();
                order.sort_by(|&a, &b| c[a].total_cmp(&c[b]));
                let mut r = vec![0u32; c.len()];
                let mut current = 0u32;
                for k in 1..order.len() {
                    if c[order[k]] != c[order[k - 1]] {
                        current += 1;
                    }
                    r[order[k]] = current;
                }
                r
            })
            .collect();
        Self { cols, ranks }
    }

    pub fn n_features(&self) -> usize {
        self.cols.len()
    }
}

pub fn grow_regression_tree<R: Rng>(
    x: &Matrix,
    y: &[f64],
    rows: &[usize],
    params: &TreeParams,
    rng: &mut R,
) -> Result<RegressionTree> {
    grow_tree(&TreeInput::new(x), y, rows, params, rng)
}

pub fn grow_tree<R: Rng>(
    input: &TreeInput,
    y: &[f64],
    rows: &[usize],
    params: &TreeParams,
    rng: &mut R,
) -> Result<RegressionTree> {
    let d = input.n_features();
    let cols = &input.cols;
    if rows.is_empty() {
        return Err(Error::InvalidInput("tree: empty sample".into()));
    }
    if params.mtry == 0 || params.mtry > d {
        return Err(Error::InvalidInput(format!(
            "tree: mtry {} outside 1..={d}",
            params.mtry
        )));
    }
    let min_child = params.min_child.max(1);
    let lambda = params.l2_leaf;

    let mut idx = rows.to_vec();
    let mut features: Vec<usize> = (0..d).collect();
    let mut buf: Vec<u64> = Vec::with_capacity(rows.len());
    let mut nodes = vec![Node::Leaf { value: 0.0 }];
    let mut stack = vec![(0usize, 0usize, idx.len(), 0usize)];

    while let Some((node, start, end, depth)) = stack.pop() {
        let part = &idx[start..end];
        let count = part.len();
        let (mut sum, mut lo, mut hi) = (0.0, f64::INFINITY, f64::NEG_INFINITY);
        for &i in part {
            sum += y[i];
            lo = lo.min(y[i]);
            hi = hi.max(y[i]);
        }
        let leaf_value = sum / (count as f64 + lambda);
        let stop = count < params.min_node
            || count < 2 * min_child
            || lo == hi
            || params.max_depth.is_some_and(|m| depth >= m);
        let split = if stop {
            None
        } else {
            for k in 0..params.mtry {
                let pick = rng.random_range(k..d);
                features.swap(k, pick);
            }
            let parent_score = sum * sum / (count as f64 + lambda);
            let mut best: Option<BestSplit> = None;
            for &f in &features[..params.mtry] {
                let cand = match params.mode {
                    SplitMode::Exact => {
                        exact_split(&cols[f], &input.ranks[f], y, part, min_child, lambda, sum, &mut buf)
                    }
                    SplitMode::Random => random_split(&cols[f], y, part, min_child, lambda, sum, rng),
                };
                if let Some((score, threshold)) = cand {
                    let gain = score - parent_score;
                    if gain > 0.0 && best.as_ref().is_none_or(|b| gain > b.gain) {
                        best = Some(BestSplit {
                            gain,
                            feature: f,
                            threshold,
                        });
                    }
                }
            }
            best
        };

        match split {
            None => nodes[node] = Node::Leaf { value: leaf_value },
            Some(s) => {
                let slice = &mut idx[start..end];
                let mut left_len = 0;
                for k in 0..slice.len() {
                    if cols[s.feature][slice[k]] <= s.threshold {
                        slice.swap(k, left_len);
                        left_len += 1;
                    }
                }
                let left = nodes.len();
                nodes.push(Node::Leaf { value: 0.0 });
                let right = nodes.len();
                nodes.push(Node::Leaf { value: 0.0 });
                nodes[node] = Node::Split {
                    feature: s.feature,
                    threshold: s.threshold,
                    left,
                    right,
                };
                // right first so the left subtree is expanded before it
                stack.push((right, start + left_len, end, depth + 1));
                stack.push((left, start, start + left_len, depth + 1));
            }
        }
    }
    Ok(RegressionTree { nodes })
}

/// Best midpoint split on `feature`; returns (child score, threshold).
#[allow(clippy::too_many_arguments)]
fn exact_split(
    col: &[f64],
    ranks: &[u32],
    y: &[f64],
    part: &[usize],
    min_child: usize,
    lambda: f64,
    total: f64,
    buf: &mut Vec<u64>,
) -> Option<(f64, f64)> {
    // (rank, row) packed so sorting compares plain integers
    buf.clear();
    buf.extend(part.iter().map(|&i| (u64::from(ranks[i]) << 32) | i as u64));
    buf.sort_unstable();
    let n = buf.len();
    let rank = |k: usize| buf[k] >> 32;
    let row = |k: usize| (buf[k] & 0xffff_ffff) as usize;
    if rank(0) == rank(n - 1) {
        return None;
    }
    let mut left_sum = 0.0;
    let mut best: Option<(f64, usize)> = None;
    for k in 0..n - 1 {
        left_sum += y[row(k)];
        let n_left = k + 1;
        if rank(k) == rank(k + 1) || n_left < min_child || n - n_left < min_child {
            continue;
        }
        let right_sum = total - left_sum;
        let score =
            left_sum * left_sum / (n_left as f64 + lambda) + right_sum * right_sum / ((n - n_left) as f64 + lambda);
        if best.is_none_or(|(s, _)| score > s) {
            best = Some((score, k));
        }
    }
    best.map(|(score, k)| {
        let (a, b) = (col[row(k)], col[row(k + 1)]);
        let mid = a + (b - a) / 2.0;
        (score, if mid < b { mid } else { a })
    })
}

#[allow(clippy::too_many_arguments)]
fn random_split<R: Rng>(
    col: &[f64],
    y: &[f64],
    part: &[usize],
    min_child: usize,
    lambda: f64,
    total: f64,
    rng: &mut R,
) -> Option<(f64, f64)> {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &i in part {
        let v = col[i];
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if lo >= hi {
        return None;
    }
    let cut = lo + rng.random::<f64>() * (hi - lo);
    if cut >= hi {
        return None;
    }
    let (mut n_left, mut left_sum) = (0usize, 0.0);
    for &i in part {
        if col[i] <= cut {
            n_left += 1;
            left_sum += y[i];
        }
    }
    let n_right = part.len() - n_left;
    if n_left < min_child || n_right < min_child {
        return None;
    }
    let right_sum = total - left_sum;
    let score = left_sum * left_sum / (n_left as f64 + lambda) + right_sum * right_sum / (n_right as f64 + lambda);
    Some((score, cut))
}
