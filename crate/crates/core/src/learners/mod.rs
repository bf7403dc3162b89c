//! Ten base regression learners behind a single fit/predict contract.

pub mod boost;
pub mod forest;
pub mod lasso;
pub mod linear;
pub mod loess;
pub mod mars;
pub mod nnet;
mod standardize;
pub mod svr;
pub mod tree;

pub use standardize::Standardizer;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{ColumnDescriptor, LaggedDataset};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::seed::mix_seed;

pub use boost::BoostConfig;
pub use forest::ForestConfig;
pub use lasso::LassoConfig;
pub use loess::LoessConfig;
pub use mars::{MarsConfig, MarsVariant};
pub use nnet::NnetConfig;
pub use svr::SvrConfig;

/// Version stamped into serialized models.
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerId {
    LinearRegression,
    Lasso,
    Loess,
    Mars,
    PolyMars,
    RandomForest,
    GradBoost,
    ExtraTrees,
    Svr,
    NeuralNet,
}

impl LearnerId {
    /// All learners in their fixed report order.
    pub const ALL: [LearnerId; 10] = [
        LearnerId::LinearRegression,
        LearnerId::Lasso,
        LearnerId::Loess,
        LearnerId::Mars,
        LearnerId::PolyMars,
        LearnerId::RandomForest,
        LearnerId::GradBoost,
        LearnerId::ExtraTrees,
        LearnerId::Svr,
        LearnerId::NeuralNet,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            LearnerId::LinearRegression => "linear_regression",
            LearnerId::Lasso => "lasso",
            LearnerId::Loess => "loess",
            LearnerId::Mars => "mars",
            LearnerId::PolyMars => "poly_mars",
            LearnerId::RandomForest => "random_forest",
            LearnerId::GradBoost => "grad_boost",
            LearnerId::ExtraTrees => "extra_trees",
            LearnerId::Svr => "svr",
            LearnerId::NeuralNet => "neural_net",
        }
    }
}

impl fmt::Display for LearnerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LearnerId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LearnerId::ALL
            .into_iter()
            .find(|id| id.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown learner `{s}`")))
    }
}

/// Hyperparameters for every learner plus the master learner seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LearnerConfig {
    pub seed: u64,
    pub lasso: LassoConfig,
    pub loess: LoessConfig,
    pub mars: MarsConfig,
    pub random_forest: ForestConfig,
    pub grad_boost: BoostConfig,
    pub extra_trees: ForestConfig,
    pub svr: SvrConfig,
    pub neural_net: NnetConfig,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            lasso: LassoConfig::default(),
            loess: LoessConfig::default(),
            mars: MarsConfig::default(),
            random_forest: ForestConfig::random_forest(),
            grad_boost: BoostConfig::default(),
            extra_trees: ForestConfig::extra_trees(),
            svr: SvrConfig::default(),
            neural_net: NnetConfig::default(),
        }
    }
}

impl LearnerConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.lasso.validate()?;
        self.loess.validate()?;
        self.mars.validate()?;
        self.random_forest.validate()?;
        self.grad_boost.validate()?;
        self.extra_trees.validate()?;
        self.svr.validate()?;
        self.neural_net.validate()
    }

    /// Seed used by learner `id` so different learners draw independent streams.
    pub fn seed_for(&self, id: LearnerId) -> u64 {
        mix_seed(self.seed, id.index() as u64 + 1)
    }
}

/// Learned parameters, one variant per algorithm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelParams {
    Linear(linear::LinearModel),
    Lasso(lasso::LassoModel),
    Loess(loess::LoessModel),
    Mars(mars::MarsModel),
    Forest(forest::Forest),
    Boost(boost::BoostModel),
    Svr(svr::SvrModel),
    Nnet(nnet::NnetModel),
}

/// A trained base learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub format_version: u32,
    pub learner_id: LearnerId,
    pub columns: Vec<ColumnDescriptor>,
    pub params: ModelParams,
}

impl FittedModel {
    /// Predicts for a dataset whose columns must match the training descriptors.
    pub fn predict(&self, data: &LaggedDataset) -> Result<Vec<f64>> {
        self.predict_matrix(data.x(), data.columns())
    }

    pub fn predict_matrix(&self, x: &Matrix, columns: &[ColumnDescriptor]) -> Result<Vec<f64>> {
        if columns != self.columns.as_slice() {
            return Err(Error::ColumnMismatch(format!(
                "model trained on [{}], got [{}]",
                join(&self.columns),
                join(columns)
            )));
        }
        if x.cols() != self.columns.len() {
            return Err(Error::ColumnMismatch(format!(
                "matrix has {} columns, model expects {}",
                x.cols(),
                self.columns.len()
            )));
        }
        if !x.is_finite() {
            return Err(Error::InvalidInput(
                "prediction input contains non-finite values".into(),
            ));
        }
        Ok(match &self.params {
            ModelParams::Linear(m) => m.predict(x),
            ModelParams::Lasso(m) => m.predict(x),
            ModelParams::Loess(m) => m.predict(x),
            ModelParams::Mars(m) => m.predict(x),
            ModelParams::Forest(m) => m.predict(x),
            ModelParams::Boost(m) => m.predict(x),
            ModelParams::Svr(m) => m.predict(x),
            ModelParams::Nnet(m) => m.predict(x),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: FittedModel = serde_json::from_str(text)?;
        if model.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Config(format!(
                "unsupported model format version {} (expected {MODEL_FORMAT_VERSION})",
                model.format_version
            )));
        }
        Ok(model)
    }
}

fn join(cols: &[ColumnDescriptor]) -> String {
    cols.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

/// Fits learner `id` on `data`.
pub fn fit_learner(id: LearnerId, data: &LaggedDataset, config: &LearnerConfig) -> Result<FittedModel> {
    if data.n_rows() < 2 {
        return Err(Error::InvalidInput(format!(
            "{id} needs at least 2 rows, got {}",
            data.n_rows()
        )));
    }
    if data.n_cols() == 0 {
        return Err(Error::InvalidInput(format!("{id} needs at least one predictor")));
    }
    data.validate_finite()?;
    let (x, y) = (data.x(), data.y());
    let seed = config.seed_for(id);
    let params = match id {
        LearnerId::LinearRegression => ModelParams::Linear(linear::fit_ols(x, y)),
        LearnerId::Lasso => ModelParams::Lasso(lasso::fit_lasso(x, y, &config.lasso)?),
        LearnerId::Loess => ModelParams::Loess(loess::fit_loess(x, y, &config.loess)?),
        LearnerId::Mars => ModelParams::Mars(mars::mars_build(x, y, &config.mars, MarsVariant::Mars)?),
        LearnerId::PolyMars => ModelParams::Mars(mars::mars_build(x, y, &config.mars, MarsVariant::PolyMars)?),
        LearnerId::RandomForest => ModelParams::Forest(forest::fit_forest(x, y, &config.random_forest, seed)?),
        LearnerId::ExtraTrees => ModelParams::Forest(forest::fit_forest(x, y, &config.extra_trees, seed)?),
        LearnerId::GradBoost => ModelParams::Boost(boost::fit_gradient_boosting(x, y, &config.grad_boost)?),
        LearnerId::Svr => ModelParams::Svr(svr::fit_svr(x, y, &config.svr, seed)?),
        LearnerId::NeuralNet => ModelParams::Nnet(nnet::train_neural_net(x, y, &config.neural_net, seed)?),
    };
    Ok(FittedModel {
        format_version: MODEL_FORMAT_VERSION,
        learner_id: id,
        columns: data.columns().to_vec(),
        params,
    })
}

pub fn predict_learner(model: &FittedModel, data: &LaggedDataset) -> Result<Vec<f64>> {
    model.predict(data)
}
