//! Super-learner ensembles for one-day-ahead daily streamflow forecasting.
//!
//! The crate covers the full pipeline: lagged predictor construction from
//! daily basin records, random-forest permutation importance for predictor
//! selection, ten base regression learners, a convex-weight super learner
//! trained on cross-validated predictions, equal-weight and best-learner
//! combiners, evaluation metrics, and a multi-basin experiment harness.

// `!(x > 0.0)` is used deliberately so NaN parameters are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod ensemble;
pub mod error;
pub mod harness;
pub mod learners;
pub mod linalg;
pub mod matrix;
pub mod metrics;
pub mod seed;
pub mod select;

pub use error::{Error, Result};
pub use matrix::Matrix;
