//! Per-basin pipeline and multi-basin experiments.

mod config;
mod report;

use chrono::NaiveDate;
use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::{ExperimentConfig, FoldSchemeKind, Manifest};
pub use report::{
    aggregate, export_report, Aggregates, BoxStats, ExperimentReport, ExportedFile, MetricAggregate, WeightRank,
    REPORT_FORMAT_VERSION,
};

use crate::data::{build_supervised, generate_synthetic_basin, load_basin_csv, split_periods, BasinSeries, DateRange};
use crate::ensemble::{
    best_learner_select, cv_folds, cv_predictions, equal_weight_combination, solve_simplex_weights,
    weighted_combination, Configured, EnsembleWeights, FoldLearner, FoldScheme, SIMPLEX_MAX_ITER, SIMPLEX_TOL,
};
use crate::error::{Error, Result};
use crate::learners::{fit_learner, LearnerConfig, LearnerId};
use crate::metrics::{compute_metrics, Algorithm, MetricReport};
use crate::seed::{basin_seed, mix_seed};
use crate::select::{permutation_vim, select_predictors, PredictorSet, VimScores};

/// Test-period forecasts of all algorithms, in `Algorithm::ALL` order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forecasts {
    pub dates: Vec<NaiveDate>,
    pub observed: Vec<f64>,
    pub predicted: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasinResult {
    pub basin_id: String,
    pub seed: u64,
    pub train: DateRange,
    pub test: DateRange,
    pub importance: VimScores,
    pub predictors: PredictorSet,
    pub weights: EnsembleWeights,
    /// Cross-validated MSE of each base learner.
    pub cv_mse: Vec<f64>,
    pub best_learner: LearnerId,
    /// One entry per algorithm in `Algorithm::ALL` order.
    pub metrics: Vec<MetricReport>,
    pub forecasts: Option<Forecasts>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasinFailure {
    pub basin_id: String,
    pub reason: String,
}

fn stage<T>(basin: &str, name: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Stage {
        basin: basin.to_string(),
        stage: name,
        source: Box::new(e),
    })
}

fn clip(v: &mut [f64]) {
    v.iter_mut().for_each(|x| *x = x.max(0.0));
}

/// Runs selection, stacking, refitting and evaluation for one basin.
pub fn run_basin_pipeline(series: &BasinSeries, config: &ExperimentConfig) -> Result<BasinResult> {
    let id = series.basin_id();
    let seed = basin_seed(config.master_seed, id);
    let (train, test) = stage(id, "split", split_periods(series, &config.split, config.lag_window))?;

    let candidates = stage(
        id,
        "candidates",
        build_supervised(series, config.lag_window, &train, None),
    )?;
    let vim_seed = mix_seed(seed, 0x0056_494d);
    let importance = stage(
        id,
        "importance",
        permutation_vim(&candidates, &config.importance, vim_seed),
    )?;
    let predictors = stage(id, "selection", select_predictors(&importance, config.per_type))?;
    if predictors.fallback {
        warn!("basin {id}: no positive importance, using Q1 only");
    }
    drop(candidates);

    let subset = Some(predictors.selected.as_slice());
    let train_data = stage(
        id,
        "datasets",
        build_supervised(series, config.lag_window, &train, subset),
    )?;
    let test_data = stage(
        id,
        "datasets",
        build_supervised(series, config.lag_window, &test, subset),
    )?;

    let learner_config = LearnerConfig {
        seed,
        ..config.learners.clone()
    };
    let scheme = match config.fold_scheme {
        FoldSchemeKind::Contiguous => FoldScheme::Contiguous,
        FoldSchemeKind::Shuffled => FoldScheme::Shuffled {
            seed: mix_seed(seed, 0x464f_4c44),
        },
    };
    let folds = stage(
        id,
        "cross_validation",
        cv_folds(train_data.n_rows(), config.folds, scheme),
    )?;
    let configured: Vec<Configured> = LearnerId::ALL
        .iter()
        .map(|&lid| Configured {
            id: lid,
            config: &learner_config,
        })
        .collect();
    let refs: Vec<&dyn FoldLearner> = configured.iter().map(|c| c as &dyn FoldLearner).collect();
    let level_one = stage(id, "cross_validation", cv_predictions(&train_data, &refs, &folds))?;
    let mut weights = stage(
        id,
        "weights",
        solve_simplex_weights(&level_one.z, &level_one.y, SIMPLEX_TOL, SIMPLEX_MAX_ITER),
    )?;
    weights.learners = level_one.learners.clone();
    weights.fold_scheme = Some(scheme);
    let best = stage(id, "weights", best_learner_select(&level_one))?;

    let mut base = Vec::with_capacity(LearnerId::ALL.len());
    for &lid in &LearnerId::ALL {
        let model = stage(
            id,
            "refit",
            fit_learner(lid, &train_data, &learner_config).map_err(|e| Error::Learner {
                learner: lid.name().to_string(),
                fold: None,
                source: Box::new(e),
            }),
        )?;
        let mut pred = stage(id, "predict", model.predict(&test_data))?;
        if config.clip_negative {
            clip(&mut pred);
        }
        base.push(pred);
    }
    let mut predicted = base.clone();
    predicted.push(stage(id, "combine", weighted_combination(&weights.w, &base))?);
    predicted.push(stage(id, "combine", equal_weight_combination(&base))?);
    predicted.push(base[best].clone());

    let observed = test_data.y();
    let metrics = Algorithm::ALL
        .iter()
        .zip(&predicted)
        .map(|(&a, f)| compute_metrics(a, f, observed))
        .collect::<Result<Vec<_>>>();
    let metrics = stage(id, "metrics", metrics)?;

    Ok(BasinResult {
        basin_id: id.to_string(),
        seed,
        train,
        test,
        importance,
        predictors,
        cv_mse: level_one.column_mse(),
        weights,
        best_learner: LearnerId::ALL[best],
        metrics,
        forecasts: config.store_forecasts.then(|| Forecasts {
            dates: test_data.target_dates().to_vec(),
            observed: observed.to_vec(),
            predicted,
        }),
    })
}

enum BasinSource<'a> {
    File(&'a std::path::Path, crate::data::CsvFormat),
    Synthetic(u64, usize, &'a crate::data::SyntheticParams),
}

impl BasinSource<'_> {
    fn id(&self) -> String {
        match self {
            BasinSource::File(p, _) => p.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string(),
            BasinSource::Synthetic(seed, ..) => format!("synth-{seed}"),
        }
    }

    fn load(&self) -> Result<BasinSeries> {
        match self {
            BasinSource::File(p, fmt) => load_basin_csv(p, *fmt),
            BasinSource::Synthetic(seed, n, params) => generate_synthetic_basin(*seed, *n, params),
        }
    }
}

fn sources(manifest: &Manifest) -> Vec<BasinSource<'_>> {
    match manifest {
        Manifest::Files { paths, format } => paths.iter().map(|p| BasinSource::File(p, *format)).collect(),
        Manifest::Synthetic {
            n_basins,
            n_days,
            first_seed,
            params,
        } => (0..*n_basins as u64)
            .map(|i| BasinSource::Synthetic(first_seed + i, *n_days, params))
            .collect(),
    }
}

/// Runs every basin of the manifest on a pool of `config.workers` threads
/// and aggregates the results in basin-id order.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let srcs = sources(&config.manifest);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let outcomes: Vec<(String, Result<BasinResult>)> = pool.install(|| {
        srcs.par_iter()
            .map(|src| {
                let id = src.id();
                let r = stage(&id, "load", src.load()).and_then(|s| run_basin_pipeline(&s, config));
                match &r {
                    Ok(_) => info!("basin {id} done"),
                    Err(e) => warn!("basin {id} skipped: {e}"),
                }
                (id, r)
            })
            .collect()
    });

    let mut basins = Vec::new();
    let mut failures = Vec::new();
    let mut first_error = None;
    for (id, r) in outcomes {
        match r {
            Ok(b) => basins.push(b),
            Err(e) => {
                failures.push(BasinFailure {
                    basin_id: id,
                    reason: e.to_string(),
                });
                first_error.get_or_insert(e);
            }
        }
    }
    if basins.is_empty() {
        // every basin failed; surface the first cause so callers can classify it
        return Err(first_error.expect("non-empty manifest"));
    }
    aggregate(config.clone(), basins, failures)
}
