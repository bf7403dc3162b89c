use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{BasinFailure, BasinResult, ExperimentConfig};
use crate::error::{Error, Result};
use crate::learners::LearnerId;
use crate::metrics::{rank_algorithms, relative_improvement, Algorithm, Metric, N_ALGORITHMS};

pub const REPORT_FORMAT_VERSION: u32 = 1;

const BENCHMARK: usize = 0; // linear regression
const _: () = assert!(matches!(LearnerId::ALL[BENCHMARK], LearnerId::LinearRegression));

/// Five-number summary plus mean over basins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxStats {
    pub count: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub mean: f64,
}

impl BoxStats {
    /// Quartiles by linear interpolation between order statistics.
    pub fn from_values(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let q = |p: f64| {
            let h = p * (v.len() - 1) as f64;
            let lo = h.floor() as usize;
            let hi = h.ceil() as usize;
            v[lo] + (h - lo as f64) * (v[hi] - v[lo])
        };
        Some(Self {
            count: v.len(),
            min: v[0],
            q1: q(0.25),
            median: q(0.5),
            q3: q(0.75),
            max: v[v.len() - 1],
            // summed in basin order so it matches a plain recomputation
            mean: ordered_mean(values),
        })
    }
}

fn ordered_mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricAggregate {
    pub metric: Metric,
    /// basin x algorithm ranks (1 = best), basins in report order.
    pub ranks: Vec<Vec<f64>>,
    /// basin x algorithm percent improvement over linear regression;
    /// `None` where undefined.
    pub improvements: Vec<Vec<Option<f64>>>,
    /// Mean rank per algorithm over the basins included for this metric;
    /// `None` when every basin was excluded.
    pub mean_ranks: Vec<Option<f64>>,
    pub mean_improvements: Vec<Option<f64>>,
    /// Distribution of the metric value per algorithm.
    pub distributions: Vec<Option<BoxStats>>,
    /// Basins left out of this metric's means because a value was undefined.
    pub excluded_basins: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightRank {
    pub basin_id: String,
    pub learner: LearnerId,
    pub weight: f64,
    /// Test-period rank of the learner among all algorithms, per metric in
    /// `Metric::ALL` order.
    pub ranks: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub basins: Vec<String>,
    pub metrics: Vec<MetricAggregate>,
    /// basin x base-learner weights.
    pub weights: Vec<Vec<f64>>,
    pub weight_distributions: Vec<Option<BoxStats>>,
    pub weight_vs_rank: Vec<WeightRank>,
    /// How often each base learner was the best by cross-validation.
    pub best_learner_counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub format_version: u32,
    pub config: ExperimentConfig,
    pub algorithms: Vec<Algorithm>,
    pub basins: Vec<BasinResult>,
    pub failures: Vec<BasinFailure>,
    pub aggregates: Aggregates,
    pub warnings: Vec<String>,
}

impl ExperimentReport {
    pub fn from_json(text: &str) -> Result<Self> {
        let r: Self = serde_json::from_str(text)?;
        if r.format_version != REPORT_FORMAT_VERSION {
            return Err(Error::InvalidInput(format!(
                "report format {} is not supported (expected {REPORT_FORMAT_VERSION})",
                r.format_version
            )));
        }
        Ok(r)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn basin(&self, id: &str) -> Option<&BasinResult> {
        self.basins.iter().find(|b| b.basin_id == id)
    }

    pub fn metric(&self, metric: Metric) -> &MetricAggregate {
        self.aggregates
            .metrics
            .iter()
            .find(|m| m.metric == metric)
            .expect("every metric is aggregated")
    }
}

/// Builds the report from per-basin results. Basins are sorted by id first
/// so the floating-point reductions do not depend on completion order.
pub fn aggregate(
    config: ExperimentConfig,
    mut basins: Vec<BasinResult>,
    mut failures: Vec<BasinFailure>,
) -> Result<ExperimentReport> {
    basins.sort_by(|a, b| a.basin_id.cmp(&b.basin_id));
    failures.sort_by(|a, b| a.basin_id.cmp(&b.basin_id));
    for b in &basins {
        if b.metrics.len() != N_ALGORITHMS || b.weights.w.len() != LearnerId::ALL.len() {
            return Err(Error::InvalidInput(format!(
                "basin {} has an incomplete result",
                b.basin_id
            )));
        }
    }
    let mut warnings: Vec<String> = failures
        .iter()
        .map(|f| format!("basin {} skipped: {}", f.basin_id, f.reason))
        .collect();
    for b in basins.iter().filter(|b| b.predictors.fallback) {
        warnings.push(format!(
            "basin {}: no predictor had positive importance; used Q1",
            b.basin_id
        ));
    }

    let mut metrics = Vec::new();
    for metric in Metric::ALL {
        let dir = metric.direction();
        let mut ranks = Vec::with_capacity(basins.len());
        let mut improvements = Vec::with_capacity(basins.len());
        let mut excluded = Vec::new();
        let mut included_ranks: Vec<&Vec<f64>> = Vec::new();
        for b in &basins {
            let values: Vec<Option<f64>> = b.metrics.iter().map(|m| m.get(metric)).collect();
            let r = rank_algorithms(&values, dir)?;
            let imp: Vec<Option<f64>> = match values[BENCHMARK] {
                Some(bench) if bench != 0.0 => values
                    .iter()
                    .map(|v| v.map(|c| relative_improvement(bench, c, dir)).transpose())
                    .collect::<Result<_>>()?,
                _ => vec![None; N_ALGORITHMS],
            };
            if values.iter().any(Option::is_none) {
                excluded.push(b.basin_id.clone());
                warnings.push(format!(
                    "basin {}: {metric} undefined for some algorithm; excluded from {metric} means",
                    b.basin_id
                ));
            }
            ranks.push(r);
            improvements.push(imp);
        }
        for (b, r) in basins.iter().zip(&ranks) {
            if !excluded.contains(&b.basin_id) {
                included_ranks.push(r);
            }
        }
        let mean_ranks: Vec<Option<f64>> = (0..N_ALGORITHMS)
            .map(|a| {
                let v: Vec<f64> = included_ranks.iter().map(|r| r[a]).collect();
                (!v.is_empty()).then(|| ordered_mean(&v))
            })
            .collect();
        if included_ranks.is_empty() {
            warnings.push(format!("no basin has a defined {metric} for every algorithm"));
        }
        let mean_improvements: Vec<Option<f64>> = (0..N_ALGORITHMS)
            .map(|a| {
                let v: Vec<f64> = basins
                    .iter()
                    .zip(&improvements)
                    .filter(|(b, _)| !excluded.contains(&b.basin_id))
                    .filter_map(|(_, imp)| imp[a])
                    .collect();
                (!v.is_empty()).then(|| ordered_mean(&v))
            })
            .collect();
        let distributions = (0..N_ALGORITHMS)
            .map(|a| {
                BoxStats::from_values(
                    &basins
                        .iter()
                        .filter_map(|b| b.metrics[a].get(metric))
                        .collect::<Vec<_>>(),
                )
            })
            .collect();
        metrics.push(MetricAggregate {
            metric,
            ranks,
            improvements,
            mean_ranks,
            mean_improvements,
            distributions,
            excluded_basins: excluded,
        });
    }

    let weights: Vec<Vec<f64>> = basins.iter().map(|b| b.weights.w.clone()).collect();
    let weight_distributions = (0..LearnerId::ALL.len())
        .map(|j| BoxStats::from_values(&weights.iter().map(|w| w[j]).collect::<Vec<_>>()))
        .collect();
    let mut weight_vs_rank = Vec::new();
    for (bi, b) in basins.iter().enumerate() {
        for (j, &lid) in LearnerId::ALL.iter().enumerate() {
            weight_vs_rank.push(WeightRank {
                basin_id: b.basin_id.clone(),
                learner: lid,
                weight: b.weights.w[j],
                ranks: metrics.iter().map(|m| m.ranks[bi][j]).collect(),
            });
        }
    }
    let mut best_learner_counts = vec![0; LearnerId::ALL.len()];
    basins
        .iter()
        .for_each(|b| best_learner_counts[b.best_learner.index()] += 1);

    Ok(ExperimentReport {
        format_version: REPORT_FORMAT_VERSION,
        config,
        algorithms: Algorithm::ALL.to_vec(),
        aggregates: Aggregates {
            basins: basins.iter().map(|b| b.basin_id.clone()).collect(),
            metrics,
            weights,
            weight_distributions,
            weight_vs_rank,
            best_learner_counts,
        },
        basins,
        failures,
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportedFile {
    pub file: String,
    pub bytes: usize,
    pub sha256: String,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn table(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::InvalidInput(format!("csv buffer: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn render(report: &ExperimentReport) -> Result<Vec<(&'static str, String)>> {
    let metric_header = ["basin_id", "algorithm", "rmse", "mae", "medae", "r2"];
    let per_algorithm = |f: &dyn Fn(usize, usize) -> Vec<String>| -> Vec<Vec<String>> {
        let mut rows = Vec::new();
        for (bi, b) in report.basins.iter().enumerate() {
            for (a, alg) in Algorithm::ALL.iter().enumerate() {
                let mut row = vec![b.basin_id.clone(), alg.name().to_string()];
                row.extend(f(bi, a));
                rows.push(row);
            }
        }
        rows
    };
    let metrics = table(
        &metric_header,
        per_algorithm(&|bi, a| {
            let m = &report.basins[bi].metrics[a];
            vec![m.rmse.to_string(), m.mae.to_string(), m.medae.to_string(), opt(m.r2)]
        }),
    )?;
    let agg = &report.aggregates.metrics;
    let ranks = table(
        &metric_header,
        per_algorithm(&|bi, a| agg.iter().map(|m| m.ranks[bi][a].to_string()).collect()),
    )?;
    let improvements = table(
        &metric_header,
        per_algorithm(&|bi, a| agg.iter().map(|m| opt(m.improvements[bi][a])).collect()),
    )?;
    let mut weight_header = vec!["basin_id"];
    weight_header.extend(LearnerId::ALL.iter().map(|l| l.name()));
    let weights = table(
        &weight_header,
        report.basins.iter().map(|b| {
            let mut row = vec![b.basin_id.clone()];
            row.extend(b.weights.w.iter().map(f64::to_string));
            row
        }),
    )?;
    let mut summary_header = vec!["algorithm"];
    let names: Vec<String> = Metric::ALL
        .iter()
        .flat_map(|m| [format!("mean_rank_{m}"), format!("mean_improvement_{m}")])
        .collect();
    summary_header.extend(names.iter().map(String::as_str));
    let summary = table(
        &summary_header,
        Algorithm::ALL.iter().enumerate().map(|(a, alg)| {
            let mut row = vec![alg.name().to_string()];
            for m in agg {
                row.push(opt(m.mean_ranks[a]));
                row.push(opt(m.mean_improvements[a]));
            }
            row
        }),
    )?;
    Ok(vec![
        ("report.json", report.to_json()? + "\n"),
        ("config.json", report.config.to_json()? + "\n"),
        ("metrics.csv", metrics),
        ("ranks.csv", ranks),
        ("improvements.csv", improvements),
        ("weights.csv", weights),
        ("summary.csv", summary),
    ])
}

/// Writes the report tables into `dir` plus `manifest.json` listing each
/// file with its SHA-256 digest.
pub fn export_report(report: &ExperimentReport, dir: &Path) -> Result<Vec<ExportedFile>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut listed = Vec::new();
    for (name, content) in render(report)? {
        let path = dir.join(name);
        std::fs::write(&path, &content).map_err(|e| Error::io(&path, e))?;
        let digest = Sha256::digest(content.as_bytes());
        listed.push(ExportedFile {
            file: name.to_string(),
            bytes: content.len(),
            sha256: hex::encode(digest),
        });
    }
    let path = dir.join("manifest.json");
    let mut text = serde_json::to_string_pretty(&listed)?;
    let _ = writeln!(text);
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(listed)
}
