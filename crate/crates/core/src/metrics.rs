//! Forecast error metrics, per-basin algorithm rankings and relative
//! improvements against a benchmark.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::learners::LearnerId;

pub const N_ALGORITHMS: usize = LearnerId::ALL.len() + 3;

/// One of the evaluated algorithms: the ten base learners followed by the
/// three combiners. Serialized by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    Base(LearnerId),
    SuperLearner,
    EqualWeight,
    BestLearner,
}

impl Algorithm {
    pub const ALL: [Algorithm; N_ALGORITHMS] = {
        let mut out = [Algorithm::SuperLearner; N_ALGORITHMS];
        let mut i = 0;
        while i < LearnerId::ALL.len() {
            out[i] = Algorithm::Base(LearnerId::ALL[i]);
            i += 1;
        }
        out[i + 1] = Algorithm::EqualWeight;
        out[i + 2] = Algorithm::BestLearner;
        out
    };

    pub fn index(self) -> usize {
        let m = LearnerId::ALL.len();
        match self {
            Algorithm::Base(id) => id.index(),
            Algorithm::SuperLearner => m,
            Algorithm::EqualWeight => m + 1,
            Algorithm::BestLearner => m + 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Base(id) => id.name(),
            Algorithm::SuperLearner => "super_learner",
            Algorithm::EqualWeight => "equal_weight",
            Algorithm::BestLearner => "best_learner",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown algorithm '{s}'")))
    }
}

impl Serialize for Algorithm {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for Algorithm {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    LowerBetter,
    HigherBetter,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Rmse,
    Mae,
    Medae,
    R2,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::Rmse, Metric::Mae, Metric::Medae, Metric::R2];

    pub fn direction(self) -> Direction {
        match self {
            Metric::R2 => Direction::HigherBetter,
            _ => Direction::LowerBetter,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Metric::Rmse => "rmse",
            Metric::Mae => "mae",
            Metric::Medae => "medae",
            Metric::R2 => "r2",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub algorithm: Algorithm,
    pub rmse: f64,
    pub mae: f64,
    pub medae: f64,
    /// `None` when either series has zero variance.
    pub r2: Option<f64>,
}

impl MetricReport {
    pub fn get(&self, metric: Metric) -> Option<f64> {
        match metric {
            Metric::Rmse => Some(self.rmse),
            Metric::Mae => Some(self.mae),
            Metric::Medae => Some(self.medae),
            Metric::R2 => self.r2,
        }
    }
}

fn check_pair(f: &[f64], o: &[f64]) -> Result<()> {
    if f.len() != o.len() {
        return Err(Error::InvalidInput(format!(
            "{} forecasts vs {} observations",
            f.len(),
            o.len()
        )));
    }
    if f.is_empty() {
        return Err(Error::InvalidInput("empty forecast vector".into()));
    }
    if f.iter().chain(o).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite forecast or observation".into()));
    }
    Ok(())
}

pub fn error_vector(f: &[f64], o: &[f64]) -> Result<Vec<f64>> {
    check_pair(f, o)?;
    Ok(f.iter().zip(o).map(|(a, b)| a - b).collect())
}

fn median_of_sorted(v: &[f64]) -> f64 {
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Squared sample correlation, or `None` when either side is constant.
pub fn squared_correlation(f: &[f64], o: &[f64]) -> Option<f64> {
    let n = f.len() as f64;
    let mf = f.iter().sum::<f64>() / n;
    let mo = o.iter().sum::<f64>() / n;
    let (mut sff, mut soo, mut sfo) = (0.0, 0.0, 0.0);
    for (a, b) in f.iter().zip(o) {
        let (da, db) = (a - mf, b - mo);
        sff += da * da;
        soo += db * db;
        sfo += da * db;
    }
    if sff == 0.0 || soo == 0.0 {
        return None;
    }
    Some((sfo * sfo / (sff * soo)).clamp(0.0, 1.0))
}

pub fn compute_metrics(algorithm: Algorithm, f: &[f64], o: &[f64]) -> Result<MetricReport> {
    let e = error_vector(f, o)?;
    if e.len() < 2 {
        return Err(Error::InvalidInput("metrics need at least two points".into()));
    }
    let n = e.len() as f64;
    let mut abs: Vec<f64> = e.iter().map(|v| v.abs()).collect();
    let mae = abs.iter().sum::<f64>() / n;
    let rmse = (e.iter().map(|v| v * v).sum::<f64>() / n).sqrt();
    abs.sort_by(f64::total_cmp);
    Ok(MetricReport {
        algorithm,
        rmse,
        mae,
        medae: median_of_sorted(&abs),
        r2: squared_correlation(f, o),
    })
}

/// Rank 1 is best. Ties share the mean of the ranks they span; undefined
/// values rank after every defined one and tie among themselves.
pub fn rank_algorithms(values: &[Option<f64>], direction: Direction) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::InvalidInput("nothing to rank".into()));
    }
    if values.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite metric value".into()));
    }
    let key = |v: Option<f64>| -> (u8, f64) {
        match v {
            Some(x) if direction == Direction::LowerBetter => (0, x),
            Some(x) => (0, -x),
            None => (1, 0.0),
        }
    };
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| {
        let (ka, kb) = (key(values[a]), key(values[b]));
        ka.0.cmp(&kb.0).then(ka.1.total_cmp(&kb.1))
    });
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && key(values[order[j]]) == key(values[order[i]]) {
            j += 1;
        }
        // positions i..j hold ranks i+1..=j
        let avg = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = avg;
        }
        i = j;
    }
    Ok(ranks)
}

/// Percent improvement of `candidate` over `benchmark`: an error reduction
/// for lower-is-better metrics and a relative increase for r².
pub fn relative_improvement(benchmark: f64, candidate: f64, direction: Direction) -> Result<f64> {
    if benchmark == 0.0 || !benchmark.is_finite() || !candidate.is_finite() {
        return Err(Error::InvalidInput(format!(
            "relative improvement undefined for benchmark {benchmark}, candidate {candidate}"
        )));
    }
    Ok(match direction {
        Direction::LowerBetter => 100.0 * (benchmark - candidate) / benchmark,
        Direction::HigherBetter => 100.0 * (candidate - benchmark) / benchmark,
    })
}
