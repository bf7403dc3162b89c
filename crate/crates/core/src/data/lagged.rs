use std::fmt;

use chrono::{Days, NaiveDate};
use serde::{Deserialize, Serialize};

use super::{BasinSeries, DateRange};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Process {
    Q,
    P,
    T,
}

impl Process {
    pub const ALL: [Process; 3] = [Process::Q, Process::P, Process::T];
}

impl fmt::Display for Process {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Process::Q => "Q",
            Process::P => "P",
            Process::T => "T",
        })
    }
}

/// A lagged predictor: the value of `process` exactly `lag` days before the target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ColumnDescriptor {
    pub process: Process,
    pub lag: usize,
}

impl ColumnDescriptor {
    pub fn new(process: Process, lag: usize) -> Self {
        Self { process, lag }
    }
}

impl fmt::Display for ColumnDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.process, self.lag)
    }
}

/// Canonical column order for a lag window: Q lags 1..L, P lags 1..L, T lags 1..L.
pub fn canonical_columns(lag_window: usize) -> Vec<ColumnDescriptor> {
    Process::ALL
        .iter()
        .flat_map(|&p| (1..=lag_window).map(move |lag| ColumnDescriptor::new(p, lag)))
        .collect()
}

/// Supervised matrix of lagged predictors and next-day streamflow targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaggedDataset {
    x: Matrix,
    y: Vec<f64>,
    columns: Vec<ColumnDescriptor>,
    target_dates: Vec<NaiveDate>,
}

impl LaggedDataset {
    pub fn from_parts(
        x: Matrix,
        y: Vec<f64>,
        columns: Vec<ColumnDescriptor>,
        target_dates: Vec<NaiveDate>,
    ) -> Result<Self> {
        if x.rows() != y.len() || target_dates.len() != y.len() {
            return Err(Error::InvalidInput(format!(
                "dataset has {} rows, {} targets and {} dates",
                x.rows(),
                y.len(),
                target_dates.len()
            )));
        }
        if x.cols() != columns.len() {
            return Err(Error::InvalidInput(format!(
                "dataset has {} columns but {} descriptors",
                x.cols(),
                columns.len()
            )));
        }
        Ok(Self {
            x,
            y,
            columns,
            target_dates,
        })
    }

    /// Wraps a plain design matrix, labelling its columns as streamflow lags
    /// 1..d and its rows with consecutive dates from 2000-01-01.
    pub fn from_matrix(x: Matrix, y: Vec<f64>) -> Result<Self> {
        let columns = (1..=x.cols()).map(|l| ColumnDescriptor::new(Process::Q, l)).collect();
        let origin = NaiveDate::from_ymd_opt(2000, 1, 1).expect("valid date");
        let dates = (0..y.len() as u64).map(|i| origin + Days::new(i)).collect();
        Self::from_parts(x, y, columns, dates)
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn columns(&self) -> &[ColumnDescriptor] {
        &self.columns
    }

    pub fn target_dates(&self) -> &[NaiveDate] {
        &self.target_dates
    }

    pub fn n_rows(&self) -> usize {
        self.y.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn subset_rows(&self, idx: &[usize]) -> Self {
        Self {
            x: self.x.select_rows(idx),
            y: idx.iter().map(|&i| self.y[i]).collect(),
            columns: self.columns.clone(),
            target_dates: idx.iter().map(|&i| self.target_dates[i]).collect(),
        }
    }

    /// Replaces the targets, keeping predictors and dates.
    pub fn with_targets(&self, y: Vec<f64>) -> Result<Self> {
        Self::from_parts(self.x.clone(), y, self.columns.clone(), self.target_dates.clone())
    }

    /// Checks that every row and value is usable for fitting.
    pub fn validate_finite(&self) -> Result<()> {
        if !self.x.is_finite() || self.y.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("dataset contains non-finite values".into()));
        }
        Ok(())
    }
}

/// Builds the lagged supervised dataset for the targets in `range`.
///
/// Without `subset`, all `3 * lag_window` columns are produced in canonical
/// order. With `subset`, only those descriptors are produced, still in
/// canonical relative order.
pub fn build_supervised(
    series: &BasinSeries,
    lag_window: usize,
    range: &DateRange,
    subset: Option<&[ColumnDescriptor]>,
) -> Result<LaggedDataset> {
    if lag_window == 0 {
        return Err(Error::InvalidInput("lag window must be positive".into()));
    }
    if range.len_days() == 0 {
        return Err(Error::InvalidPeriod("empty target range".into()));
    }
    let columns = match subset {
        None => canonical_columns(lag_window),
        Some(sel) => {
            if sel.is_empty() {
                return Err(Error::InvalidInput("empty predictor subset".into()));
            }
            if let Some(bad) = sel.iter().find(|c| c.lag == 0 || c.lag > lag_window) {
                return Err(Error::InvalidInput(format!(
                    "descriptor {bad} lies outside the lag window 1..={lag_window}"
                )));
            }
            let mut cols = sel.to_vec();
            cols.sort();
            cols.dedup();
            cols
        }
    };

    let first = series.index_of(range.start).ok_or_else(|| {
        Error::InsufficientHistory(format!(
            "range start {} lies outside the record {}..{}",
            range.start,
            series.start_date(),
            series.end_date()
        ))
    })?;
    let last = series.index_of(range.end).ok_or_else(|| {
        Error::InvalidPeriod(format!(
            "range end {} lies outside the record ending {}",
            range.end,
            series.end_date()
        ))
    })?;
    let max_lag = columns.iter().map(|c| c.lag).max().unwrap_or(0);
    if first < max_lag {
        return Err(Error::InsufficientHistory(format!(
            "target {} needs {max_lag} days of history but the record starts {}",
            range.start,
            series.start_date()
        )));
    }

    let n = last - first + 1;
    let d = columns.len();
    let mut data = Vec::with_capacity(n * d);
    let mut y = Vec::with_capacity(n);
    let mut dates = Vec::with_capacity(n);
    for idx in first..=last {
        for c in &columns {
            data.push(series.values(c.process)[idx - c.lag]);
        }
        y.push(series.q()[idx]);
        dates.push(series.date_at(idx));
    }
    LaggedDataset::from_parts(Matrix::new(n, d, data)?, y, columns, dates)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn series(n: usize) -> BasinSeries {
        let q = (0..n).map(|i| i as f64).collect();
        let p = (0..n).map(|i| 100.0 + i as f64).collect();
        let t = (0..n).map(|i| -(i as f64)).collect();
        BasinSeries::new("s", NaiveDate::from_ymd_opt(2004, 1, 1).unwrap(), q, p, t).unwrap()
    }

    #[test]
    fn single_row_full_window() {
        let s = series(31);
        let day31 = s.date_at(30);
        let ds = build_supervised(&s, 30, &DateRange::new(day31, day31).unwrap(), None).unwrap();
        assert_eq!((ds.n_rows(), ds.n_cols()), (1, 90));
        assert_eq!(ds.x().get(0, 0), s.q()[29]);
        assert_eq!(ds.columns()[0], ColumnDescriptor::new(Process::Q, 1));
        assert_eq!(ds.columns()[30], ColumnDescriptor::new(Process::P, 1));
        assert_eq!(ds.columns()[89], ColumnDescriptor::new(Process::T, 30));
        assert_eq!(ds.y(), &[30.0]);
    }

    #[test]
    fn default_training_period_row_count() {
        let start = NaiveDate::from_ymd_opt(2003, 12, 2).unwrap();
        let end = NaiveDate::from_ymd_opt(2008, 12, 31).unwrap();
        let n = DateRange::new(start, end).unwrap().len_days();
        let s = BasinSeries::new("b", start, vec![1.0; n], vec![0.0; n], vec![0.0; n]).unwrap();
        let t1 = DateRange::new(NaiveDate::from_ymd_opt(2004, 1, 1).unwrap(), end).unwrap();
        let ds = build_supervised(&s, 30, &t1, None).unwrap();
        assert_eq!(ds.n_rows(), 1827);
    }

    #[test]
    fn subset_matches_index_lookup() {
        let s = series(60);
        let range = DateRange::new(s.date_at(40), s.date_at(59)).unwrap();
        let subset = [
            ColumnDescriptor::new(Process::P, 2),
            ColumnDescriptor::new(Process::Q, 1),
        ];
        let ds = build_supervised(&s, 30, &range, Some(&subset)).unwrap();
        assert_eq!(ds.n_cols(), 2);
        // canonical order puts Q before P
        assert_eq!(ds.columns()[0], ColumnDescriptor::new(Process::Q, 1));
        for i in 0..ds.n_rows() {
            let idx = 40 + i;
            assert_eq!(ds.x().get(i, 0), s.q()[idx - 1]);
            assert_eq!(ds.x().get(i, 1), s.p()[idx - 2]);
        }
    }

    #[test]
    fn insufficient_history_and_empty_range() {
        let s = series(40);
        let range = DateRange::new(s.date_at(5), s.date_at(10)).unwrap();
        assert!(matches!(
            build_supervised(&s, 30, &range, None),
            Err(Error::InsufficientHistory(_))
        ));
        let past_end = DateRange::new(s.date_at(35), s.date_at(35) + Days::new(10)).unwrap();
        assert!(build_supervised(&s, 30, &past_end, None).is_err());
    }

    proptest! {
        #[test]
        fn every_entry_is_the_lagged_value(n in 8usize..40, lag in 1usize..6, seed in 0u64..1000) {
            prop_assume!(n > lag + 1);
            let q: Vec<f64> = (0..n).map(|i| ((i as u64 * 31 + seed) % 17) as f64).collect();
            let p: Vec<f64> = (0..n).map(|i| ((i as u64 * 7 + seed) % 5) as f64).collect();
            let t: Vec<f64> = (0..n).map(|i| ((i as u64 * 13 + seed) % 11) as f64 - 5.0).collect();
            let s = BasinSeries::new("p", NaiveDate::from_ymd_opt(2000, 2, 20).unwrap(), q, p, t).unwrap();
            let range = DateRange::new(s.date_at(lag), s.end_date()).unwrap();
            let ds = build_supervised(&s, lag, &range, None).unwrap();
            prop_assert_eq!(ds.n_rows(), range.len_days());
            prop_assert_eq!(ds.n_cols(), 3 * lag);
            for i in 0..ds.n_rows() {
                let idx = s.index_of(ds.target_dates()[i]).unwrap();
                for (j, c) in ds.columns().iter().enumerate() {
                    prop_assert_eq!(ds.x().get(i, j), s.values(c.process)[idx - c.lag]);
                }
            }
        }
    }
}
