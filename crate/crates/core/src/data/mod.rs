//! Daily basin records, lagged supervised datasets and period splits.

mod io;
mod lagged;
mod synth;

pub use chrono::NaiveDate;
pub use io::{load_basin_csv, read_basin_csv, write_basin_csv, CsvFormat};
pub use lagged::{build_supervised, canonical_columns, ColumnDescriptor, LaggedDataset, Process};
pub use synth::{generate_synthetic_basin, BucketParams, RunoffModel, SyntheticParams};

use chrono::Days;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default number of lagged days per process.
pub const DEFAULT_LAG_WINDOW: usize = 30;

/// Arithmetic mean of the daily extremes.
pub fn mean_daily_temperature(tmin: f64, tmax: f64) -> Result<f64> {
    if tmin > tmax {
        return Err(Error::TemperatureOrder { tmin, tmax });
    }
    Ok((tmin + tmax) / 2.0)
}

/// A day-contiguous daily record of streamflow, precipitation and mean
/// temperature for a single basin.
///
/// Streamflow and precipitation are in mm/day, temperature in °C.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasinSeries {
    basin_id: String,
    start_date: NaiveDate,
    q: Vec<f64>,
    p: Vec<f64>,
    t: Vec<f64>,
}

impl BasinSeries {
    pub fn new(
        basin_id: impl Into<String>,
        start_date: NaiveDate,
        q: Vec<f64>,
        p: Vec<f64>,
        t: Vec<f64>,
    ) -> Result<Self> {
        if q.is_empty() {
            return Err(Error::InvalidInput("basin series is empty".into()));
        }
        if p.len() != q.len() || t.len() != q.len() {
            return Err(Error::InvalidInput(format!(
                "series lengths differ: q={}, p={}, t={}",
                q.len(),
                p.len(),
                t.len()
            )));
        }
        for (name, values) in [("q", &q), ("p", &p), ("t", &t)] {
            for (i, &v) in values.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::MissingValue {
                        row: i + 1,
                        column: name.into(),
                    });
                }
                if name != "t" && v < 0.0 {
                    return Err(Error::NegativeValue {
                        row: i + 1,
                        column: name.into(),
                        value: v,
                    });
                }
            }
        }
        Ok(Self {
            basin_id: basin_id.into(),
            start_date,
            q,
            p,
            t,
        })
    }

    pub fn basin_id(&self) -> &str {
        &self.basin_id
    }

    pub fn start_date(&self) -> NaiveDate {
        self.start_date
    }

    pub fn end_date(&self) -> NaiveDate {
        self.date_at(self.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }

    pub fn t(&self) -> &[f64] {
        &self.t
    }

    pub fn values(&self, process: Process) -> &[f64] {
        match process {
            Process::Q => &self.q,
            Process::P => &self.p,
            Process::T => &self.t,
        }
    }

    pub fn date_at(&self, index: usize) -> NaiveDate {
        self.start_date + Days::new(index as u64)
    }

    /// Position of `date` in the record, if it lies inside it.
    pub fn index_of(&self, date: NaiveDate) -> Option<usize> {
        let offset = (date - self.start_date).num_days();
        (offset >= 0 && (offset as usize) < self.len()).then_some(offset as usize)
    }

    pub fn with_id(mut self, basin_id: impl Into<String>) -> Self {
        self.basin_id = basin_id.into();
        self
    }

    pub fn full_range(&self) -> DateRange {
        DateRange {
            start: self.start_date,
            end: self.end_date(),
        }
    }
}

/// Inclusive calendar-date interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DateRange {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl DateRange {
    pub fn new(start: NaiveDate, end: NaiveDate) -> Result<Self> {
        if end < start {
            return Err(Error::InvalidPeriod(format!(
                "range ends ({end}) before it starts ({start})"
            )));
        }
        Ok(Self { start, end })
    }

    pub fn len_days(&self) -> usize {
        ((self.end - self.start).num_days() + 1).max(0) as usize
    }

    pub fn contains(&self, date: NaiveDate) -> bool {
        self.start <= date && date <= self.end
    }

    pub fn overlaps(&self, other: &DateRange) -> bool {
        self.start <= other.end && other.start <= self.end
    }

    pub fn dates(&self) -> impl Iterator<Item = NaiveDate> + '_ {
        (0..self.len_days() as u64).map(move |d| self.start + Days::new(d))
    }
}

/// Training (T₁) and test (T₂) periods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeriodSplit {
    pub train: DateRange,
    pub test: DateRange,
}

impl PeriodSplit {
    pub fn new(train: DateRange, test: DateRange) -> Result<Self> {
        let split = Self { train, test };
        split.validate()?;
        Ok(split)
    }

    pub fn validate(&self) -> Result<()> {
        if self.train.overlaps(&self.test) {
            return Err(Error::InvalidPeriod(format!(
                "train {}..{} overlaps test {}..{}",
                self.train.start, self.train.end, self.test.start, self.test.end
            )));
        }
        let expected = self.train.end + Days::new(1);
        if self.test.start != expected {
            return Err(Error::InvalidPeriod(format!(
                "test period must start on {expected}, the day after training ends, not {}",
                self.test.start
            )));
        }
        Ok(())
    }

    /// 2004-01-01..2008-12-31 for training, 2009-01-01..2013-12-31 for testing.
    pub fn camels_default() -> Self {
        let d = |y, m, day| NaiveDate::from_ymd_opt(y, m, day).expect("valid date");
        Self {
            train: DateRange {
                start: d(2004, 1, 1),
                end: d(2008, 12, 31),
            },
            test: DateRange {
                start: d(2009, 1, 1),
                end: d(2013, 12, 31),
            },
        }
    }
}

/// Validates `split` against the record and returns the (train, test) ranges.
///
/// The first training target needs `lag_window` days of history before it.
pub fn split_periods(series: &BasinSeries, split: &PeriodSplit, lag_window: usize) -> Result<(DateRange, DateRange)> {
    split.validate()?;
    let earliest = series.start_date + Days::new(lag_window as u64);
    if split.train.start < earliest {
        return Err(Error::InsufficientHistory(format!(
            "training starts {} but {lag_window} days of history require a record \
             starting on or before {}; record starts {}",
            split.train.start,
            split.train.start - Days::new(lag_window as u64),
            series.start_date
        )));
    }
    if split.test.end > series.end_date() {
        return Err(Error::InvalidPeriod(format!(
            "test period ends {} but the record ends {}; missing {}..{}",
            split.test.end,
            series.end_date(),
            series.end_date() + Days::new(1),
            split.test.end
        )));
    }
    Ok((split.train, split.test))
}
