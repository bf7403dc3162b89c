use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{Days, NaiveDate};
use serde::{Deserialize, Serialize};

use super::{mean_daily_temperature, BasinSeries};
use crate::error::{Error, Result};

/// Column layout of a basin CSV file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CsvFormat {
    /// `date,q,p,t`
    #[default]
    Simple,
    /// `date,prcp,tmin,tmax,q`; mean temperature is derived from the extremes.
    Camels,
}

impl std::str::FromStr for CsvFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "simple" => Ok(Self::Simple),
            "camels" => Ok(Self::Camels),
            other => Err(Error::Config(format!("unknown csv format `{other}`"))),
        }
    }
}

const MISSING_SENTINEL: f64 = -999.0;

/// Loads a basin record; the basin id is the file stem.
pub fn load_basin_csv(path: &Path, format: CsvFormat) -> Result<BasinSeries> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let id = path.file_stem().and_then(|s| s.to_str()).unwrap_or("basin").to_string();
    read_basin_csv(file, &id, format)
}

pub fn read_basin_csv<R: Read>(reader: R, basin_id: &str, format: CsvFormat) -> Result<BasinSeries> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let expected: &[&str] = match format {
        CsvFormat::Simple => &["date", "q", "p", "t"],
        CsvFormat::Camels => &["date", "prcp", "tmin", "tmax", "q"],
    };
    let mut positions = Vec::with_capacity(expected.len());
    for name in expected {
        let pos = headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::Parse {
                row: 0,
                reason: format!("header is missing column `{name}`"),
            })?;
        positions.push(pos);
    }

    let mut start: Option<NaiveDate> = None;
    let (mut q, mut p, mut t) = (Vec::new(), Vec::new(), Vec::new());
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::Parse {
            row,
            reason: e.to_string(),
        })?;
        let field = |k: usize| record.get(positions[k]).unwrap_or("");
        let date = NaiveDate::parse_from_str(field(0), "%Y-%m-%d").map_err(|e| Error::Parse {
            row,
            reason: format!("bad date `{}`: {e}", field(0)),
        })?;
        match start {
            None => start = Some(date),
            Some(s) => {
                let expected = s + Days::new(q.len() as u64);
                if date != expected {
                    return Err(Error::NonContiguous {
                        row,
                        expected,
                        found: date,
                    });
                }
            }
        }
        let value = |k: usize| parse_value(field(k), row, expected[k]);
        match format {
            CsvFormat::Simple => {
                q.push(value(1)?);
                p.push(value(2)?);
                t.push(value(3)?);
            }
            CsvFormat::Camels => {
                p.push(value(1)?);
                let (tmin, tmax) = (value(2)?, value(3)?);
                t.push(mean_daily_temperature(tmin, tmax).map_err(|e| Error::Parse {
                    row,
                    reason: e.to_string(),
                })?);
                q.push(value(4)?);
            }
        }
    }
    let start = start.ok_or_else(|| Error::Parse {
        row: 0,
        reason: "file contains no data rows".into(),
    })?;
    BasinSeries::new(basin_id, start, q, p, t)
}

fn parse_value(raw: &str, row: usize, column: &str) -> Result<f64> {
    let missing = || Error::MissingValue {
        row,
        column: column.to_string(),
    };
    if raw.is_empty() || raw.eq_ignore_ascii_case("na") || raw.eq_ignore_ascii_case("nan") {
        return Err(missing());
    }
    let v: f64 = raw.parse().map_err(|_| Error::Parse {
        row,
        reason: format!("column `{column}`: cannot parse `{raw}` as a number"),
    })?;
    if !v.is_finite() || v <= MISSING_SENTINEL {
        return Err(missing());
    }
    if v < 0.0 && column != "t" && column != "tmin" && column != "tmax" {
        return Err(Error::NegativeValue {
            row,
            column: column.to_string(),
            value: v,
        });
    }
    Ok(v)
}

/// Writes the record in the simple `date,q,p,t` layout at full precision.
pub fn write_basin_csv<W: Write>(series: &BasinSeries, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["date", "q", "p", "t"])?;
    for i in 0..series.len() {
        w.write_record([
            series.date_at(i).format("%Y-%m-%d").to_string(),
            series.q()[i].to_string(),
            series.p()[i].to_string(),
            series.t()[i].to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_simple_csv() {
        let text = "date,q,p,t\n2004-01-01,1,0,10\n2004-01-02,2,0,11\n2004-01-03,3,5,12\n";
        let s = read_basin_csv(text.as_bytes(), "x", CsvFormat::Simple).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.q(), &[1.0, 2.0, 3.0]);
        assert_eq!(s.p(), &[0.0, 0.0, 5.0]);
        assert_eq!(s.t(), &[10.0, 11.0, 12.0]);
        assert_eq!(s.start_date(), NaiveDate::from_ymd_opt(2004, 1, 1).unwrap());
    }

    #[test]
    fn gap_names_missing_date() {
        let text = "date,q,p,t\n2004-01-01,1,0,10\n2004-01-03,2,0,11\n";
        let err = read_basin_csv(text.as_bytes(), "x", CsvFormat::Simple).unwrap_err();
        match &err {
            Error::NonContiguous { row, expected, .. } => {
                assert_eq!(*row, 2);
                assert_eq!(expected.to_string(), "2004-01-02");
            }
            other => panic!("unexpected error {other}"),
        }
        assert!(err.to_string().contains("2004-01-02"));
    }

    #[test]
    fn camels_derives_mean_temperature() {
        let text = "date,prcp,tmin,tmax,q\n2004-01-01,1.5,0,10,0.3\n2004-01-02,0,-10.4,7.2,0.2\n";
        let s = read_basin_csv(text.as_bytes(), "x", CsvFormat::Camels).unwrap();
        assert_eq!(s.t()[0], 5.0);
        assert!((s.t()[1] + 1.6).abs() < 1e-12);
        assert_eq!(s.q(), &[0.3, 0.2]);
        assert_eq!(s.p(), &[1.5, 0.0]);
    }

    #[test]
    fn rejects_missing_negative_and_garbage() {
        let missing = "date,q,p,t\n2004-01-01,1,,10\n";
        assert!(matches!(
            read_basin_csv(missing.as_bytes(), "x", CsvFormat::Simple),
            Err(Error::MissingValue { row: 1, .. })
        ));
        let sentinel = "date,prcp,tmin,tmax,q\n2004-01-01,1,0,1,-999\n";
        assert!(matches!(
            read_basin_csv(sentinel.as_bytes(), "x", CsvFormat::Camels),
            Err(Error::MissingValue { row: 1, .. })
        ));
        let negative = "date,q,p,t\n2004-01-01,1,0,10\n2004-01-02,-2,0,10\n";
        assert!(matches!(
            read_basin_csv(negative.as_bytes(), "x", CsvFormat::Simple),
            Err(Error::NegativeValue { row: 2, .. })
        ));
        let garbage = "date,q,p,t\n2004-01-01,abc,0,10\n";
        assert!(matches!(
            read_basin_csv(garbage.as_bytes(), "x", CsvFormat::Simple),
            Err(Error::Parse { row: 1, .. })
        ));
        let order = "date,prcp,tmin,tmax,q\n2004-01-01,1,5,1,1\n";
        assert!(matches!(
            read_basin_csv(order.as_bytes(), "x", CsvFormat::Camels),
            Err(Error::Parse { row: 1, .. })
        ));
    }

    #[test]
    fn write_then_read_is_exact() {
        let text = "date,q,p,t\n2008-02-28,0.1,0.30000000000000004,-1.5\n2008-02-29,1e-7,2,3.141592653589793\n";
        let s = read_basin_csv(text.as_bytes(), "x", CsvFormat::Simple).unwrap();
        let mut buf = Vec::new();
        write_basin_csv(&s, &mut buf).unwrap();
        let again = read_basin_csv(buf.as_slice(), "x", CsvFormat::Simple).unwrap();
        assert_eq!(s, again);
    }
}
