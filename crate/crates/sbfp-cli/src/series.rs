//! Price/level series loading.
//!
//! Input format: UTF-8 CSV with header `timestamp,value`, comma separator.
//! Timestamps are ISO-8601 (`2024-01-15`, `2024-01-15T10:00:00Z`, RFC 3339
//! offsets) or integer/decimal epoch seconds, strictly increasing; values
//! must be finite.

use std::fmt;
use std::fs;
use std::path::Path;

use chrono::{DateTime, NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

/// Unit that internal (abstract) time is measured in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum TimeUnit {
    Sec,
    Day,
}

impl TimeUnit {
    pub fn seconds(self) -> f64 {
        match self {
            TimeUnit::Sec => 1.0,
            TimeUnit::Day => 86_400.0,
        }
    }
}

/// An ordered series of (epoch seconds, value) observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesData {
    pub points: Vec<(f64, f64)>,
    pub source: String,
}

impl SeriesData {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Debug)]
pub enum SeriesError {
    Io { path: String, source: std::io::Error },
    Parse { line: usize, column: &'static str, message: String },
    MissingHeader,
    EmptySeries,
}

impl fmt::Display for SeriesError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Io { path, source } => write!(f, "cannot read {path}: {source}"),
            Self::Parse { line, column, message } => {
                write!(f, "line {line}, column {column}: {message}")
            }
            Self::MissingHeader => write!(f, "missing `timestamp,value` header"),
            Self::EmptySeries => write!(f, "no data rows"),
        }
    }
}

impl std::error::Error for SeriesError {}

fn parse_timestamp(raw: &str, line: usize) -> Result<f64, SeriesError> {
    let raw = raw.trim();
    if let Ok(epoch) = raw.parse::<f64>() {
        if epoch.is_finite() {
            return Ok(epoch);
        }
        return Err(SeriesError::Parse {
            line,
            column: "timestamp",
            message: format!("non-finite epoch value {raw:?}"),
        });
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(raw) {
        return Ok(dt.timestamp() as f64 + f64::from(dt.timestamp_subsec_nanos()) * 1e-9);
    }
    if let Ok(dt) = NaiveDateTime::parse_from_str(raw, "%Y-%m-%dT%H:%M:%S") {
        return Ok(dt.and_utc().timestamp() as f64);
    }
    if let Ok(d) = NaiveDate::parse_from_str(raw, "%Y-%m-%d") {
        return Ok(d.and_hms_opt(0, 0, 0).expect("midnight").and_utc().timestamp() as f64);
    }
    Err(SeriesError::Parse {
        line,
        column: "timestamp",
        message: format!("{raw:?} is neither epoch seconds nor ISO-8601"),
    })
}

/// Load a series, rejecting malformed rows with their 1-based line number.
pub fn load_csv(path: impl AsRef<Path>) -> Result<SeriesData, SeriesError> {
    let path = path.as_ref();
    let raw = fs::read_to_string(path).map_err(|source| SeriesError::Io {
        path: path.display().to_string(),
        source,
    })?;
    load_csv_str(&raw, &path.display().to_string())
}

/// Parse CSV text (the file-loading half split out for tests).
pub fn load_csv_str(raw: &str, source: &str) -> Result<SeriesData, SeriesError> {
    let mut lines = raw.lines().enumerate();
    let header = lines.next().ok_or(SeriesError::MissingHeader)?;
    let header_norm = header.1.trim_start_matches('\u{feff}').trim();
    if !header_norm.eq_ignore_ascii_case("timestamp,value") {
        return Err(SeriesError::MissingHeader);
    }

    let mut points: Vec<(f64, f64)> = Vec::new();
    for (idx, row) in lines {
        let line = idx + 1; // 1-based
        if row.trim().is_empty() {
            continue;
        }
        let mut fields = row.splitn(3, ',');
        let ts_raw = fields.next().unwrap_or("");
        let value_raw = fields.next().ok_or(SeriesError::Parse {
            line,
            column: "value",
            message: "missing value field".into(),
        })?;
        if fields.next().is_some() {
            return Err(SeriesError::Parse {
                line,
                column: "value",
                message: "too many fields".into(),
            });
        }
        let timestamp = parse_timestamp(ts_raw, line)?;
        let value: f64 = value_raw.trim().parse().map_err(|_| SeriesError::Parse {
            line,
            column: "value",
            message: format!("{:?} is not a number", value_raw.trim()),
        })?;
        if !value.is_finite() {
            return Err(SeriesError::Parse {
                line,
                column: "value",
                message: "value must be finite".into(),
            });
        }
        if let Some(&(prev, _)) = points.last() {
            if timestamp <= prev {
                return Err(SeriesError::Parse {
                    line,
                    column: "timestamp",
                    message: "non-increasing timestamp".into(),
                });
            }
        }
        points.push((timestamp, value));
    }
    if points.is_empty() {
        return Err(SeriesError::EmptySeries);
    }
    Ok(SeriesData { points, source: source.to_string() })
}
