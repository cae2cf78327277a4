//! CSV ingestion and export.
//!
//! One header row, one observation per record. Row order is the time index.
//! The outcome column is required; a date column (`YYYY-MM` or `YYYY-MM-DD`)
//! is optional and, when present, must advance by exactly one month per row.

use std::io::{Read, Write};

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{TimeSeries, YearMonth};

/// Start month used when neither the configuration nor a date column anchors
/// the series.
pub const DEFAULT_START: YearMonth = YearMonth { year: 2000, month: 1 };

/// Column layout of an input file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct CsvSchema {
    #[serde(default = "default_value_column")]
    pub value_column: String,
    #[serde(default)]
    pub date_column: Option<String>,
}

fn default_value_column() -> String {
    "value".into()
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            value_column: default_value_column(),
            date_column: None,
        }
    }
}

fn column(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    let mut hits = headers.iter().enumerate().filter(|(_, h)| h.trim() == name);
    let Some((idx, _)) = hits.next() else {
        let have: Vec<_> = headers.iter().map(str::trim).collect();
        return Err(Error::Csv(format!("missing column {name:?}; header has {have:?}")));
    };
    if hits.next().is_some() {
        return Err(Error::Csv(format!("duplicate column {name:?}")));
    }
    Ok(idx)
}

/// Reads a series. `start` anchors the calendar; when a date column is
/// present its first entry must agree with `start` if both are given.
pub fn parse_csv<R: Read>(reader: R, schema: &CsvSchema, start: Option<YearMonth>) -> Result<TimeSeries> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| Error::Csv(e.to_string()))?.clone();
    if headers.is_empty() || headers.iter().all(str::is_empty) {
        return Err(Error::Csv("file is empty".into()));
    }
    let value_idx = column(&headers, &schema.value_column)?;
    let date_idx = schema.date_column.as_deref().map(|name| column(&headers, name)).transpose()?;

    let mut values = Vec::new();
    let mut first_date: Option<YearMonth> = None;
    let mut prev_date: Option<YearMonth> = None;
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::Csv(format!("row {row}: {e}")))?;
        let cell = record.get(value_idx).unwrap_or("");
        if cell.is_empty() {
            return Err(Error::Csv(format!("row {row}: blank value in column {:?}", schema.value_column)));
        }
        let v: f64 = cell
            .parse()
            .map_err(|_| Error::Csv(format!("row {row}: {cell:?} in column {:?} is not a number", schema.value_column)))?;
        values.push(v);

        if let Some(di) = date_idx {
            let raw = record.get(di).unwrap_or("");
            let date: YearMonth = raw.parse().map_err(|_| Error::Csv(format!("row {row}: {raw:?} is not a YYYY-MM date")))?;
            if let Some(p) = prev_date {
                if p.months_until(date) != 1 {
                    return Err(Error::Csv(format!("row {row}: date {date} does not follow {p} by one month")));
                }
            }
            first_date.get_or_insert(date);
            prev_date = Some(date);
        }
    }
    if values.is_empty() {
        return Err(Error::Csv("file has a header but no data rows".into()));
    }

    let anchor = match (start, first_date) {
        (Some(s), Some(d)) if s != d => {
            return Err(Error::Csv(format!("start {s} disagrees with first date {d} in the file")));
        }
        (Some(s), _) => s,
        (None, Some(d)) => d,
        (None, None) => DEFAULT_START,
    };
    TimeSeries::new(values, anchor.month, anchor.year)
}

/// Writes a series with a `date` column in `YYYY-MM` form followed by the
/// outcome column named in `schema`.
pub fn write_csv<W: Write>(series: &TimeSeries, schema: &CsvSchema, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let err = |e: csv::Error| Error::Csv(e.to_string());
    let date_col = schema.date_column.as_deref().unwrap_or("date");
    w.write_record([date_col, schema.value_column.as_str()]).map_err(err)?;
    for (i, v) in series.values().iter().enumerate() {
        let date = series.start().add_months(i as i64);
        w.write_record([date.to_string(), v.to_string()]).map_err(err)?;
    }
    w.flush().map_err(|e| Error::Csv(e.to_string()))
}
