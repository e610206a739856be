//! Reading series from CSV and writing column tables back out.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::TimeSeries;

/// Which columns hold what. The time column, if named, must exist but is not
/// parsed: rows are taken in file order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvSchema {
    #[serde(default)]
    pub time_col: Option<String>,
    pub value_col: String,
    #[serde(default)]
    pub feature_cols: Vec<String>,
    pub period: usize,
}

impl CsvSchema {
    pub fn new(value_col: impl Into<String>, period: usize) -> Self {
        Self {
            time_col: None,
            value_col: value_col.into(),
            feature_cols: Vec::new(),
            period,
        }
    }
}

fn column(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| Error::MissingColumn(name.to_string()))
}

fn parse_cell(record: &csv::StringRecord, idx: usize, row: usize, name: &str) -> Result<f64> {
    let raw = record.get(idx).unwrap_or("").trim();
    match raw.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::NonNumericCell {
            row,
            column: name.to_string(),
            value: raw.to_string(),
        }),
    }
}

/// Loads a series; `NonNumericCell::row` is the 0-based data row.
pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<TimeSeries> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(file);
    let headers = reader.headers()?.clone();
    if headers.is_empty() {
        return Err(Error::EmptyFile(path.to_path_buf()));
    }
    if let Some(t) = &schema.time_col {
        column(&headers, t)?;
    }
    let value_idx = column(&headers, &schema.value_col)?;
    let feature_idx = schema
        .feature_cols
        .iter()
        .map(|c| column(&headers, c))
        .collect::<Result<Vec<_>>>()?;

    let mut values = Vec::new();
    let mut features = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        values.push(parse_cell(&record, value_idx, row, &schema.value_col)?);
        if !feature_idx.is_empty() {
            let f = feature_idx
                .iter()
                .zip(&schema.feature_cols)
                .map(|(i, name)| parse_cell(&record, *i, row, name))
                .collect::<Result<Vec<_>>>()?;
            features.push(f);
        }
    }
    if values.is_empty() {
        return Err(Error::EmptyFile(path.to_path_buf()));
    }
    let features = (!feature_idx.is_empty()).then_some(features);
    TimeSeries::new(values, schema.period, features)
}

/// Writes equal-length named columns, preceded by a 1-based `t` column.
pub fn write_series_csv(path: impl AsRef<Path>, columns: &[(&str, &[f64])]) -> Result<()> {
    let path = path.as_ref();
    let len = columns.first().map_or(0, |c| c.1.len());
    if let Some((_, c)) = columns.iter().find(|c| c.1.len() != len) {
        return Err(Error::LengthMismatch {
            what: "column",
            expected: len,
            got: c.len(),
        });
    }
    let mut writer = csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(err) => Error::io(path, err),
        other => Error::Config(format!("{other:?}")),
    })?;
    let mut header = vec!["t".to_string()];
    header.extend(columns.iter().map(|c| c.0.to_string()));
    writer.write_record(&header)?;
    for i in 0..len {
        let mut record = vec![(i + 1).to_string()];
        record.extend(columns.iter().map(|c| format!("{}", c.1[i])));
        writer.write_record(&record)?;
    }
    writer.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}
