//! Tabular reports written as CSV or JSON with byte-stable output.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::EvalError;

/// Digits after the decimal point for every float in a report.
pub const FLOAT_PRECISION: usize = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
    Missing,
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => format!("{v:.FLOAT_PRECISION$}"),
            Cell::Text(s) => s.clone(),
            Cell::Missing => String::new(),
        }
    }

    fn rounded(&self) -> Cell {
        match self {
            Cell::Float(v) => Cell::Float(format!("{v:.FLOAT_PRECISION$}").parse().unwrap_or(*v)),
            other => other.clone(),
        }
    }

    fn parse(s: &str) -> Cell {
        if s.is_empty() {
            Cell::Missing
        } else if let Ok(v) = s.parse::<i64>() {
            Cell::Int(v)
        } else if let Ok(v) = s.parse::<f64>() {
            Cell::Float(v)
        } else {
            Cell::Text(s.to_string())
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            Cell::Int(v) => Some(v as f64),
            Cell::Float(v) => Some(v),
            _ => None,
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::Int(v)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(v: Option<T>) -> Self {
        v.map_or(Cell::Missing, Into::into)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Report {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Self {
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    /// Appends a row. Panics if its width differs from the header.
    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width differs from header");
        self.rows.push(row);
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn to_csv(&self) -> Result<String, EvalError> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render))?;
        }
        let bytes = w.into_inner().map_err(|e| EvalError::Csv(e.into_error().into()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn to_json(&self) -> Result<String, EvalError> {
        let rounded = Report {
            columns: self.columns.clone(),
            rows: self.rows.iter().map(|r| r.iter().map(Cell::rounded).collect()).collect(),
        };
        let mut s = serde_json::to_string_pretty(&rounded)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_csv(text: &str) -> Result<Self, EvalError> {
        let mut r = csv::ReaderBuilder::new().from_reader(text.as_bytes());
        let mut report = Report::new(r.headers()?.iter());
        for rec in r.records() {
            report.rows.push(rec?.iter().map(Cell::parse).collect());
        }
        Ok(report)
    }

    pub fn from_json(text: &str) -> Result<Self, EvalError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn render(&self, format: ReportFormat) -> Result<String, EvalError> {
        match format {
            ReportFormat::Csv => self.to_csv(),
            ReportFormat::Json => self.to_json(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Csv,
    Json,
}

impl ReportFormat {
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => ReportFormat::Json,
            _ => ReportFormat::Csv,
        }
    }
}

pub fn emit_report(report: &Report, format: ReportFormat, path: &Path) -> Result<(), EvalError> {
    let text = report.render(format)?;
    fs::write(path, text).map_err(|source| EvalError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_report(path: &Path) -> Result<Report, EvalError> {
    let text = fs::read_to_string(path).map_err(|source| EvalError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    match ReportFormat::from_path(path) {
        ReportFormat::Csv => Report::from_csv(&text),
        ReportFormat::Json => Report::from_json(&text),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Report {
        let mut r = Report::new(["method", "budget", "rel"]);
        r.push(vec!["prune_topk".into(), 192usize.into(), 97.912345678.into()]);
        r.push(vec!["tome, r=8".into(), 64usize.into(), Cell::Missing]);
        r
    }

    #[test]
    fn header_only() {
        let r = Report::new(["a", "b"]);
        assert_eq!(r.to_csv().unwrap(), "a,b\n");
        assert_eq!(Report::from_csv("a,b\n").unwrap(), r);
    }

    #[test]
    fn csv_fixed_precision_and_quoting() {
        let text = sample().to_csv().unwrap();
        assert_eq!(text, "method,budget,rel\nprune_topk,192,97.912346\n\"tome, r=8\",64,\n");
        let back = Report::from_csv(&text).unwrap();
        assert_eq!(back.rows[0][2], Cell::Float(97.912346));
        assert_eq!(back.rows[1][0], Cell::Text("tome, r=8".into()));
    }

    #[test]
    fn json_round_trip() {
        let text = sample().to_json().unwrap();
        assert_eq!(text, sample().to_json().unwrap());
        let back = Report::from_json(&text).unwrap();
        assert_eq!(back.rows[0][2], Cell::Float(97.912346));
        assert_eq!(back.rows[1][2], Cell::Missing);
        assert_eq!(back.columns, sample().columns);
    }

    #[test]
    fn files() {
        let dir = tempfile::tempdir().unwrap();
        for name in ["r.csv", "r.json"] {
            let p = dir.path().join(name);
            emit_report(&sample(), ReportFormat::from_path(&p), &p).unwrap();
            let back = read_report(&p).unwrap();
            assert_eq!(back.rows.len(), 2);
            assert_eq!(back.rows[0][1], Cell::Int(192));
        }
    }
}
