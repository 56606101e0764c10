//! Published benchmark tables bundled with the crate.

use serde::{Deserialize, Serialize};

use crate::error::EvalError;
use crate::eval::BenchScore;

/// The bundled table as CSV text.
pub const REPORTED_TABLES: &str = include_str!("../../data/reported_tables.csv");

/// Benchmarks entering Acc, in column order.
pub const TABLE_BENCHMARKS: [&str; 7] = ["GQA", "MMB", "MME", "POPE", "TextVQA", "VizWiz", "SQA"];

/// Budget label of the uncompressed reference rows.
pub const FULL_BUDGET: &str = "full";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportedRow {
    pub stage: String,
    pub model: String,
    pub budget: String,
    pub method: String,
    pub variant: String,
    #[serde(rename = "type")]
    pub kind: String,
    pub gqa: f64,
    pub mmb: f64,
    pub mme: f64,
    pub pope: f64,
    pub textvqa: f64,
    pub vizwiz: f64,
    pub scienceqa: f64,
    pub acc: f64,
    pub rel: f64,
}

impl ReportedRow {
    pub fn scores(&self) -> [f64; 7] {
        [self.gqa, self.mmb, self.mme, self.pope, self.textvqa, self.vizwiz, self.scienceqa]
    }

    pub fn is_reference(&self) -> bool {
        self.budget == FULL_BUDGET
    }

    /// `method type @budget stage`, plus the variant when present.
    pub fn label(&self) -> String {
        let mut s = format!("{} {} @{} {}", self.method, self.kind, self.budget, self.stage);
        if !self.variant.is_empty() {
            s.push_str(&format!(" ({})", self.variant));
        }
        s
    }

    /// Pairs this row's scores with the reference row's as upper bounds.
    pub fn bench_scores(&self, reference: &ReportedRow) -> Result<Vec<BenchScore>, EvalError> {
        TABLE_BENCHMARKS
            .iter()
            .zip(self.scores().into_iter().zip(reference.scores()))
            .map(|(b, (s, u))| BenchScore::new(*b, s, u))
            .collect()
    }
}

pub fn parse_reported(text: &str) -> Result<Vec<ReportedRow>, EvalError> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    reader.deserialize().map(|r| r.map_err(EvalError::from)).collect()
}

pub fn reported_tables() -> Vec<ReportedRow> {
    parse_reported(REPORTED_TABLES).expect("bundled table parses")
}

/// The reference row sharing `row`'s stage and model.
pub fn reference_for<'a>(rows: &'a [ReportedRow], row: &ReportedRow) -> Option<&'a ReportedRow> {
    rows.iter()
        .find(|r| r.is_reference() && r.stage == row.stage && r.model == row.model)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_table_is_complete() {
        let rows = reported_tables();
        assert_eq!(rows.len(), 75);
        for r in rows.iter().filter(|r| !r.is_reference()) {
            assert!(reference_for(&rows, r).is_some(), "{}", r.label());
        }
    }
}
