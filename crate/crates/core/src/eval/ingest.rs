//! Readers for upstream result files.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::EvalError;

use super::aggregate::{Aggregate, AggregateAccumulator, BenchScore};
use super::multiturn::{MultiTurnRecord, TurnCounts};

pub const BENCH_HEADER: [&str; 4] = ["benchmark", "method", "score", "upper_bound"];
pub const TURN_HEADER: [&str; 4] = ["image_id", "order", "q1_correct", "q2_correct"];

/// One row of a per-benchmark results file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodScore {
    pub method: String,
    pub score: BenchScore,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ResultsFile {
    Benchmarks(Vec<MethodScore>),
    MultiTurn(Vec<MultiTurnRecord>),
}

fn parse_bool(s: &str) -> Option<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" => Some(true),
        "0" | "false" | "no" => Some(false),
        _ => None,
    }
}

fn parse_f64(s: &str, what: &str, line: u64) -> Result<f64, EvalError> {
    s.trim().parse().map_err(|_| EvalError::BadRecord {
        line,
        reason: format!("{what} {s:?} is not a number"),
    })
}

/// Reads either results layout, chosen by the header row.
pub fn parse_results(text: &str) -> Result<ResultsFile, EvalError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header == BENCH_HEADER {
        let mut out = Vec::new();
        for rec in reader.records() {
            let rec = rec?;
            let line = rec.position().map_or(0, |p| p.line());
            let score = BenchScore {
                benchmark: rec[0].to_string(),
                score: parse_f64(&rec[2], "score", line)?,
                upper_bound: parse_f64(&rec[3], "upper_bound", line)?,
            };
            score.validate().map_err(|e| EvalError::BadRecord {
                line,
                reason: e.to_string(),
            })?;
            out.push(MethodScore {
                method: rec[1].to_string(),
                score,
            });
        }
        Ok(ResultsFile::Benchmarks(out))
    } else if header == TURN_HEADER {
        let mut out = Vec::new();
        for rec in reader.records() {
            let rec = rec?;
            let line = rec.position().map_or(0, |p| p.line());
            let bad = |reason: String| EvalError::BadRecord { line, reason };
            let flag = |i: usize| parse_bool(&rec[i]).ok_or_else(|| bad(format!("{:?} is not a boolean", &rec[i])));
            out.push(MultiTurnRecord {
                image_id: rec[0].to_string(),
                order: rec[1].parse().map_err(bad)?,
                q1_correct: flag(2)?,
                q2_correct: flag(3)?,
            });
        }
        Ok(ResultsFile::MultiTurn(out))
    } else {
        Err(EvalError::UnknownHeader(header.join(",")))
    }
}

pub fn read_results(path: &Path) -> Result<ResultsFile, EvalError> {
    let text = fs::read_to_string(path).map_err(|source| EvalError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_results(&text)
}

/// Aggregates per method, in order of first appearance.
pub fn aggregate_by_method(rows: &[MethodScore]) -> Result<Vec<(String, Aggregate)>, EvalError> {
    let mut acc: Vec<(String, AggregateAccumulator)> = Vec::new();
    for row in rows {
        let i = match acc.iter().position(|(m, _)| *m == row.method) {
            Some(i) => i,
            None => {
                acc.push((row.method.clone(), AggregateAccumulator::default()));
                acc.len() - 1
            }
        };
        acc[i].1.push(&row.score)?;
    }
    acc.into_iter().map(|(m, a)| Ok((m, a.finish()?))).collect()
}

/// Conditional-accuracy counts per order tag, then overall.
pub fn turn_counts(records: &[MultiTurnRecord]) -> (TurnCounts, TurnCounts, TurnCounts) {
    let (mut original, mut swapped) = (TurnCounts::default(), TurnCounts::default());
    for r in records {
        match r.order {
            super::TurnOrder::Original => original.push(r),
            super::TurnOrder::Swapped => swapped.push(r),
        }
    }
    let mut all = original;
    all.merge(&swapped);
    (original, swapped, all)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bench_file() {
        let text = "benchmark,method,score,upper_bound\nGQA,a,60,62\nMMB,a,64,64.2\nGQA,b,62,62\n";
        let ResultsFile::Benchmarks(rows) = parse_results(text).unwrap() else {
            panic!("wrong layout");
        };
        let agg = aggregate_by_method(&rows).unwrap();
        assert_eq!(agg.len(), 2);
        assert_eq!(agg[0].0, "a");
        assert!((agg[0].1.acc - 62.0).abs() < 1e-12);
        assert!((agg[1].1.rel_percent - 100.0).abs() < 1e-12);
    }

    #[test]
    fn turn_file() {
        let text = "image_id,order,q1_correct,q2_correct\n1,original,1,1\n1,swapped,true,false\n2,original,0,1\n";
        let ResultsFile::MultiTurn(rows) = parse_results(text).unwrap() else {
            panic!("wrong layout");
        };
        let (o, s, all) = turn_counts(&rows);
        assert_eq!(o.first_correct, 1);
        assert_eq!(s.both_correct, 0);
        assert_eq!(all.accuracy().value(), Some(0.5));
    }

    #[test]
    fn bad_inputs() {
        assert!(matches!(parse_results("x,y\n"), Err(EvalError::UnknownHeader(_))));
        let e = parse_results("benchmark,method,score,upper_bound\nGQA,a,sixty,62\n").unwrap_err();
        assert!(matches!(e, EvalError::BadRecord { line: 2, .. }));
        let e = parse_results("image_id,order,q1_correct,q2_correct\n1,sideways,1,1\n").unwrap_err();
        assert!(matches!(e, EvalError::BadRecord { .. }));
    }
}
