use serde::{Deserialize, Serialize};

use crate::error::EvalError;

/// One benchmark result for a method alongside the uncompressed model's score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchScore {
    pub benchmark: String,
    pub score: f64,
    pub upper_bound: f64,
}

impl BenchScore {
    pub fn new(benchmark: impl Into<String>, score: f64, upper_bound: f64) -> Result<Self, EvalError> {
        let s = Self {
            benchmark: benchmark.into(),
            score,
            upper_bound,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        if !self.score.is_finite() || !self.upper_bound.is_finite() || self.upper_bound <= 0.0 {
            return Err(EvalError::InvalidUpperBound(self.benchmark.clone()));
        }
        Ok(())
    }
}

/// Average accuracy and relative score of one method.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    /// Unweighted mean of the method's scores.
    pub acc: f64,
    /// Acc over the mean upper bound, in percent.
    pub rel_percent: f64,
    pub benchmarks: usize,
}

impl Aggregate {
    /// Acc rounded to one decimal, as tables print it.
    pub fn acc_rounded(&self) -> f64 {
        (self.acc * 10.0).round() / 10.0
    }

    pub fn rel_rounded(&self) -> f64 {
        (self.rel_percent * 10.0).round() / 10.0
    }
}

/// Running sums behind [`aggregate`]. Accumulators over disjoint shards merge
/// into the same result as one pass over the union.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct AggregateAccumulator {
    pub count: usize,
    pub score_sum: f64,
    pub upper_bound_sum: f64,
}

impl AggregateAccumulator {
    pub fn push(&mut self, score: &BenchScore) -> Result<(), EvalError> {
        score.validate()?;
        self.count += 1;
        self.score_sum += score.score;
        self.upper_bound_sum += score.upper_bound;
        Ok(())
    }

    pub fn merge(&mut self, other: &Self) {
        self.count += other.count;
        self.score_sum += other.score_sum;
        self.upper_bound_sum += other.upper_bound_sum;
    }

    pub fn finish(&self) -> Result<Aggregate, EvalError> {
        if self.count == 0 {
            return Err(EvalError::EmptyInput);
        }
        let n = self.count as f64;
        let acc = self.score_sum / n;
        Ok(Aggregate {
            acc,
            rel_percent: 100.0 * acc / (self.upper_bound_sum / n),
            benchmarks: self.count,
        })
    }
}

pub fn aggregate(scores: &[BenchScore]) -> Result<Aggregate, EvalError> {
    let mut acc = AggregateAccumulator::default();
    for s in scores {
        acc.push(s)?;
    }
    acc.finish()
}
