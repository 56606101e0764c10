//! Spatial prune and merge operators.
//!
//! Each operator inspects a token set (and possibly a score vector) and returns
//! a [`ReductionPlan`](crate::plan::ReductionPlan). Ties always resolve toward
//! the lower position so runs are reproducible.

mod divprune;
mod prune;
mod tome;
mod window;

use serde::{Deserialize, Serialize};

pub use divprune::{divprune_select, divprune_select_counted, DivDistance};
pub use prune::{
    dominant_contextual, dominant_contextual_counted, prune_then_merge, prune_then_merge_counted,
    prune_topk, vispruner_select, vispruner_select_counted,
};
pub use tome::{tome_merge, tome_merge_counted, tome_merge_schedule, tome_schedule};
pub use window::{window_merge, window_merge_counted};

use crate::error::ReduceError;

/// How many tokens an operator should leave behind.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Budget {
    Count(usize),
    Ratio(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ResolvedBudget {
    pub k: usize,
    /// The request exceeded the available tokens and was clamped to `n`.
    pub clamped: bool,
}

impl Budget {
    pub fn resolve(&self, n: usize) -> Result<ResolvedBudget, ReduceError> {
        if n == 0 {
            return Err(ReduceError::InvalidBudget("no tokens to keep".into()));
        }
        match *self {
            Budget::Count(0) => Err(ReduceError::InvalidBudget("budget must keep at least one token".into())),
            Budget::Count(k) if k > n => Ok(ResolvedBudget { k: n, clamped: true }),
            Budget::Count(k) => Ok(ResolvedBudget { k, clamped: false }),
            Budget::Ratio(r) if !(r > 0.0 && r <= 1.0) => {
                Err(ReduceError::InvalidBudget(format!("ratio {r} outside (0, 1]")))
            }
            Budget::Ratio(r) => Ok(ResolvedBudget {
                k: ((r * n as f64).round() as usize).clamp(1, n),
                clamped: false,
            }),
        }
    }
}

/// Positions sorted by descending score, lower position first on ties.
pub(crate) fn rank_desc(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order
}

/// Index of the maximum, lowest index on ties.
pub(crate) fn argmax<I: IntoIterator<Item = f64>>(values: I) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values.into_iter().enumerate() {
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| i)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn budget_resolution() {
        assert_eq!(Budget::Count(3).resolve(5).unwrap(), ResolvedBudget { k: 3, clamped: false });
        assert_eq!(Budget::Count(9).resolve(5).unwrap(), ResolvedBudget { k: 5, clamped: true });
        assert_eq!(Budget::Ratio(1.0 / 3.0).resolve(576).unwrap().k, 192);
        assert_eq!(Budget::Ratio(0.001).resolve(10).unwrap().k, 1);
        assert!(Budget::Count(0).resolve(5).is_err());
        assert!(Budget::Ratio(0.0).resolve(5).is_err());
        assert!(Budget::Ratio(1.5).resolve(5).is_err());
        assert!(Budget::Ratio(f64::NAN).resolve(5).is_err());
    }

    #[test]
    fn ranking_ties_go_low() {
        assert_eq!(rank_desc(&[0.5, 0.5, 0.9, 0.1]), vec![2, 0, 1, 3]);
        assert_eq!(argmax([1.0, 3.0, 3.0]), Some(1));
        assert_eq!(argmax(std::iter::empty()), None);
    }
}
