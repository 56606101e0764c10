use std::fmt;

use serde::{Deserialize, Serialize};

use crate::plan::ReductionPlan;

/// An exact ratio of token counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenRatio {
    pub numerator: u64,
    pub denominator: u64,
}

impl TokenRatio {
    pub fn new(numerator: u64, denominator: u64) -> Self {
        assert!(denominator > 0, "ratio with zero denominator");
        Self { numerator, denominator }
    }

    pub fn as_f64(&self) -> f64 {
        self.numerator as f64 / self.denominator as f64
    }

    /// `self * n` when it is a whole number.
    pub fn scale(&self, n: u64) -> Option<u64> {
        let p = self.numerator as u128 * n as u128;
        p.is_multiple_of(self.denominator as u128).then(|| (p / self.denominator as u128) as u64)
    }
}

impl fmt::Display for TokenRatio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.1}%", self.as_f64() * 100.0)
    }
}

/// Wall-clock and proxy costs carried through unchanged into a [`RateReport`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub segment_time_ms: Option<f64>,
    pub prefill_proxy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    /// Configured intra-segment merge rate.
    pub merge_rate: f64,
    /// Surviving tokens over original tokens.
    pub retention: TokenRatio,
    pub final_tokens: u64,
    pub original_tokens: u64,
    pub timings: StageTimings,
}

impl RateReport {
    pub fn retention_rate(&self) -> f64 {
        self.retention.as_f64()
    }
}

pub fn rate_report(plan: &ReductionPlan, original_n: usize, merge_rate: f64, timings: StageTimings) -> RateReport {
    rate_report_from_counts(plan.retained(), original_n, merge_rate, timings)
}

pub fn rate_report_from_counts(final_n: usize, original_n: usize, merge_rate: f64, timings: StageTimings) -> RateReport {
    RateReport {
        merge_rate,
        retention: TokenRatio::new(final_n as u64, original_n as u64),
        final_tokens: final_n as u64,
        original_tokens: original_n as u64,
        timings,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn llava_budget_retention() {
        let plan = ReductionPlan::prune((0..192).collect());
        let r = rate_report(&plan, 576, 0.0, StageTimings::default());
        assert!((r.retention_rate() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(r.retention.scale(576), Some(192));
        // "66.7% fewer tokens"
        assert_eq!(format!("{:.1}", (1.0 - r.retention_rate()) * 100.0), "66.7");
    }

    #[test]
    fn identity_retains_everything() {
        let r = rate_report(&ReductionPlan::identity(10), 10, 0.0, StageTimings::default());
        assert_eq!(r.retention_rate(), 1.0);
        assert_eq!(r.retention.to_string(), "100.0%");
    }

    #[test]
    fn exact_scaling() {
        let r = TokenRatio::new(1, 49);
        assert_eq!(r.scale(49), Some(1));
        assert_eq!(r.scale(50), None);
    }

    #[test]
    fn timings_pass_through() {
        let t = StageTimings {
            segment_time_ms: Some(2.5),
            prefill_proxy: Some(1e9),
        };
        let r = rate_report(&ReductionPlan::identity(4), 8, 0.5, t);
        assert_eq!(r.timings, t);
        assert_eq!(r.merge_rate, 0.5);
        assert_eq!(r.retention.as_f64(), 0.5);
    }
}
