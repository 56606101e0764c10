//! Measurement arithmetic: relative scores, multi-turn conditional accuracy,
//! an analytic cost model and report emission.

mod aggregate;
mod cost;
mod ingest;
mod multiturn;
mod report;

pub use aggregate::{aggregate, Aggregate, AggregateAccumulator, BenchScore};
pub use cost::{cost_estimate, CostEstimate, CostModel};
pub use ingest::{
    aggregate_by_method, parse_results, read_results, turn_counts, MethodScore, ResultsFile, BENCH_HEADER, TURN_HEADER,
};
pub use multiturn::{
    build_pairs, conditional_accuracy, ConditionalAccuracy, DialogueTask, MultiTurnRecord, QuestionPair, TurnCounts,
    TurnOrder,
};
pub use report::{emit_report, read_report, Cell, Report, ReportFormat, FLOAT_PRECISION};
