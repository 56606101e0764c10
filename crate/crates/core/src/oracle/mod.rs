//! Reference solvers and the randomized suites that check every operator
//! against them.

mod brute;
mod suites;
mod tables;

pub use brute::{
    divprune_exhaustive, farthest_pair, min_pairwise_distance, reference_distance, reference_objective,
    reference_segment_score, segmentation_exhaustive, DiversityOptimum, SegmentationOptimum, OBJECTIVE_TIE,
};
pub use suites::{
    aggregation_suite, conditional_suite, determinism_suite, divprune_suite, dp_suite, quant_suite, render_reports,
    retention_suite, run_all, run_suite, tome_suite, SuiteReport, AGGREGATION_TOLERANCE, CONDITIONAL_CASES,
    DETERMINISM_CONFIGS, DIVPRUNE_CASES, DIVPRUNE_RATIO, DP_CASES, GPTQ_SEEDS, RETENTION_CASES, ROUND_TRIP_CASES,
    ROUND_TRIP_SLACK, SMOOTHING_TOL, SUITES, TOME_CASES, TOME_FIXED_POINT_TOL, W8A8_TOL,
};
pub use tables::{
    parse_reported, reference_for, reported_tables, ReportedRow, FULL_BUDGET, REPORTED_TABLES, TABLE_BENCHMARKS,
};
