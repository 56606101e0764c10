//! Training-free compression of vision-language token streams.
//!
//! The crate works on token tensors dumped from a model (see [`dump`]) and
//! provides importance metrics, spatial prune/merge operators, temporal
//! segmentation and reduction for video, post-training weight quantization,
//! and the evaluation arithmetic used to compare methods. A config-driven
//! [`pipeline`] composes all of it and emits deterministic reports, and
//! [`oracle`] checks the operators against brute-force references.

pub mod counters;
pub mod dump;
pub mod error;
pub mod eval;
pub mod metrics;
pub mod oracle;
pub mod pipeline;
pub mod plan;
pub mod quant;
pub mod spatial;
pub mod temporal;
pub mod tokens;

pub use counters::OpCounters;
pub use error::{ConfigError, DumpError, EvalError, MetricError, ModelError, PipelineError, QuantError, ReduceError};
pub use plan::{apply_plan, compose, MergeGroup, PlanMode, ReductionPlan};
pub use tokens::{AttentionBundle, Grid, TextAttention, TokenSet};
