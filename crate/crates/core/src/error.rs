use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("expected {expected} values, got {actual}")]
    ShapeMismatch { expected: usize, actual: usize },
    #[error("layout has a zero dimension")]
    EmptyLayout,
    #[error("token vectors have different lengths")]
    RaggedRows,
    #[error("token weights must all be >= 1")]
    InvalidWeights,
    #[error("invalid {what}: {reason}")]
    InvalidAttention { what: &'static str, reason: String },
    #[error("index {index} out of range for {len} tokens")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("token {index} appears in more than one role or group")]
    OverlappingGroups { index: usize },
    #[error("merge target {index} is not in the kept set")]
    TargetNotKept { index: usize },
    #[error("kept indices must be strictly increasing")]
    UnsortedKept,
    #[error("plan keeps no tokens")]
    EmptyResult,
}

#[derive(Debug, Error)]
pub enum DumpError {
    #[error("bad magic {0:?}")]
    BadMagic([u8; 4]),
    #[error("unsupported dump version {0}")]
    VersionMismatch(u32),
    #[error("payload checksum mismatch (stored {stored:#010x}, computed {computed:#010x})")]
    ChecksumMismatch { stored: u32, computed: u32 },
    #[error("non-finite value at payload element {0}")]
    NonFiniteValue(usize),
    #[error("file truncated: needed {needed} bytes, found {found}")]
    Truncated { needed: usize, found: usize },
    #[error("{0} trailing bytes after checksum")]
    TrailingBytes(usize),
    #[error("reduced token sets cannot be dumped")]
    IncompleteLayout,
    #[error("dump does not carry a weight blob")]
    NotAWeightBlob,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("bundle has no [CLS] attention")]
    MissingClsAttention,
    #[error("bundle has no text-to-visual attention")]
    MissingTextAttention,
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Error, PartialEq)]
pub enum ReduceError {
    #[error("budget of {requested} exceeds {available} tokens")]
    BudgetExceedsTokens { requested: usize, available: usize },
    #[error("invalid budget: {0}")]
    InvalidBudget(String),
    #[error("score vector has {scores} entries for {tokens} tokens")]
    ScoreLengthMismatch { scores: usize, tokens: usize },
    #[error("merge count {r} exceeds half of {n} tokens")]
    RTooLarge { r: usize, n: usize },
    #[error("token set has no spatial grid")]
    NoGrid,
    #[error("plan is not in prune mode")]
    NotPruneMode,
    #[error("operator needs at least two frames")]
    SingleFrame,
    #[error("merge rate {0} outside [0, 1)")]
    InvalidMergeRate(f64),
    #[error("invalid segment partition: {0}")]
    InvalidPartition(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Error, PartialEq)]
pub enum QuantError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid quantization spec: {0}")]
    InvalidSpec(String),
    #[error("Hessian is not positive definite even after extra dampening")]
    SingularHessian,
    #[error("smoothing scale at channel {0} is not strictly positive")]
    NonPositiveScale(usize),
    #[error("non-finite input")]
    NonFinite,
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no scores to aggregate")]
    EmptyInput,
    #[error("upper bound for {0} must be finite and positive")]
    InvalidUpperBound(String),
    #[error("image {0} has two identical questions")]
    DuplicateQuestions(String),
    #[error("empty question for image {0}")]
    EmptyQuestion(String),
    #[error("unrecognised results header: {0}")]
    UnknownHeader(String),
    #[error("bad record at line {line}: {reason}")]
    BadRecord { line: u64, reason: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

/// Problems found while reading a pipeline configuration. `line` is 1-based
/// and 0 when no position is known.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: unknown operator {name:?}{}", suggestion.as_ref().map(|s| format!(", did you mean {s:?}?")).unwrap_or_default())]
    UnknownOperator {
        line: usize,
        name: String,
        suggestion: Option<String>,
    },
    #[error("line {line}: invalid parameter {name:?}: {reason}")]
    InvalidParameter { line: usize, name: String, reason: String },
    #[error("line {line}: {kind} stage cannot follow a {previous} stage")]
    StageOrder {
        line: usize,
        kind: &'static str,
        previous: &'static str,
    },
    #[error("cannot read {path}: {message}")]
    Unreadable { path: PathBuf, message: String },
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("input {input}: {source}")]
    Input { input: String, source: DumpError },
    #[error("input {input}, budget {budget}, stage {stage} ({op}): {reason}")]
    Stage {
        input: String,
        budget: String,
        stage: usize,
        op: String,
        reason: String,
    },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot start worker pool: {0}")]
    Pool(String),
}

impl PipelineError {
    /// Whether the failure came from the configuration rather than the data.
    pub fn is_config(&self) -> bool {
        matches!(self, PipelineError::Config(_))
    }
}
