//! Config-driven composition of metrics, reduction, quantization and
//! evaluation over a set of inputs and budgets.

mod config;
mod run;
mod synthetic;

pub use config::{
    budget_label, load_config, nearest_operator, parse_config, InputSource, InputSpec, PipelineConfig, QuantMethod,
    Segmenter, Stage, StageKind, StageOp, WeightSource, ALIASES, DEFAULT_OUTPUT, OPERATORS,
};
pub use run::{
    aggregate_report, curves_report, load_inputs, quant_report, rates_report, run, write_outputs, JobResult,
    LoadedInput, QuantRow, RunReport, AGGREGATE_FILE, CURVES_FILE, MANIFEST_FILE, QUANT_FILE, RATES_FILE, TIMINGS_FILE,
};
pub use synthetic::{synthetic_input, SyntheticSpec};
