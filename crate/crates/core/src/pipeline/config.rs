//! Parsing and validation of pipeline configs, plus the replayable manifest.
//!
//! ```toml
//! seed = 7
//! workers = 2
//! budgets = [192, 128, 64]
//!
//! [[input]]
//! dump = "frames.tokd"
//!
//! [[stage]]
//! kind = "metrics"
//! op = "cls_attention"
//!
//! [[stage]]
//! kind = "spatial"
//! op = "prune_topk"
//! ```

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use toml::{Spanned, Table, Value};

use crate::error::ConfigError;
use crate::eval::CostModel;
use crate::metrics::TextReduce;
use crate::quant::{Granularity, QuantScope, QuantSpec};
use crate::spatial::{Budget, DivDistance};
use crate::temporal::TemporalAction;

use super::synthetic::SyntheticSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum StageKind {
    Metrics,
    Spatial,
    Temporal,
    Quant,
    Eval,
}

impl StageKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            StageKind::Metrics => "metrics",
            StageKind::Spatial => "spatial",
            StageKind::Temporal => "temporal",
            StageKind::Quant => "quant",
            StageKind::Eval => "eval",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "metrics" => StageKind::Metrics,
            "spatial" => StageKind::Spatial,
            "temporal" => StageKind::Temporal,
            "quant" => StageKind::Quant,
            "eval" => StageKind::Eval,
            _ => return None,
        })
    }

    /// Position in the stage order. Spatial and temporal stages share a rank
    /// so they may interleave.
    pub fn rank(&self) -> u8 {
        match self {
            StageKind::Metrics => 0,
            StageKind::Spatial | StageKind::Temporal => 1,
            StageKind::Quant => 2,
            StageKind::Eval => 3,
        }
    }
}

impl fmt::Display for StageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Operator names with their stage kind.
pub const OPERATORS: &[(&str, StageKind)] = &[
    ("cls_attention", StageKind::Metrics),
    ("text_attention", StageKind::Metrics),
    ("redundancy", StageKind::Metrics),
    ("prune_topk", StageKind::Spatial),
    ("divprune", StageKind::Spatial),
    ("tome", StageKind::Spatial),
    ("window_merge", StageKind::Spatial),
    ("dominant_contextual", StageKind::Spatial),
    ("prune_then_merge", StageKind::Spatial),
    ("vispruner", StageKind::Spatial),
    ("temporal_merge", StageKind::Temporal),
    ("temporal_prune", StageKind::Temporal),
    ("rtn", StageKind::Quant),
    ("gptq", StageKind::Quant),
    ("smoothquant", StageKind::Quant),
    ("cost", StageKind::Eval),
    ("aggregate", StageKind::Eval),
];

/// Method names accepted in place of the operator that implements them.
pub const ALIASES: &[(&str, &str)] = &[
    ("fastv", "prune_topk"),
    ("sparsevlm", "prune_topk"),
    ("visionzip", "dominant_contextual"),
    ("mustdrop", "window_merge"),
    ("holitom", "temporal_merge"),
    ("dycoke", "temporal_prune"),
];

fn resolve_operator(name: &str) -> Option<(&'static str, StageKind)> {
    let canonical = ALIASES.iter().find(|(a, _)| *a == name).map_or(name, |(_, op)| op);
    OPERATORS.iter().find(|(op, _)| *op == canonical).copied()
}

/// Closest known operator or alias name, if any is reasonably close.
pub fn nearest_operator(name: &str) -> Option<String> {
    OPERATORS
        .iter()
        .map(|(n, _)| *n)
        .chain(ALIASES.iter().map(|(a, _)| *a))
        .map(|candidate| (strsim::damerau_levenshtein(name, candidate), candidate))
        .filter(|(d, c)| *d <= (c.len() / 3).max(2))
        .min()
        .map(|(_, c)| match ALIASES.iter().find(|(a, _)| *a == c) {
            Some((a, op)) => format!("{a} ({op})"),
            None => c.to_string(),
        })
}

#[derive(Debug, Clone, PartialEq)]
pub enum Segmenter {
    Fixed { length: usize },
    Threshold { tau: f64 },
    Dp { max_segments: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub enum QuantMethod {
    Rtn,
    Gptq,
    SmoothQuant { alpha: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum WeightSource {
    /// Seeded Gaussian `dim x out_features` weight.
    Synthetic { out_features: usize },
    File(PathBuf),
}

/// A fully resolved stage operator.
#[derive(Debug, Clone, PartialEq)]
pub enum StageOp {
    ClsAttention,
    TextAttention { reduce: TextReduce },
    Redundancy,
    PruneTopk { budget: Option<Budget> },
    DivPrune { budget: Option<Budget>, distance: DivDistance },
    Tome { budget: Option<Budget>, steps: usize },
    WindowMerge { window: (usize, usize), threshold: f64 },
    DominantContextual { budget: Option<Budget>, contextual_ratio: f64 },
    PruneThenMerge { budget: Option<Budget> },
    VisPruner { budget: Option<Budget>, important_ratio: f64 },
    Temporal { action: TemporalAction, segmenter: Segmenter, merge_rate: f64 },
    Quantize { method: QuantMethod, spec: QuantSpec, weight: WeightSource },
    Cost { model: CostModel },
    Aggregate { results: PathBuf },
}

impl StageOp {
    pub fn name(&self) -> &'static str {
        match self {
            StageOp::ClsAttention => "cls_attention",
            StageOp::TextAttention { .. } => "text_attention",
            StageOp::Redundancy => "redundancy",
            StageOp::PruneTopk { .. } => "prune_topk",
            StageOp::DivPrune { .. } => "divprune",
            StageOp::Tome { .. } => "tome",
            StageOp::WindowMerge { .. } => "window_merge",
            StageOp::DominantContextual { .. } => "dominant_contextual",
            StageOp::PruneThenMerge { .. } => "prune_then_merge",
            StageOp::VisPruner { .. } => "vispruner",
            StageOp::Temporal {
                action: TemporalAction::Merge,
                ..
            } => "temporal_merge",
            StageOp::Temporal {
                action: TemporalAction::Prune,
                ..
            } => "temporal_prune",
            StageOp::Quantize { method, .. } => match method {
                QuantMethod::Rtn => "rtn",
                QuantMethod::Gptq => "gptq",
                QuantMethod::SmoothQuant { .. } => "smoothquant",
            },
            StageOp::Cost { .. } => "cost",
            StageOp::Aggregate { .. } => "aggregate",
        }
    }

    /// Operators that read the scores of an earlier metrics stage.
    pub fn needs_scores(&self) -> bool {
        matches!(
            self,
            StageOp::PruneTopk { .. }
                | StageOp::DominantContextual { .. }
                | StageOp::PruneThenMerge { .. }
                | StageOp::VisPruner { .. }
        )
    }

    /// The stage's own budget when the operator takes one: `Some(None)` means
    /// it falls back to the sweep budget.
    pub fn budget(&self) -> Option<Option<Budget>> {
        match *self {
            StageOp::PruneTopk { budget }
            | StageOp::DivPrune { budget, .. }
            | StageOp::Tome { budget, .. }
            | StageOp::DominantContextual { budget, .. }
            | StageOp::PruneThenMerge { budget }
            | StageOp::VisPruner { budget, .. } => Some(budget),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stage {
    pub kind: StageKind,
    pub op: StageOp,
    /// 1-based line of the stage table in the source text.
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum InputSource {
    Dump(PathBuf),
    Synthetic(SyntheticSpec),
}

#[derive(Debug, Clone, PartialEq)]
pub struct InputSpec {
    pub name: String,
    pub source: InputSource,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub seed: u64,
    pub workers: usize,
    pub budgets: Vec<Budget>,
    pub inputs: Vec<InputSpec>,
    pub stages: Vec<Stage>,
    pub output: PathBuf,
}

pub const DEFAULT_OUTPUT: &str = "tokenpress-out";

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    seed: Option<u64>,
    workers: Option<usize>,
    output: Option<String>,
    #[serde(default)]
    budgets: Vec<Spanned<Value>>,
    #[serde(default)]
    input: Vec<Spanned<Table>>,
    #[serde(default)]
    stage: Vec<Spanned<Table>>,
}

/// Maps byte offsets to 1-based line numbers.
struct Lines<'a>(&'a str);

impl Lines<'_> {
    fn at(&self, offset: usize) -> usize {
        let end = offset.min(self.0.len());
        self.0.as_bytes()[..end].iter().filter(|&&b| b == b'\n').count() + 1
    }
}

fn invalid(line: usize, name: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::InvalidParameter {
        line,
        name: name.to_string(),
        reason: reason.into(),
    }
}

/// Typed access to a table that tracks which keys were consumed.
struct Params<'a> {
    table: &'a Table,
    line: usize,
    used: Vec<&'static str>,
}

impl<'a> Params<'a> {
    fn new(table: &'a Table, line: usize) -> Self {
        Self {
            table,
            line,
            used: Vec::new(),
        }
    }

    fn get(&mut self, name: &'static str) -> Option<&'a Value> {
        self.used.push(name);
        self.table.get(name)
    }

    fn usize(&mut self, name: &'static str, default: Option<usize>) -> Result<usize, ConfigError> {
        match self.get(name) {
            Some(Value::Integer(v)) if *v >= 0 => Ok(*v as usize),
            Some(v) => Err(invalid(self.line, name, format!("expected a non-negative integer, got {v}"))),
            None => default.ok_or_else(|| invalid(self.line, name, "missing")),
        }
    }

    fn positive(&mut self, name: &'static str, default: Option<usize>) -> Result<usize, ConfigError> {
        let v = self.usize(name, default)?;
        if v == 0 {
            return Err(invalid(self.line, name, "must be positive"));
        }
        Ok(v)
    }

    fn f64(&mut self, name: &'static str, default: Option<f64>) -> Result<f64, ConfigError> {
        let v = match self.get(name) {
            Some(Value::Float(v)) => *v,
            Some(Value::Integer(v)) => *v as f64,
            Some(v) => return Err(invalid(self.line, name, format!("expected a number, got {v}"))),
            None => default.ok_or_else(|| invalid(self.line, name, "missing"))?,
        };
        if !v.is_finite() {
            return Err(invalid(self.line, name, "must be finite"));
        }
        Ok(v)
    }

    fn f64_in(
        &mut self,
        name: &'static str,
        default: Option<f64>,
        lo: f64,
        hi: f64,
        hi_inclusive: bool,
    ) -> Result<f64, ConfigError> {
        let v = self.f64(name, default)?;
        let upper_ok = if hi_inclusive { v <= hi } else { v < hi };
        if v < lo || !upper_ok {
            let close = if hi_inclusive { ']' } else { ')' };
            return Err(invalid(self.line, name, format!("{v} outside [{lo}, {hi}{close}")));
        }
        Ok(v)
    }

    fn bool(&mut self, name: &'static str, default: bool) -> Result<bool, ConfigError> {
        match self.get(name) {
            Some(Value::Boolean(b)) => Ok(*b),
            Some(v) => Err(invalid(self.line, name, format!("expected a boolean, got {v}"))),
            None => Ok(default),
        }
    }

    fn str(&mut self, name: &'static str) -> Result<Option<&'a str>, ConfigError> {
        match self.get(name) {
            Some(Value::String(s)) => Ok(Some(s.as_str())),
            Some(v) => Err(invalid(self.line, name, format!("expected a string, got {v}"))),
            None => Ok(None),
        }
    }

    fn choice<T: Copy>(
        &mut self,
        name: &'static str,
        options: &[(&str, T)],
        default: T,
    ) -> Result<T, ConfigError> {
        match self.str(name)? {
            None => Ok(default),
            Some(s) => options.iter().find(|(o, _)| *o == s).map(|(_, v)| *v).ok_or_else(|| {
                let names: Vec<&str> = options.iter().map(|(o, _)| *o).collect();
                invalid(self.line, name, format!("{s:?} is not one of {}", names.join(", ")))
            }),
        }
    }

    fn budget(&mut self, name: &'static str) -> Result<Option<Budget>, ConfigError> {
        let line = self.line;
        self.get(name).map(|v| parse_budget(v, line)).transpose()
    }

    fn finish(self) -> Result<(), ConfigError> {
        let mut extra: Vec<&String> = self
            .table
            .keys()
            .filter(|k| !self.used.contains(&k.as_str()))
            .collect();
        extra.sort();
        match extra.first() {
            Some(k) => Err(invalid(self.line, k, "unknown parameter")),
            None => Ok(()),
        }
    }
}

fn parse_budget(v: &Value, line: usize) -> Result<Budget, ConfigError> {
    match v {
        Value::Integer(k) if *k >= 1 => Ok(Budget::Count(*k as usize)),
        Value::Float(r) if *r > 0.0 && *r <= 1.0 => Ok(Budget::Ratio(*r)),
        other => Err(invalid(
            line,
            "budget",
            format!("{other} is neither a token count >= 1 nor a ratio in (0, 1]"),
        )),
    }
}

fn budget_value(b: &Budget) -> Value {
    match *b {
        Budget::Count(k) => Value::Integer(k as i64),
        Budget::Ratio(r) => Value::Float(r),
    }
}

/// Short label used in report rows.
pub fn budget_label(b: Option<&Budget>) -> String {
    match b {
        None => "none".into(),
        Some(Budget::Count(k)) => k.to_string(),
        Some(Budget::Ratio(r)) => format!("{r}"),
    }
}

fn absolute(base: &Path, p: &str) -> PathBuf {
    let joined = base.join(p);
    std::path::absolute(&joined).unwrap_or(joined)
}

fn parse_input(table: &Table, line: usize, index: usize, base: &Path) -> Result<InputSpec, ConfigError> {
    let mut p = Params::new(table, line);
    let name = p.str("name")?.map(str::to_string);
    let dump = p.str("dump")?;
    let synthetic = p.get("synthetic");
    let source = match (dump, synthetic) {
        (Some(path), None) => InputSource::Dump(absolute(base, path)),
        (None, Some(Value::Table(t))) => InputSource::Synthetic(parse_synthetic(t, line)?),
        (None, Some(_)) => return Err(invalid(line, "synthetic", "expected a table")),
        (Some(_), Some(_)) => return Err(invalid(line, "dump", "an input has either a dump or synthetic, not both")),
        (None, None) => return Err(invalid(line, "dump", "an input needs a dump path or a synthetic table")),
    };
    p.finish()?;
    let name = name.unwrap_or_else(|| match &source {
        InputSource::Dump(path) => path
            .file_stem()
            .map_or_else(|| format!("input-{index}"), |s| s.to_string_lossy().into_owned()),
        InputSource::Synthetic(_) => format!("synthetic-{index}"),
    });
    if name.is_empty() {
        return Err(invalid(line, "name", "must not be empty"));
    }
    Ok(InputSpec { name, source })
}

fn parse_synthetic(table: &Table, line: usize) -> Result<SyntheticSpec, ConfigError> {
    let d = SyntheticSpec::default();
    let mut p = Params::new(table, line);
    let spec = SyntheticSpec {
        frames: p.positive("frames", Some(d.frames))?,
        rows: p.positive("rows", Some(d.rows))?,
        cols: p.positive("cols", Some(d.cols))?,
        dim: p.positive("dim", Some(d.dim))?,
        text_queries: p.usize("text_queries", Some(d.text_queries))?,
        noise: p.f64_in("noise", Some(d.noise), 0.0, f64::MAX, true)?,
        cut_prob: p.f64_in("cut_prob", Some(d.cut_prob), 0.0, 1.0, true)?,
        cls: p.bool("cls", d.cls)?,
    };
    p.finish()?;
    Ok(spec)
}

fn parse_stage(
    table: &Table,
    line: usize,
    base: &Path,
    has_scores: bool,
    has_sweep: bool,
) -> Result<Stage, ConfigError> {
    let mut p = Params::new(table, line);
    let op_name = p
        .str("op")?
        .ok_or_else(|| invalid(line, "op", "every stage needs an operator"))?;
    let (canonical, kind) = resolve_operator(op_name).ok_or_else(|| ConfigError::UnknownOperator {
        line,
        name: op_name.to_string(),
        suggestion: nearest_operator(op_name),
    })?;
    if let Some(k) = p.str("kind")? {
        let declared = StageKind::parse(k).ok_or_else(|| invalid(line, "kind", format!("unknown stage kind {k:?}")))?;
        if declared != kind {
            return Err(invalid(line, "kind", format!("{canonical} is a {kind} operator, not {declared}")));
        }
    }
    let op = match canonical {
        "cls_attention" => StageOp::ClsAttention,
        "text_attention" => StageOp::TextAttention {
            reduce: p.choice(
                "reduce",
                &[("mean", TextReduce::Mean), ("last_row", TextReduce::LastRow)],
                TextReduce::Mean,
            )?,
        },
        "redundancy" => StageOp::Redundancy,
        "prune_topk" => StageOp::PruneTopk {
            budget: p.budget("budget")?,
        },
        "divprune" => StageOp::DivPrune {
            budget: p.budget("budget")?,
            distance: p.choice(
                "distance",
                &[("cosine", DivDistance::Cosine), ("euclidean", DivDistance::Euclidean)],
                DivDistance::Cosine,
            )?,
        },
        "tome" => StageOp::Tome {
            budget: p.budget("budget")?,
            steps: p.positive("steps", Some(1))?,
        },
        "window_merge" => {
            let h = p.positive("window_h", Some(2))?;
            let w = p.positive("window_w", Some(2))?;
            StageOp::WindowMerge {
                window: (h, w),
                threshold: p.f64("threshold", Some(0.9))?,
            }
        }
        "dominant_contextual" => StageOp::DominantContextual {
            budget: p.budget("budget")?,
            contextual_ratio: p.f64_in("contextual_ratio", Some(0.15), 0.0, 1.0, false)?,
        },
        "prune_then_merge" => StageOp::PruneThenMerge {
            budget: p.budget("budget")?,
        },
        "vispruner" => StageOp::VisPruner {
            budget: p.budget("budget")?,
            important_ratio: p.f64_in("important_ratio", Some(0.5), 0.0, 1.0, true)?,
        },
        "temporal_merge" | "temporal_prune" => {
            let merge_rate = p.f64_in("merge_rate", None, 0.0, 1.0, false)?;
            let segmenter = match p.str("segmenter")?.unwrap_or("dp") {
                "dp" => Segmenter::Dp {
                    max_segments: p.positive("max_segments", Some(4))?,
                },
                "fixed" => Segmenter::Fixed {
                    length: p.positive("length", Some(4))?,
                },
                "threshold" => Segmenter::Threshold {
                    tau: p.f64("tau", Some(0.9))?,
                },
                other => {
                    return Err(invalid(line, "segmenter", format!("{other:?} is not one of dp, fixed, threshold")))
                }
            };
            StageOp::Temporal {
                action: if canonical == "temporal_merge" {
                    TemporalAction::Merge
                } else {
                    TemporalAction::Prune
                },
                segmenter,
                merge_rate,
            }
        }
        "rtn" | "gptq" | "smoothquant" => {
            let smooth = canonical == "smoothquant";
            let bits = p.usize("bits", Some(if smooth { 8 } else { 4 }))?;
            let granularity = match p.str("granularity")?.unwrap_or(if smooth { "per_tensor" } else { "per_channel" }) {
                "per_tensor" => Granularity::PerTensor,
                "per_channel" => Granularity::PerChannel,
                "group" => Granularity::Group(p.positive("group_size", None)?),
                other => {
                    return Err(invalid(
                        line,
                        "granularity",
                        format!("{other:?} is not one of per_tensor, per_channel, group"),
                    ))
                }
            };
            let spec = QuantSpec {
                bits: u8::try_from(bits).unwrap_or(0),
                granularity,
                symmetric: p.bool("symmetric", true)?,
                scope: if smooth {
                    QuantScope::WeightActivation
                } else {
                    QuantScope::WeightOnly
                },
            };
            spec.validate().map_err(|e| invalid(line, "bits", e.to_string()))?;
            let method = match canonical {
                "rtn" => QuantMethod::Rtn,
                "gptq" => QuantMethod::Gptq,
                _ => QuantMethod::SmoothQuant {
                    alpha: p.f64_in("alpha", Some(crate::quant::DEFAULT_ALPHA), 0.0, 1.0, true)?,
                },
            };
            let weight = match p.str("weight")? {
                Some(path) => WeightSource::File(absolute(base, path)),
                None => WeightSource::Synthetic {
                    out_features: p.positive("out_features", Some(32))?,
                },
            };
            StageOp::Quantize { method, spec, weight }
        }
        "cost" => {
            let mut model = match p.str("model")?.unwrap_or("llama_7b") {
                "llama_7b" => CostModel::llama_7b(),
                other => return Err(invalid(line, "model", format!("unknown cost model {other:?}"))),
            };
            if p.table.contains_key("ffn") || p.table.contains_key("hidden") || p.table.contains_key("layers") {
                let hidden = p.positive("hidden", Some(model.hidden as usize))? as u64;
                let layers = p.positive("layers", Some(model.layers as usize))? as u64;
                let ffn = p.positive("ffn", Some(11008))? as u64;
                model = CostModel::from_shape(hidden, layers, ffn, model.params);
            }
            model.c_attn = p.f64("c_attn", Some(model.c_attn))?;
            model.c_mlp = p.f64("c_mlp", Some(model.c_mlp))?;
            model.params = p.positive("params", Some(model.params as usize))? as u64;
            model.kv_bytes_per_token = p.positive("kv_bytes_per_token", Some(model.kv_bytes_per_token as usize))? as u64;
            if !model.is_valid() {
                return Err(invalid(line, "model", "cost coefficients must be positive"));
            }
            StageOp::Cost { model }
        }
        "aggregate" => StageOp::Aggregate {
            results: absolute(
                base,
                p.str("results")?
                    .ok_or_else(|| invalid(line, "results", "missing results CSV path"))?,
            ),
        },
        _ => unreachable!("operator table and parser disagree on {canonical}"),
    };
    p.finish()?;
    if op.needs_scores() && !has_scores {
        return Err(invalid(line, "op", format!("{canonical} needs an earlier metrics stage")));
    }
    if op.budget() == Some(None) && !has_sweep {
        return Err(invalid(line, "budget", format!("{canonical} needs a budget or a top-level budgets list")));
    }
    Ok(Stage { kind, op, line })
}

pub fn parse_config(text: &str, base: &Path) -> Result<PipelineConfig, ConfigError> {
    let lines = Lines(text);
    let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::Syntax {
        line: e.span().map_or(0, |s| lines.at(s.start)),
        message: e.message().to_string(),
    })?;
    let budgets = raw
        .budgets
        .iter()
        .map(|b| parse_budget(b.get_ref(), lines.at(b.span().start)))
        .collect::<Result<Vec<_>, _>>()?;
    let inputs = raw
        .input
        .iter()
        .enumerate()
        .map(|(i, t)| parse_input(t.get_ref(), lines.at(t.span().start), i, base))
        .collect::<Result<Vec<_>, _>>()?;
    for (i, a) in inputs.iter().enumerate() {
        if inputs[..i].iter().any(|b| b.name == a.name) {
            return Err(invalid(
                lines.at(raw.input[i].span().start),
                "name",
                format!("duplicate input name {:?}", a.name),
            ));
        }
    }
    let mut stages: Vec<Stage> = Vec::new();
    for t in &raw.stage {
        let line = lines.at(t.span().start);
        let has_scores = stages.iter().any(|s| s.kind == StageKind::Metrics);
        let stage = parse_stage(t.get_ref(), line, base, has_scores, !budgets.is_empty())?;
        if let Some(prev) = stages.last() {
            if stage.kind.rank() < prev.kind.rank() {
                return Err(ConfigError::StageOrder {
                    line,
                    kind: stage.kind.as_str(),
                    previous: prev.kind.as_str(),
                });
            }
        }
        stages.push(stage);
    }
    let workers = raw.workers.unwrap_or(1);
    if workers == 0 {
        return Err(invalid(0, "workers", "must be at least 1"));
    }
    Ok(PipelineConfig {
        seed: raw.seed.unwrap_or(0),
        workers,
        budgets,
        inputs,
        stages,
        output: absolute(base, raw.output.as_deref().unwrap_or(DEFAULT_OUTPUT)),
    })
}

pub fn load_config(path: &Path) -> Result<PipelineConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Unreadable {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_config(&text, base)
}

#[derive(Serialize)]
struct Manifest<'a> {
    seed: u64,
    workers: usize,
    budgets: Vec<Value>,
    input: Vec<Table>,
    stage: &'a [Table],
}

fn path_value(p: &Path) -> Value {
    Value::String(p.to_string_lossy().into_owned())
}

fn stage_table(stage: &Stage) -> Table {
    let mut t = Table::new();
    let mut put = |k: &str, v: Value| {
        t.insert(k.to_string(), v);
    };
    put("kind", Value::String(stage.kind.as_str().into()));
    put("op", Value::String(stage.op.name().into()));
    if let Some(Some(b)) = stage.op.budget() {
        put("budget", budget_value(&b));
    }
    match &stage.op {
        StageOp::TextAttention { reduce } => put(
            "reduce",
            Value::String(
                match reduce {
                    TextReduce::Mean => "mean",
                    TextReduce::LastRow => "last_row",
                }
                .into(),
            ),
        ),
        StageOp::DivPrune { distance, .. } => put(
            "distance",
            Value::String(
                match distance {
                    DivDistance::Cosine => "cosine",
                    DivDistance::Euclidean => "euclidean",
                }
                .into(),
            ),
        ),
        StageOp::Tome { steps, .. } => put("steps", Value::Integer(*steps as i64)),
        StageOp::WindowMerge { window, threshold } => {
            put("window_h", Value::Integer(window.0 as i64));
            put("window_w", Value::Integer(window.1 as i64));
            put("threshold", Value::Float(*threshold));
        }
        StageOp::DominantContextual { contextual_ratio, .. } => {
            put("contextual_ratio", Value::Float(*contextual_ratio))
        }
        StageOp::VisPruner { important_ratio, .. } => put("important_ratio", Value::Float(*important_ratio)),
        StageOp::Temporal {
            segmenter, merge_rate, ..
        } => {
            put("merge_rate", Value::Float(*merge_rate));
            match segmenter {
                Segmenter::Dp { max_segments } => {
                    put("segmenter", Value::String("dp".into()));
                    put("max_segments", Value::Integer(*max_segments as i64));
                }
                Segmenter::Fixed { length } => {
                    put("segmenter", Value::String("fixed".into()));
                    put("length", Value::Integer(*length as i64));
                }
                Segmenter::Threshold { tau } => {
                    put("segmenter", Value::String("threshold".into()));
                    put("tau", Value::Float(*tau));
                }
            }
        }
        StageOp::Quantize { method, spec, weight } => {
            put("bits", Value::Integer(spec.bits as i64));
            put("symmetric", Value::Boolean(spec.symmetric));
            match spec.granularity {
                Granularity::PerTensor => put("granularity", Value::String("per_tensor".into())),
                Granularity::PerChannel => put("granularity", Value::String("per_channel".into())),
                Granularity::Group(g) => {
                    put("granularity", Value::String("group".into()));
                    put("group_size", Value::Integer(g as i64));
                }
            }
            if let QuantMethod::SmoothQuant { alpha } = method {
                put("alpha", Value::Float(*alpha));
            }
            match weight {
                WeightSource::Synthetic { out_features } => put("out_features", Value::Integer(*out_features as i64)),
                WeightSource::File(p) => put("weight", path_value(p)),
            }
        }
        StageOp::Cost { model } => {
            put("model", Value::String("llama_7b".into()));
            put("hidden", Value::Integer(model.hidden as i64));
            put("layers", Value::Integer(model.layers as i64));
            put("c_attn", Value::Float(model.c_attn));
            put("c_mlp", Value::Float(model.c_mlp));
            put("params", Value::Integer(model.params as i64));
            put("kv_bytes_per_token", Value::Integer(model.kv_bytes_per_token as i64));
        }
        StageOp::Aggregate { results } => put("results", path_value(results)),
        StageOp::ClsAttention
        | StageOp::Redundancy
        | StageOp::PruneTopk { .. }
        | StageOp::PruneThenMerge { .. } => {}
    }
    t
}

fn input_table(input: &InputSpec) -> Table {
    let mut t = Table::new();
    t.insert("name".into(), Value::String(input.name.clone()));
    match &input.source {
        InputSource::Dump(p) => {
            t.insert("dump".into(), path_value(p));
        }
        InputSource::Synthetic(s) => {
            let mut st = Table::new();
            st.insert("frames".into(), Value::Integer(s.frames as i64));
            st.insert("rows".into(), Value::Integer(s.rows as i64));
            st.insert("cols".into(), Value::Integer(s.cols as i64));
            st.insert("dim".into(), Value::Integer(s.dim as i64));
            st.insert("text_queries".into(), Value::Integer(s.text_queries as i64));
            st.insert("noise".into(), Value::Float(s.noise));
            st.insert("cut_prob".into(), Value::Float(s.cut_prob));
            st.insert("cls".into(), Value::Boolean(s.cls));
            t.insert("synthetic".into(), Value::Table(st));
        }
    }
    t
}

impl PipelineConfig {
    /// Every resolved setting as TOML. Parsing the manifest yields the same
    /// configuration apart from the output directory, which is chosen per run.
    pub fn to_manifest(&self) -> String {
        let stages: Vec<Table> = self.stages.iter().map(stage_table).collect();
        let manifest = Manifest {
            seed: self.seed,
            workers: self.workers,
            budgets: self.budgets.iter().map(budget_value).collect(),
            input: self.inputs.iter().map(input_table).collect(),
            stage: &stages,
        };
        toml::to_string(&manifest).expect("manifest values are always representable")
    }

    /// The first quantization spec in stage order, if any.
    pub fn quant_spec(&self) -> Option<QuantSpec> {
        self.stages.iter().find_map(|s| match &s.op {
            StageOp::Quantize { spec, .. } => Some(*spec),
            _ => None,
        })
    }
}
