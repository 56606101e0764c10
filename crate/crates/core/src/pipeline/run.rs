use std::fs;
use std::path::Path;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::counters::OpCounters;
use crate::dump::read_dump;
use crate::error::PipelineError;
use crate::eval::{
    aggregate_by_method, cost_estimate, emit_report, read_results, Aggregate, Cell, CostEstimate, Report, ReportFormat,
    ResultsFile,
};
use crate::metrics::{cls_scores, cosine_sim_counted, cosine_with_norms, norm, redundancy_scores, text_scores, ScoreVector};
use crate::plan::{apply_plan, ReductionPlan};
use crate::quant::{
    gptq_quantize, matrix_from_blob, quant_eval, quantize_rtn, simulate_w8a8, smoothquant_weights, activation_absmax,
    QuantErrorReport, QuantSpec,
};
use crate::spatial::{
    divprune_select_counted, dominant_contextual_counted, prune_then_merge_counted, prune_topk, tome_merge_schedule,
    tome_schedule, vispruner_select_counted, window_merge_counted, Budget,
};
use crate::temporal::{
    frame_similarity_counted, rate_report_from_counts, segment_dp_counted, segment_fixed, segment_threshold,
    temporal_reduce_counted, RateReport, StageTimings,
};
use crate::tokens::{AttentionBundle, TokenSet};

use super::config::{budget_label, InputSource, PipelineConfig, QuantMethod, Segmenter, StageOp, WeightSource};
use super::synthetic::synthetic_input;

/// A loaded input shared by every budget in the sweep.
#[derive(Debug, Clone)]
pub struct LoadedInput {
    pub name: String,
    pub tokens: TokenSet,
    pub bundle: AttentionBundle,
}

#[derive(Debug, Clone, Serialize)]
pub struct QuantRow {
    pub stage: usize,
    pub method: &'static str,
    pub spec: QuantSpec,
    pub calibration_rows: usize,
    pub error: QuantErrorReport,
    /// Relative Frobenius error of the simulated W8A8 layer output.
    pub w8a8_rel_err: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct JobResult {
    pub input: String,
    pub budget: String,
    pub rate: RateReport,
    pub budget_clamped: bool,
    pub segments: Option<usize>,
    pub counters: OpCounters,
    /// Mean over original tokens of the best cosine match among survivors.
    pub coverage: f64,
    pub cost: Option<CostEstimate>,
    pub quant: Vec<QuantRow>,
    pub stage_ms: Vec<f64>,
    pub total_ms: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub jobs: Vec<JobResult>,
    pub aggregates: Vec<(String, Aggregate)>,
    pub counters: OpCounters,
    pub wall_ms: f64,
}

/// Per-input seed so inputs differ while staying fixed across budgets.
fn derive_seed(seed: u64, salt: u64) -> u64 {
    seed ^ salt.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

pub fn load_inputs(config: &PipelineConfig) -> Result<Vec<LoadedInput>, PipelineError> {
    config
        .inputs
        .iter()
        .enumerate()
        .map(|(i, spec)| {
            let (tokens, bundle) = match &spec.source {
                InputSource::Dump(path) => read_dump(path).map_err(|source| PipelineError::Input {
                    input: spec.name.clone(),
                    source,
                })?,
                InputSource::Synthetic(s) => synthetic_input(s, derive_seed(config.seed, i as u64))
                    .map(|(t, b)| (t, Some(b)))
                    .map_err(|e| PipelineError::Input {
                        input: spec.name.clone(),
                        source: e.into(),
                    })?,
            };
            Ok(LoadedInput {
                name: spec.name.clone(),
                tokens,
                bundle: bundle.unwrap_or_else(AttentionBundle::empty),
            })
        })
        .collect()
}

fn to_matrix(tokens: &TokenSet) -> DMatrix<f64> {
    DMatrix::from_fn(tokens.len(), tokens.dim(), |r, c| tokens.token(r)[c] as f64)
}

fn synthetic_weight(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = 1.0 / (rows as f64).sqrt();
    let values: Vec<f64> = (0..rows * cols)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            scale * z
        })
        .collect();
    DMatrix::from_row_slice(rows, cols, &values)
}

fn coverage(original: &TokenSet, reduced: &TokenSet) -> f64 {
    let kept_norms: Vec<f64> = reduced.rows().map(norm).collect();
    let total: f64 = original
        .rows()
        .map(|t| {
            let nt = norm(t);
            reduced
                .rows()
                .zip(&kept_norms)
                .map(|(k, &nk)| cosine_with_norms(t, k, nt, nk))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .sum();
    total / original.len() as f64
}

/// Scores indexed by original token id; ids absent from the scoring set are NaN.
fn scatter(scores: &ScoreVector, tokens: &TokenSet) -> ScoreVector {
    if scores.len() == tokens.original_len() {
        return scores.clone();
    }
    let mut full = vec![f64::NAN; tokens.original_len()];
    for (&id, &s) in tokens.token_ids().iter().zip(&scores.scores) {
        full[id] = s;
    }
    ScoreVector::new(full, scores.source)
}

struct JobContext<'a> {
    config: &'a PipelineConfig,
    input: &'a LoadedInput,
    budget: Option<Budget>,
    weights: &'a [Option<DMatrix<f64>>],
}

impl JobContext<'_> {
    fn run(&self) -> Result<JobResult, PipelineError> {
        let started = Instant::now();
        let original = &self.input.tokens;
        let mut current = original.clone();
        let mut scores: Option<ScoreVector> = None;
        let mut counters = OpCounters::default();
        let mut merge_rate = 0.0;
        let mut clamped = false;
        let mut segments = None;
        let mut cost = None;
        let mut quant = Vec::new();
        let mut last_spec: Option<QuantSpec> = None;
        let mut seg_ms: Option<f64> = None;
        let mut stage_ms = Vec::with_capacity(self.config.stages.len());

        for (index, stage) in self.config.stages.iter().enumerate() {
            let t0 = Instant::now();
            let fail = |reason: String| PipelineError::Stage {
                input: self.input.name.clone(),
                budget: budget_label(self.budget.as_ref()),
                stage: index,
                op: stage.op.name().to_string(),
                reason,
            };
            let budget = stage
                .op
                .budget()
                .map(|b| b.or(self.budget).ok_or_else(|| fail("no budget".into())))
                .transpose()?;
            let current_scores = || {
                scores
                    .as_ref()
                    .map(|s| s.gather(&current))
                    .ok_or_else(|| fail("no scores from an earlier metrics stage".into()))
            };
            let plan: Option<ReductionPlan> = match &stage.op {
                StageOp::ClsAttention => {
                    scores = Some(cls_scores(&self.input.bundle).map_err(|e| fail(e.to_string()))?);
                    None
                }
                StageOp::TextAttention { reduce } => {
                    scores = Some(text_scores(&self.input.bundle, *reduce).map_err(|e| fail(e.to_string()))?);
                    None
                }
                StageOp::Redundancy => {
                    let sim = cosine_sim_counted(&current, &mut counters);
                    scores = Some(scatter(&redundancy_scores(&sim), &current));
                    None
                }
                StageOp::PruneTopk { .. } => Some(prune_topk(&current_scores()?, budget.unwrap())),
                StageOp::DivPrune { distance, .. } => Some(divprune_select_counted(
                    &current,
                    budget.unwrap(),
                    *distance,
                    &mut counters,
                )),
                StageOp::Tome { steps, .. } => {
                    let n = current.len();
                    let k = budget.unwrap().resolve(n).map_err(|e| fail(e.to_string()))?;
                    clamped |= k.clamped;
                    let schedule = tome_schedule(n, k.k, *steps).map_err(|e| fail(e.to_string()))?;
                    Some(tome_merge_schedule(&current, &schedule, &mut counters))
                }
                StageOp::WindowMerge { window, threshold } => {
                    Some(window_merge_counted(&current, *window, *threshold, &mut counters))
                }
                StageOp::DominantContextual { contextual_ratio, .. } => {
                    let k = budget.unwrap().resolve(current.len()).map_err(|e| fail(e.to_string()))?;
                    clamped |= k.clamped;
                    let k_ctx = ((k.k as f64 * contextual_ratio).round() as usize).min(k.k.saturating_sub(1));
                    Some(dominant_contextual_counted(
                        &current,
                        &current_scores()?,
                        k.k - k_ctx,
                        k_ctx,
                        &mut counters,
                    ))
                }
                StageOp::PruneThenMerge { .. } => {
                    let keep = prune_topk(&current_scores()?, budget.unwrap()).map_err(|e| fail(e.to_string()))?;
                    Some(prune_then_merge_counted(&current, &keep, true, &mut counters))
                }
                StageOp::VisPruner { important_ratio, .. } => {
                    let k = budget.unwrap().resolve(current.len()).map_err(|e| fail(e.to_string()))?;
                    clamped |= k.clamped;
                    let k_imp = (k.k as f64 * important_ratio).round() as usize;
                    Some(vispruner_select_counted(
                        &current,
                        &current_scores()?,
                        k_imp.min(k.k),
                        Budget::Count(k.k),
                        &mut counters,
                    ))
                }
                StageOp::Temporal {
                    action,
                    segmenter,
                    merge_rate: mr,
                } => {
                    let frames = current.frames();
                    let partition = match segmenter {
                        Segmenter::Fixed { length } => segment_fixed(frames, *length).map_err(|e| fail(e.to_string()))?,
                        Segmenter::Threshold { tau } => {
                            let series = frame_similarity_counted(&current, &mut counters).map_err(|e| fail(e.to_string()))?;
                            segment_threshold(&series, *tau)
                        }
                        Segmenter::Dp { max_segments } => {
                            let series = frame_similarity_counted(&current, &mut counters).map_err(|e| fail(e.to_string()))?;
                            segment_dp_counted(&series, (*max_segments).min(frames), &mut counters)
                                .map_err(|e| fail(e.to_string()))?
                        }
                    };
                    merge_rate = *mr;
                    segments = Some(partition.len());
                    seg_ms = Some(seg_ms.unwrap_or(0.0) + t0.elapsed().as_secs_f64() * 1e3);
                    Some(temporal_reduce_counted(&current, &partition, *mr, *action, &mut counters))
                }
                StageOp::Quantize { method, spec, weight } => {
                    let w = match weight {
                        WeightSource::Synthetic { out_features } => {
                            synthetic_weight(current.dim(), *out_features, derive_seed(self.config.seed, 1000 + index as u64))
                        }
                        WeightSource::File(_) => self.weights[index].clone().expect("weights are loaded before jobs start"),
                    };
                    let calib = to_matrix(&current);
                    let eval_x = to_matrix(original);
                    let q = match method {
                        QuantMethod::Rtn => quantize_rtn(&w, spec),
                        QuantMethod::Gptq => gptq_quantize(&w, &calib, spec),
                        QuantMethod::SmoothQuant { alpha } => smoothquant_weights(&w, &activation_absmax(&calib), *alpha, spec),
                    }
                    .map_err(|e| fail(e.to_string()))?;
                    let error = quant_eval(&w, &q.dequantize_unsmoothed(), &eval_x).map_err(|e| fail(e.to_string()))?;
                    let w8a8_rel_err = match method {
                        QuantMethod::SmoothQuant { alpha } => {
                            let exact = &eval_x * &w;
                            let sim = simulate_w8a8(&eval_x, &w, Some(*alpha)).map_err(|e| fail(e.to_string()))?;
                            Some((sim - &exact).norm() / exact.norm())
                        }
                        _ => None,
                    };
                    quant.push(QuantRow {
                        stage: index,
                        method: stage.op.name(),
                        spec: *spec,
                        calibration_rows: current.len(),
                        error,
                        w8a8_rel_err,
                    });
                    last_spec = Some(*spec);
                    None
                }
                StageOp::Cost { model } => {
                    cost = Some(cost_estimate(model, current.len() as u64, last_spec.as_ref()));
                    None
                }
                StageOp::Aggregate { .. } => None,
            }
            .map(|p| p.map_err(|e| fail(e.to_string())))
            .transpose()?;
            if let Some(plan) = plan {
                clamped |= plan.budget_clamped;
                current = apply_plan(&current, &plan).map_err(|e| fail(e.to_string()))?;
            }
            stage_ms.push(t0.elapsed().as_secs_f64() * 1e3);
        }

        let rate = rate_report_from_counts(
            current.len(),
            original.len(),
            merge_rate,
            StageTimings {
                segment_time_ms: seg_ms,
                prefill_proxy: cost.map(|c| c.prefill_flops),
            },
        );
        Ok(JobResult {
            input: self.input.name.clone(),
            budget: budget_label(self.budget.as_ref()),
            rate,
            budget_clamped: clamped,
            segments,
            counters,
            coverage: coverage(original, &current),
            cost,
            quant,
            stage_ms,
            total_ms: started.elapsed().as_secs_f64() * 1e3,
        })
    }
}

fn load_weights(config: &PipelineConfig, dims: &[usize]) -> Result<Vec<Option<DMatrix<f64>>>, PipelineError> {
    config
        .stages
        .iter()
        .enumerate()
        .map(|(index, stage)| match &stage.op {
            StageOp::Quantize {
                weight: WeightSource::File(path),
                ..
            } => {
                let blob = crate::dump::read_matrix(path).map_err(|source| PipelineError::Input {
                    input: path.display().to_string(),
                    source,
                })?;
                if let Some(&d) = dims.iter().find(|&&d| d != blob.rows) {
                    return Err(PipelineError::Stage {
                        input: path.display().to_string(),
                        budget: "none".into(),
                        stage: index,
                        op: stage.op.name().into(),
                        reason: format!("weight has {} input rows but tokens have dimension {d}", blob.rows),
                    });
                }
                Ok(Some(matrix_from_blob(&blob)))
            }
            _ => Ok(None),
        })
        .collect()
}

/// Runs every input at every budget. Results come back in input-major,
/// budget-minor order regardless of the worker count.
pub fn run(config: &PipelineConfig) -> Result<RunReport, PipelineError> {
    let started = Instant::now();
    let inputs = load_inputs(config)?;
    let dims: Vec<usize> = inputs.iter().map(|i| i.tokens.dim()).collect();
    let weights = load_weights(config, &dims)?;
    let budgets: Vec<Option<Budget>> = if config.budgets.is_empty() {
        vec![None]
    } else {
        config.budgets.iter().copied().map(Some).collect()
    };
    let jobs: Vec<JobContext> = inputs
        .iter()
        .flat_map(|input| {
            budgets.iter().map(|&budget| JobContext {
                config,
                input,
                budget,
                weights: &weights,
            })
        })
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| PipelineError::Pool(e.to_string()))?;
    let results: Vec<Result<JobResult, PipelineError>> = pool.install(|| jobs.par_iter().map(JobContext::run).collect());
    let jobs = results.into_iter().collect::<Result<Vec<_>, _>>()?;

    let mut aggregates = Vec::new();
    for stage in &config.stages {
        if let StageOp::Aggregate { results } = &stage.op {
            match read_results(results)? {
                ResultsFile::Benchmarks(rows) => aggregates.extend(aggregate_by_method(&rows)?),
                ResultsFile::MultiTurn(_) => {
                    return Err(PipelineError::Stage {
                        input: results.display().to_string(),
                        budget: "none".into(),
                        stage: 0,
                        op: "aggregate".into(),
                        reason: "expected per-benchmark scores, found multi-turn records".into(),
                    })
                }
            }
        }
    }
    let mut counters = OpCounters::default();
    for j in &jobs {
        counters += j.counters;
    }
    Ok(RunReport {
        jobs,
        aggregates,
        counters,
        wall_ms: started.elapsed().as_secs_f64() * 1e3,
    })
}

pub const RATES_FILE: &str = "rates.csv";
pub const CURVES_FILE: &str = "curves.csv";
pub const QUANT_FILE: &str = "quant.csv";
pub const AGGREGATE_FILE: &str = "aggregate.csv";
pub const MANIFEST_FILE: &str = "manifest.toml";
pub const TIMINGS_FILE: &str = "timings.json";

pub fn rates_report(run: &RunReport) -> Report {
    let mut r = Report::new([
        "input",
        "budget",
        "original_tokens",
        "final_tokens",
        "retention",
        "rr",
        "merge_rate",
        "segments",
        "budget_clamped",
        "similarity_evals",
        "dp_cells",
    ]);
    for j in &run.jobs {
        r.push(vec![
            j.input.as_str().into(),
            j.budget.as_str().into(),
            j.rate.original_tokens.into(),
            j.rate.final_tokens.into(),
            format!("{}/{}", j.rate.retention.numerator, j.rate.retention.denominator).into(),
            j.rate.retention_rate().into(),
            j.rate.merge_rate.into(),
            j.segments.into(),
            (if j.budget_clamped { "true" } else { "false" }).into(),
            j.counters.similarity_evals.into(),
            j.counters.dp_cells.into(),
        ]);
    }
    r
}

pub fn curves_report(run: &RunReport) -> Report {
    let mut r = Report::new([
        "input",
        "budget",
        "final_tokens",
        "rr",
        "coverage",
        "prefill_flops",
        "weight_bytes",
        "kv_bytes",
    ]);
    for j in &run.jobs {
        r.push(vec![
            j.input.as_str().into(),
            j.budget.as_str().into(),
            j.rate.final_tokens.into(),
            j.rate.retention_rate().into(),
            j.coverage.into(),
            j.cost.map(|c| c.prefill_flops).into(),
            j.cost.map(|c| c.weight_bytes).into(),
            j.cost.map(|c| c.kv_bytes).into(),
        ]);
    }
    r
}

pub fn quant_report(run: &RunReport) -> Report {
    let mut r = Report::new([
        "input",
        "budget",
        "stage",
        "method",
        "bits",
        "granularity",
        "calibration_rows",
        "max_abs",
        "mean_abs",
        "output_mse",
        "w8a8_rel_err",
    ]);
    for j in &run.jobs {
        for q in &j.quant {
            let granularity = match q.spec.granularity {
                crate::quant::Granularity::PerTensor => "per_tensor".to_string(),
                crate::quant::Granularity::PerChannel => "per_channel".to_string(),
                crate::quant::Granularity::Group(g) => format!("group{g}"),
            };
            r.push(vec![
                j.input.as_str().into(),
                j.budget.as_str().into(),
                q.stage.into(),
                q.method.into(),
                (q.spec.bits as usize).into(),
                granularity.into(),
                q.calibration_rows.into(),
                q.error.max_abs.into(),
                q.error.mean_abs.into(),
                q.error.output_mse.into(),
                q.w8a8_rel_err.into(),
            ]);
        }
    }
    r
}

pub fn aggregate_report(run: &RunReport) -> Report {
    let mut r = Report::new(["method", "benchmarks", "acc", "rel_percent"]);
    for (method, a) in &run.aggregates {
        r.push(vec![
            method.as_str().into(),
            a.benchmarks.into(),
            Cell::Float(a.acc),
            Cell::Float(a.rel_percent),
        ]);
    }
    r
}

#[derive(Serialize)]
struct TimingJob<'a> {
    input: &'a str,
    budget: &'a str,
    stage_ms: &'a [f64],
    total_ms: f64,
}

#[derive(Serialize)]
struct Timings<'a> {
    wall_ms: f64,
    jobs: Vec<TimingJob<'a>>,
}

/// Writes every report into `dir`. All files except the timings are a pure
/// function of the configuration.
pub fn write_outputs(config: &PipelineConfig, run: &RunReport, dir: &Path) -> Result<Vec<String>, PipelineError> {
    fs::create_dir_all(dir).map_err(|source| PipelineError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let has_quant = config.stages.iter().any(|s| matches!(s.op, StageOp::Quantize { .. }));
    let has_aggregate = config.stages.iter().any(|s| matches!(s.op, StageOp::Aggregate { .. }));
    let mut written = Vec::new();
    let mut emit = |name: &str, report: Report| -> Result<(), PipelineError> {
        emit_report(&report, ReportFormat::Csv, &dir.join(name))?;
        written.push(name.to_string());
        Ok(())
    };
    emit(RATES_FILE, rates_report(run))?;
    emit(CURVES_FILE, curves_report(run))?;
    if has_quant {
        emit(QUANT_FILE, quant_report(run))?;
    }
    if has_aggregate {
        emit(AGGREGATE_FILE, aggregate_report(run))?;
    }
    let write = |name: &str, text: String| {
        let path = dir.join(name);
        fs::write(&path, text).map_err(|source| PipelineError::Io { path, source })
    };
    write(MANIFEST_FILE, config.to_manifest())?;
    written.push(MANIFEST_FILE.to_string());
    let timings = Timings {
        wall_ms: run.wall_ms,
        jobs: run
            .jobs
            .iter()
            .map(|j| TimingJob {
                input: &j.input,
                budget: &j.budget,
                stage_ms: &j.stage_ms,
                total_ms: j.total_ms,
            })
            .collect(),
    };
    write(
        TIMINGS_FILE,
        serde_json::to_string_pretty(&timings).map_err(crate::error::EvalError::from)? + "\n",
    )?;
    written.push(TIMINGS_FILE.to_string());
    Ok(written)
}
