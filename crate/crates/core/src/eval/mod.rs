//! Benchmark grading: value and exact-match accuracy, WMAPE, size-bucketed
//! reports, repetition-averaged runs.

mod report;

pub use report::{render_table, Accuracy, BucketRow, FailureRow, Report, WmapeRow};

use crate::agents::{AgentConfig, Pipeline, PipelineResult, RouteError, RouteOptions};
use crate::llm::{AgentTrace, ChatBackend, ScriptedBackend};
use crate::model::{compare_models, CanonConfig, EmVerdict, LinearModel, ObjSense};
use crate::par::{self, ExecMode};
use crate::refdata::{values_match, BenchmarkInstance, ProblemType, RefStore, StoreError};
use crate::retrieval::{CsvTable, FileQa};
use crate::solver::solve_milp;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;
use thiserror::Error;

/// File each benchmark instance keeps its replay transcript in.
pub const TRANSCRIPT_FILE: &str = "transcript.json";

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("wmape needs equal-length lists, got {opt} and {rev}")]
    LengthMismatch { opt: usize, rev: usize },
    #[error("wmape undefined: optimal values sum to {0}")]
    ZeroOptimum(f64),
    #[error("repetitions must be at least 1")]
    ZeroRepetitions,
    #[error("bucket edges must be finite, positive and strictly increasing")]
    BadEdges,
    #[error("label for {id}: {source}")]
    Label { id: String, source: StoreError },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmOutcome {
    Match,
    Mismatch,
    NotProven,
}

/// One execution of one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub id: String,
    pub ptype: ProblemType,
    pub repetition: usize,
    pub approx_tokens: usize,
    pub label_variables: usize,
    pub label: f64,
    pub label_sense: ObjSense,
    /// `None` when formulation failed.
    pub model: Option<LinearModel>,
    /// Objective of the generated model; only set when `model` is.
    pub solved: Option<f64>,
    pub value_ok: bool,
    pub em: EmOutcome,
    /// Label objective at the generated solution when that point is feasible
    /// for the label, else 0.
    pub revenue: f64,
    pub failure: Option<String>,
    pub traces: Vec<AgentTrace>,
    pub wall_ms: u64,
}

impl RunResult {
    pub fn failed(&self) -> bool {
        self.failure.is_some()
    }
}

/// Failure text plus whatever traces were produced before it.
#[derive(Debug, Clone, PartialEq)]
pub struct FormulationFailure {
    pub message: String,
    pub traces: Vec<AgentTrace>,
}

impl From<RouteError> for FormulationFailure {
    fn from(e: RouteError) -> Self {
        FormulationFailure { message: e.to_string(), traces: e.traces }
    }
}

impl FormulationFailure {
    fn msg(m: impl Into<String>) -> Self {
        FormulationFailure { message: m.into(), traces: Vec::new() }
    }
}

/// Turns an instance into a generated model.
pub trait Formulator: Sync {
    fn formulate(&self, inst: &BenchmarkInstance, repetition: usize) -> Result<PipelineResult, FormulationFailure>;
}

fn read_datasets(inst: &BenchmarkInstance) -> Result<Vec<CsvTable>, FormulationFailure> {
    inst.datasets
        .iter()
        .map(|p| CsvTable::read(p).map_err(|e| FormulationFailure::msg(e.to_string())))
        .collect()
}

/// Replays `transcript.json` from each instance directory.
#[derive(Clone)]
pub struct TranscriptFormulator {
    pub store: Arc<RefStore>,
    pub fileqa: Arc<FileQa>,
    pub cfg: AgentConfig,
    pub opts: RouteOptions,
}

impl TranscriptFormulator {
    pub fn from_pipeline(p: &Pipeline, opts: RouteOptions) -> Self {
        TranscriptFormulator { store: p.store.clone(), fileqa: p.fileqa.clone(), cfg: p.cfg, opts }
    }
}

impl Formulator for TranscriptFormulator {
    fn formulate(&self, inst: &BenchmarkInstance, _repetition: usize) -> Result<PipelineResult, FormulationFailure> {
        let path = inst.dir.join(TRANSCRIPT_FILE);
        let backend = ScriptedBackend::from_file(&path)
            .map_err(|e| FormulationFailure::msg(format!("{}: {e}", path.display())))?;
        let p = Pipeline {
            backend: Arc::new(backend),
            store: self.store.clone(),
            fileqa: self.fileqa.clone(),
            cfg: self.cfg,
        };
        Ok(p.route(&inst.query, &read_datasets(inst)?, &self.opts)?)
    }
}

/// Sends every instance through one shared pipeline (a remote model, say).
pub struct PipelineFormulator {
    pub pipeline: Pipeline,
    pub opts: RouteOptions,
}

impl Formulator for PipelineFormulator {
    fn formulate(&self, inst: &BenchmarkInstance, _repetition: usize) -> Result<PipelineResult, FormulationFailure> {
        Ok(self.pipeline.route(&inst.query, &read_datasets(inst)?, &self.opts)?)
    }
}

/// Any backend factory, called once per run.
pub struct BackendFormulator<F> {
    pub make: F,
    pub store: Arc<RefStore>,
    pub fileqa: Arc<FileQa>,
    pub cfg: AgentConfig,
    pub opts: RouteOptions,
}

impl<F> Formulator for BackendFormulator<F>
where
    F: Fn(&BenchmarkInstance, usize) -> Result<Arc<dyn ChatBackend>, String> + Sync,
{
    fn formulate(&self, inst: &BenchmarkInstance, repetition: usize) -> Result<PipelineResult, FormulationFailure> {
        let backend = (self.make)(inst, repetition).map_err(FormulationFailure::msg)?;
        let p = Pipeline { backend, store: self.store.clone(), fileqa: self.fileqa.clone(), cfg: self.cfg };
        Ok(p.route(&inst.query, &read_datasets(inst)?, &self.opts)?)
    }
}

/// Share of runs whose solved value matches the label; failures count as misses.
pub fn modeling_accuracy(results: &[RunResult]) -> f64 {
    fraction(results, |r| r.value_ok)
}

/// Share of runs structurally equal to the label; not-proven counts as a miss.
pub fn em_accuracy(results: &[RunResult]) -> f64 {
    fraction(results, |r| r.em == EmOutcome::Match)
}

pub fn not_proven_rate(results: &[RunResult]) -> f64 {
    fraction(results, |r| r.em == EmOutcome::NotProven)
}

fn fraction(results: &[RunResult], hit: impl Fn(&RunResult) -> bool) -> f64 {
    if results.is_empty() {
        return 0.0;
    }
    results.iter().filter(|r| hit(r)).count() as f64 / results.len() as f64
}

/// Σ(opt − rev) / Σopt.
pub fn wmape(opt: &[f64], rev: &[f64]) -> Result<f64, EvalError> {
    if opt.len() != rev.len() {
        return Err(EvalError::LengthMismatch { opt: opt.len(), rev: rev.len() });
    }
    let total: f64 = opt.iter().sum();
    if total == 0.0 || !total.is_finite() {
        return Err(EvalError::ZeroOptimum(total));
    }
    Ok(opt.iter().zip(rev).map(|(o, r)| o - r).sum::<f64>() / total)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub exec: ExecMode,
    /// Upper edges of the approx-token buckets; the last bucket is open.
    pub token_edges: Vec<f64>,
    /// Upper edges of the label-variable-count buckets.
    pub variable_edges: Vec<f64>,
    pub canon: CanonConfig,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            exec: ExecMode::default(),
            token_edges: vec![200.0, 400.0, 800.0],
            variable_edges: vec![10.0, 50.0, 200.0],
            canon: CanonConfig::default(),
        }
    }
}

fn check_edges(e: &[f64]) -> Result<(), EvalError> {
    let ok = e.iter().all(|x| x.is_finite() && *x > 0.0) && e.windows(2).all(|w| w[0] < w[1]);
    if ok {
        Ok(())
    } else {
        Err(EvalError::BadEdges)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub report: Report,
    pub runs: Vec<RunResult>,
}

/// Grades one formulation outcome against a label.
pub fn grade(
    inst: &BenchmarkInstance,
    label: &LinearModel,
    repetition: usize,
    outcome: Result<PipelineResult, FormulationFailure>,
    canon: &CanonConfig,
) -> RunResult {
    let mut r = RunResult {
        id: inst.id.clone(),
        ptype: inst.ptype,
        repetition,
        approx_tokens: inst.size.approx_tokens,
        label_variables: inst.size.variables,
        label: inst.label_optimal,
        label_sense: label.sense,
        model: None,
        solved: None,
        value_ok: false,
        em: EmOutcome::Mismatch,
        revenue: 0.0,
        failure: None,
        traces: Vec::new(),
        wall_ms: 0,
    };
    let pr = match outcome {
        Ok(pr) => pr,
        Err(f) => {
            r.failure = Some(f.message);
            r.traces = f.traces;
            return r;
        }
    };
    r.traces = pr.traces;
    let model = pr.model;
    let verdict = compare_models(&model, label, canon);
    r.em = match &verdict {
        Ok(EmVerdict::Match(_)) => EmOutcome::Match,
        Ok(EmVerdict::NotProven) => EmOutcome::NotProven,
        Ok(EmVerdict::Mismatch) | Err(_) => EmOutcome::Mismatch,
    };
    match solve_milp(&model) {
        Ok(s) if s.has_point() => {
            r.solved = Some(s.objective);
            r.value_ok = values_match(s.objective, inst.label_optimal);
            let mapping = match &verdict {
                Ok(EmVerdict::Match(m)) => Some(m),
                _ => None,
            };
            r.revenue = revenue(label, &s.values, mapping);
        }
        Ok(s) => r.failure = Some(format!("generated model has no solution: {:?}", s.status)),
        Err(e) => r.failure = Some(format!("solver: {e}")),
    }
    r.model = Some(model);
    r
}

/// Label objective at the generated point, translated through `mapping` when
/// given and by name otherwise. 0 when the point is missing a label variable
/// or is infeasible for the label.
fn revenue(label: &LinearModel, values: &BTreeMap<String, f64>, mapping: Option<&BTreeMap<String, String>>) -> f64 {
    let point: BTreeMap<String, f64> = match mapping {
        Some(m) => m.iter().filter_map(|(g, l)| values.get(g).map(|x| (l.clone(), *x))).collect(),
        None => values.clone(),
    };
    if label.variables.iter().any(|v| !point.contains_key(&v.name)) {
        return 0.0;
    }
    let scale = label.constraints.iter().map(|c| c.rhs.abs()).fold(1.0_f64, f64::max);
    if label.max_violation(&point) > 1e-6 * scale {
        return 0.0;
    }
    label.objective.evaluate(&point)
}

/// Runs every instance `repetitions` times and grades each run. Formulation
/// and solver failures become failure rows; only unreadable labels abort.
pub fn run_benchmark(
    f: &dyn Formulator,
    instances: &[BenchmarkInstance],
    repetitions: usize,
    opts: &EvalOptions,
) -> Result<Evaluation, EvalError> {
    if repetitions == 0 {
        return Err(EvalError::ZeroRepetitions);
    }
    check_edges(&opts.token_edges)?;
    check_edges(&opts.variable_edges)?;
    let labels = instances
        .iter()
        .map(|i| i.label_model().map_err(|source| EvalError::Label { id: i.id.clone(), source }))
        .collect::<Result<Vec<_>, _>>()?;
    let jobs: Vec<(usize, usize)> = (0..instances.len()).flat_map(|i| (0..repetitions).map(move |k| (i, k))).collect();
    let runs = par::map(opts.exec, &jobs, |&(i, k)| {
        let started = Instant::now();
        let mut r = grade(&instances[i], &labels[i], k, f.formulate(&instances[i], k), &opts.canon);
        r.wall_ms = started.elapsed().as_millis() as u64;
        r
    });
    let report = Report::from_runs(&runs, repetitions, &opts.token_edges, &opts.variable_edges);
    Ok(Evaluation { report, runs })
}

/// Whether WMAPE is meaningful for this label (revenue-style objectives).
pub fn wmape_applies(r: &RunResult) -> bool {
    r.label_sense == ObjSense::Maximize && r.label > 0.0
}
