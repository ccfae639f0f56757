//! Classification, workflow generation, model generation and routing.

mod format;
mod plan;
pub mod prompts;

pub use format::{format_retrieved_data, numeric_columns, parse_number, FormatError};
pub use plan::{
    compile_plan, extract_parameter, parse_plan, CompiledPlan, ParamSpec, Plan, PlanError, PlanVariable, RowFilter,
    Selection, PLAN_END, PLAN_START, PLAN_STEPS,
};

use crate::llm::{
    react_loop, AgentTrace, ChatBackend, ChatMessage, ChatRequest, FnTool, LlmError, ReactConfig, ReactErrorKind,
    TraceEvent,
};
use crate::model::{parse_model_grammar, LinearModel, Params};
use crate::refdata::{ProblemType, RefEntry, RefStore};
use crate::retrieval::{csv_qa_select, render_tables, CsvTable, Embedder, FileQa, RetrievalError};
use prompts::{
    AGNOSTIC_WORKFLOW, CLASSIFY_QUESTION, CLASSIFY_SYSTEM, GENERATION_QUESTION, MODEL_GENERATION, PARSE_RETRY,
    PLAN_RETRY, TAILORED_WORKFLOW,
};
use serde::{Deserialize, Serialize};
use std::fmt::Write;
use std::path::Path;
use std::sync::Arc;
use thiserror::Error;

pub const FILEQA_TOOL: &str = "FileQA";
pub const CSVQA_TOOL: &str = "CSVQA";
pub const PLAN_REQUEST: &str = "Write the Abstract Model Plan for the current task.";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgentConfig {
    pub react: ReactConfig,
    /// Extra attempts after a final answer that does not parse.
    pub parse_retries: usize,
    pub snapshot_rows: usize,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig { react: ReactConfig::default(), parse_retries: 2, snapshot_rows: 5 }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AgentError {
    #[error("no reference entry of type {0}")]
    NoDemo(ProblemType),
    #[error("type {0} uses the type-agnostic workflow")]
    NotTailored(ProblemType),
    #[error("demo `{id}` has an empty `{field}` field")]
    MissingDemoField { id: String, field: &'static str },
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
}

/// Names of the tailored types as offered to the classifier.
pub fn allowed_list() -> String {
    ProblemType::TAILORED.iter().map(|t| t.full_name()).collect::<Vec<_>>().join(", ")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub ptype: ProblemType,
    /// Raw final answer, when the loop produced one.
    pub answer: Option<String>,
    /// The type was not read from the answer (outside the list, or the loop failed).
    pub fallback: bool,
    pub warning: Option<String>,
    pub trace: AgentTrace,
}

/// Runs the classification loop with FileQA. Never fails: unrecognised
/// answers and loop errors both yield `Mixture`.
pub fn classify(backend: &dyn ChatBackend, fileqa: &FileQa, query: &str, cfg: &AgentConfig) -> Classification {
    let tool = FnTool::new(FILEQA_TOOL, |input: &str| {
        fileqa.query(input).map(|h| FileQa::render(&h)).map_err(|e| e.to_string())
    });
    let system = CLASSIFY_SYSTEM.render(&[("allowed", &allowed_list())]).expect("fixed slots");
    let question = CLASSIFY_QUESTION.render(&[("query", query)]).expect("fixed slots");
    match react_loop(backend, "classification", &system, &[&tool], &question, cfg.react) {
        Ok((answer, trace)) => match ProblemType::from_answer(&answer) {
            Some(ptype) => Classification { ptype, answer: Some(answer), fallback: false, warning: None, trace },
            None => Classification {
                ptype: ProblemType::Mixture,
                warning: Some(format!("answer {answer:?} is not an allowed type; using Mixture")),
                answer: Some(answer),
                fallback: true,
                trace,
            },
        },
        Err(e) => Classification {
            ptype: ProblemType::Mixture,
            answer: None,
            fallback: true,
            warning: Some(format!("classification failed ({}); using Mixture", e.kind)),
            trace: e.trace,
        },
    }
}

/// Most similar stored entry of type `t`; ties go to the smaller id.
pub fn select_demo<'s>(store: &'s RefStore, fileqa: &FileQa, t: ProblemType, query: &str) -> Result<&'s RefEntry, AgentError> {
    if !t.is_tailored() {
        return Err(AgentError::NotTailored(t));
    }
    let hits = fileqa.ranked(query, usize::MAX, Some(t))?;
    hits.iter().find_map(|h| store.get(&h.id)).ok_or(AgentError::NoDemo(t))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WorkflowKind {
    Tailored,
    Agnostic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkflowPrompt {
    pub kind: WorkflowKind,
    pub asset: String,
    pub text: String,
    pub demo_id: Option<String>,
}

pub fn build_tailored_workflow(demo: &RefEntry) -> Result<WorkflowPrompt, AgentError> {
    for (field, v) in [("q", &demo.q), ("g", &demo.g), ("f", &demo.f), ("m", &demo.m)] {
        if v.trim().is_empty() {
            return Err(AgentError::MissingDemoField { id: demo.id.clone(), field });
        }
    }
    let text = TAILORED_WORKFLOW
        .render(&[("q_demo", &demo.q), ("g_demo", &demo.g), ("f_demo", &demo.f), ("m_demo", &demo.m)])
        .expect("fixed slots");
    Ok(WorkflowPrompt {
        kind: WorkflowKind::Tailored,
        asset: TAILORED_WORKFLOW.id.into(),
        text,
        demo_id: Some(demo.id.clone()),
    })
}

/// Every `*.csv` file in `dir`, sorted by file name.
pub fn load_datasets(dir: impl AsRef<Path>) -> Result<Vec<CsvTable>, RetrievalError> {
    let dir = dir.as_ref();
    let entries = std::fs::read_dir(dir)
        .map_err(|e| RetrievalError::Csv { file: dir.display().to_string(), msg: e.to_string() })?;
    let mut paths: Vec<_> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("csv")))
        .collect();
    paths.sort();
    paths.iter().map(CsvTable::read).collect()
}

/// Name, header, leading rows and row count of each table.
pub fn csv_schema_snapshot(tables: &[CsvTable], n_rows: usize) -> String {
    let mut out = String::new();
    for t in tables {
        let shown = t.rows.len().min(n_rows);
        let _ = writeln!(out, "File: {}", t.name);
        let _ = writeln!(out, "Columns: {}", t.headers.join(", "));
        if shown < t.rows.len() {
            let _ = writeln!(out, "{} rows, first {shown} shown", t.rows.len());
        } else {
            let _ = writeln!(out, "{} rows", t.rows.len());
        }
        for r in &t.rows[..shown] {
            let _ = writeln!(out, "{}", r.join(", "));
        }
        out.push('\n');
    }
    out.trim_end().to_string()
}

pub fn build_agnostic_workflow(query: &str, snapshot: &str) -> WorkflowPrompt {
    WorkflowPrompt {
        kind: WorkflowKind::Agnostic,
        asset: AGNOSTIC_WORKFLOW.id.into(),
        text: AGNOSTIC_WORKFLOW.render(&[("query", query), ("snapshot", snapshot)]).expect("fixed slots"),
        demo_id: None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generated {
    pub model: LinearModel,
    /// Model in the three-section text form (the final answer, or the compiled plan).
    pub model_text: String,
    /// Raw text of the accepted answer.
    pub answer: String,
    pub plan: Option<Plan>,
    pub traces: Vec<AgentTrace>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenerateFailure {
    #[error("no usable model after {attempts} attempts; last error: {last}")]
    Parse { attempts: usize, last: String },
    #[error("agent loop failed: {0}")]
    Loop(ReactErrorKind),
    #[error(transparent)]
    Backend(LlmError),
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("{kind}")]
pub struct GenerateError {
    pub kind: GenerateFailure,
    pub traces: Vec<AgentTrace>,
}

fn attempt_name(base: &str, attempt: usize) -> String {
    if attempt == 0 {
        base.to_string()
    } else {
        format!("{base}#retry{attempt}")
    }
}

/// Drives the model-generation agent along `workflow`. Each attempt keeps its
/// own trace; an answer that does not parse is sent back with the error, up
/// to `cfg.parse_retries` times.
pub fn generate_model(
    backend: &dyn ChatBackend,
    query: &str,
    workflow: &WorkflowPrompt,
    ptype: ProblemType,
    datasets: &[CsvTable],
    cfg: &AgentConfig,
) -> Result<Generated, GenerateError> {
    match workflow.kind {
        WorkflowKind::Tailored => generate_tailored(backend, query, workflow, ptype, datasets, cfg),
        WorkflowKind::Agnostic => generate_agnostic(backend, workflow, datasets, cfg),
    }
}

fn generate_tailored(
    backend: &dyn ChatBackend,
    query: &str,
    workflow: &WorkflowPrompt,
    ptype: ProblemType,
    datasets: &[CsvTable],
    cfg: &AgentConfig,
) -> Result<Generated, GenerateError> {
    let tool = FnTool::new(CSVQA_TOOL, |input: &str| {
        let rows = csv_qa_select(datasets, input);
        Ok(format_retrieved_data(ptype, &rows).unwrap_or_else(|_| render_tables(&rows).trim_end().to_string()))
    });
    let system = MODEL_GENERATION.render(&[("workflow", &workflow.text)]).expect("fixed slots");
    let base = GENERATION_QUESTION.render(&[("query", query)]).expect("fixed slots");
    let mut question = base.clone();
    let mut traces = Vec::new();
    let mut last = String::new();
    for attempt in 0..=cfg.parse_retries {
        match react_loop(backend, &attempt_name("model_generation", attempt), &system, &[&tool], &question, cfg.react) {
            Ok((answer, trace)) => {
                traces.push(trace);
                match parse_model_grammar(&answer, &Params::new()) {
                    Ok(model) => {
                        return Ok(Generated { model, model_text: answer.clone(), answer, plan: None, traces });
                    }
                    Err(e) => {
                        last = e.to_string();
                        let note = PARSE_RETRY.render(&[("error", &last)]).expect("fixed slots");
                        question = format!("{base}\n\n{note}");
                    }
                }
            }
            Err(e) => {
                traces.push(e.trace);
                return Err(GenerateError { kind: GenerateFailure::Loop(e.kind), traces });
            }
        }
    }
    Err(GenerateError { kind: GenerateFailure::Parse { attempts: cfg.parse_retries + 1, last }, traces })
}

fn generate_agnostic(
    backend: &dyn ChatBackend,
    workflow: &WorkflowPrompt,
    datasets: &[CsvTable],
    cfg: &AgentConfig,
) -> Result<Generated, GenerateError> {
    let mut messages = vec![ChatMessage::system(&workflow.text), ChatMessage::user(PLAN_REQUEST)];
    let mut traces = Vec::new();
    let mut last = String::new();
    let mut fresh = 0;
    for attempt in 0..=cfg.parse_retries {
        let mut trace = AgentTrace::new(attempt_name("plan_generation", attempt));
        for m in &messages[fresh..] {
            trace.push(TraceEvent::Prompt { role: m.role, content: m.content.clone() });
        }
        let reply = match backend.complete(&ChatRequest::new(messages.clone())) {
            Ok(r) => r,
            Err(e) => {
                traces.push(trace);
                return Err(GenerateError { kind: GenerateFailure::Backend(e), traces });
            }
        };
        trace.push(TraceEvent::FinalAnswer { text: reply.clone() });
        traces.push(trace);
        let outcome = parse_plan(&reply).and_then(|p| compile_plan(&p, datasets).map(|c| (p, c)));
        match outcome {
            Ok((plan, compiled)) => {
                return Ok(Generated {
                    model: compiled.model,
                    model_text: compiled.model_text,
                    answer: reply,
                    plan: Some(plan),
                    traces,
                })
            }
            Err(e) => {
                last = e.to_string();
                messages.push(ChatMessage::assistant(&reply));
                fresh = messages.len();
                messages.push(ChatMessage::user(PLAN_RETRY.render(&[("error", &last)]).expect("fixed slots")));
            }
        }
    }
    Err(GenerateError { kind: GenerateFailure::Parse { attempts: cfg.parse_retries + 1, last }, traces })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RouteOptions {
    /// Skip classification and use this type.
    pub force_type: Option<ProblemType>,
    /// Use the type-agnostic workflow whatever the type.
    pub force_agnostic: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineResult {
    pub ptype: ProblemType,
    pub classification: Option<String>,
    pub workflow_kind: WorkflowKind,
    pub demo_id: Option<String>,
    pub workflow: String,
    pub answer: String,
    pub model_text: String,
    pub plan: Option<Plan>,
    pub model: LinearModel,
    pub warnings: Vec<String>,
    pub traces: Vec<AgentTrace>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Workflow,
    Generation,
}

#[derive(Debug, Error, Clone, PartialEq, Serialize)]
#[error("{stage:?} stage failed: {message}")]
pub struct RouteError {
    pub stage: Stage,
    pub message: String,
    pub ptype: Option<ProblemType>,
    pub warnings: Vec<String>,
    pub traces: Vec<AgentTrace>,
}

/// Shared read-only state for pipeline runs.
#[derive(Clone)]
pub struct Pipeline {
    pub backend: Arc<dyn ChatBackend>,
    pub store: Arc<RefStore>,
    pub fileqa: Arc<FileQa>,
    pub cfg: AgentConfig,
}

impl Pipeline {
    pub fn new(
        backend: Arc<dyn ChatBackend>,
        store: RefStore,
        embedder: Arc<dyn Embedder>,
        cfg: AgentConfig,
    ) -> Result<Self, RetrievalError> {
        let fileqa = FileQa::build(embedder, store.entries.iter().map(|e| (e.id.clone(), e.q.clone(), e.t)))?;
        Ok(Pipeline { backend, store: Arc::new(store), fileqa: Arc::new(fileqa), cfg })
    }

    pub fn classify(&self, query: &str) -> Classification {
        classify(self.backend.as_ref(), &self.fileqa, query, &self.cfg)
    }

    /// Classify, pick the workflow (agnostic for Others and Mixture), then generate.
    pub fn route(&self, query: &str, datasets: &[CsvTable], opts: &RouteOptions) -> Result<PipelineResult, RouteError> {
        let mut warnings = Vec::new();
        let mut traces = Vec::new();
        let mut classification = None;
        let ptype = match opts.force_type {
            Some(t) => t,
            None => {
                let c = self.classify(query);
                warnings.extend(c.warning.clone());
                traces.push(c.trace);
                classification = c.answer;
                c.ptype
            }
        };
        let mut workflow = None;
        if ptype.is_tailored() && !opts.force_agnostic {
            match select_demo(&self.store, &self.fileqa, ptype, query) {
                Ok(demo) => match build_tailored_workflow(demo) {
                    Ok(w) => workflow = Some(w),
                    Err(e) => {
                        return Err(RouteError {
                            stage: Stage::Workflow,
                            message: e.to_string(),
                            ptype: Some(ptype),
                            warnings,
                            traces,
                        })
                    }
                },
                Err(e) => warnings.push(format!("{e}; using the type-agnostic workflow")),
            }
        }
        let workflow = workflow.unwrap_or_else(|| {
            build_agnostic_workflow(query, &csv_schema_snapshot(datasets, self.cfg.snapshot_rows))
        });
        match generate_model(self.backend.as_ref(), query, &workflow, ptype, datasets, &self.cfg) {
            Ok(g) => {
                traces.extend(g.traces);
                let mut model = g.model;
                model.metadata.insert("problem_type".into(), ptype.code().into());
                Ok(PipelineResult {
                    ptype,
                    classification,
                    workflow_kind: workflow.kind,
                    demo_id: workflow.demo_id,
                    workflow: workflow.text,
                    answer: g.answer,
                    model_text: g.model_text,
                    plan: g.plan,
                    model,
                    warnings,
                    traces,
                })
            }
            Err(e) => {
                traces.extend(e.traces);
                Err(RouteError { stage: Stage::Generation, message: e.kind.to_string(), ptype: Some(ptype), warnings, traces })
            }
        }
    }
}
