mod common;

use common::{data_dir, diet};
use leanopt::agents::{AgentConfig, Pipeline, PipelineResult, RouteOptions, WorkflowKind};
use leanopt::eval::{
    em_accuracy, grade, modeling_accuracy, not_proven_rate, render_table, run_benchmark, wmape, EmOutcome, EvalError,
    EvalOptions, Evaluation, FormulationFailure, Formulator, Report, RunResult, TranscriptFormulator,
};
use leanopt::llm::ScriptedBackend;
use leanopt::model::{CanonConfig, LinearExpr, LinearModel, ObjSense, Variable};
use leanopt::par::ExecMode;
use leanopt::refdata::{load_benchmark, load_refdata, BenchmarkInstance, LabelSource, ProblemType, SizeInfo};
use leanopt::retrieval::LexicalEmbedder;
use std::collections::HashMap;
use std::sync::{Arc, OnceLock};

fn formulator() -> TranscriptFormulator {
    let store = load_refdata(data_dir("refdata")).unwrap();
    let p = Pipeline::new(
        Arc::new(ScriptedBackend::new(Vec::<String>::new())),
        store,
        Arc::new(LexicalEmbedder::default()),
        AgentConfig::default(),
    )
    .unwrap();
    TranscriptFormulator::from_pipeline(&p, RouteOptions::default())
}

fn instances() -> Vec<BenchmarkInstance> {
    load_benchmark(data_dir("benchmark")).unwrap()
}

fn evaluate(f: &dyn Formulator, reps: usize, exec: ExecMode) -> Evaluation {
    run_benchmark(f, &instances(), reps, &EvalOptions { exec, ..EvalOptions::default() }).unwrap()
}

/// Single-repetition run of the stored fixture, shared across tests.
fn baseline() -> &'static Evaluation {
    static E: OnceLock<Evaluation> = OnceLock::new();
    E.get_or_init(|| evaluate(&formulator(), 1, ExecMode::Parallel))
}

fn run(value_ok: bool, em: EmOutcome, failure: Option<&str>) -> RunResult {
    RunResult {
        id: format!("r{}", next_id()),
        ptype: ProblemType::Ra,
        repetition: 0,
        approx_tokens: 100,
        label_variables: 2,
        label: 10.0,
        label_sense: ObjSense::Maximize,
        model: None,
        solved: None,
        value_ok,
        em,
        revenue: 0.0,
        failure: failure.map(String::from),
        traces: Vec::new(),
        wall_ms: 0,
    }
}

fn next_id() -> usize {
    use std::sync::atomic::{AtomicUsize, Ordering};
    static N: AtomicUsize = AtomicUsize::new(0);
    N.fetch_add(1, Ordering::Relaxed)
}

#[test]
fn wmape_hand_checks() {
    assert!((wmape(&[100.0, 100.0], &[90.0, 80.0]).unwrap() - 0.15).abs() < 1e-12);
    assert_eq!(wmape(&[100.0, 100.0], &[100.0, 100.0]).unwrap(), 0.0);
    // failed formulation contributes zero revenue
    assert!((wmape(&[100.0, 100.0], &[100.0, 0.0]).unwrap() - 0.5).abs() < 1e-12);
    assert!(matches!(wmape(&[0.0, 0.0], &[1.0, 1.0]), Err(EvalError::ZeroOptimum(_))));
    assert!(matches!(wmape(&[1.0], &[1.0, 2.0]), Err(EvalError::LengthMismatch { .. })));
}

#[test]
fn accuracy_fractions() {
    let rs = vec![
        run(true, EmOutcome::Match, None),
        run(true, EmOutcome::Mismatch, None),
        run(false, EmOutcome::NotProven, None),
        run(false, EmOutcome::Mismatch, Some("boom")),
    ];
    assert_eq!(modeling_accuracy(&rs), 0.5);
    assert_eq!(em_accuracy(&rs), 0.25);
    assert_eq!(not_proven_rate(&rs), 0.25);
    let fails = vec![run(false, EmOutcome::Mismatch, Some("x")), run(false, EmOutcome::Mismatch, Some("y"))];
    assert_eq!(modeling_accuracy(&fails), 0.0);
    assert_eq!(modeling_accuracy(&[]), 0.0);
}

fn diet_instance(label_optimal: f64) -> BenchmarkInstance {
    BenchmarkInstance {
        id: "diet".into(),
        dir: data_dir("benchmark"),
        query: String::new(),
        datasets: Vec::new(),
        label: LabelSource::Lp("unused.lp".into()),
        label_optimal,
        ptype: ProblemType::Others,
        size: SizeInfo { variables: 4, approx_tokens: 0 },
    }
}

fn generated(model: LinearModel) -> Result<PipelineResult, FormulationFailure> {
    Ok(PipelineResult {
        ptype: ProblemType::Others,
        classification: None,
        workflow_kind: WorkflowKind::Agnostic,
        demo_id: None,
        workflow: String::new(),
        answer: String::new(),
        model_text: String::new(),
        plan: None,
        model,
        warnings: Vec::new(),
        traces: Vec::new(),
    })
}

#[test]
fn subset_formulation_matches_value_but_not_structure() {
    let label = diet(4);
    let r = grade(&diet_instance(15.6), &label, 0, generated(diet(2)), &CanonConfig::default());
    assert!((r.solved.unwrap() - 15.6).abs() < 1e-9);
    assert!(r.value_ok);
    assert_eq!(r.em, EmOutcome::Mismatch);
    assert!(r.failure.is_none());

    let same = grade(&diet_instance(15.6), &label, 0, generated(diet(4)), &CanonConfig::default());
    assert!(same.value_ok);
    assert_eq!(same.em, EmOutcome::Match);

    let names = ["bread", "milk", "cheese", "potato"];
    let map: HashMap<String, String> = names.iter().enumerate().map(|(i, n)| (n.to_string(), format!("f{}", 3 - i))).collect();
    let renamed = grade(&diet_instance(15.6), &label, 0, generated(label.renamed(&map)), &CanonConfig::default());
    assert_eq!(renamed.em, EmOutcome::Match);
}

#[test]
fn value_tolerance_is_relative() {
    // objective fixed by a single bounded variable
    let mk = |ub: f64| {
        let mut m = LinearModel::new(ObjSense::Maximize);
        m.add_variable(Variable::continuous("x").with_bounds(0.0, ub));
        m.objective = LinearExpr::new().term(1.0, "x");
        m
    };
    let label = mk(100.0);
    let mut inst = diet_instance(100.0);
    inst.size.variables = 1;
    let near = grade(&inst, &label, 0, generated(mk(100.000009)), &CanonConfig::default());
    assert!(near.value_ok);
    assert_eq!(near.em, EmOutcome::Mismatch);
    let far = grade(&inst, &label, 0, generated(mk(100.011)), &CanonConfig::default());
    assert!(!far.value_ok);
    // the generated optimum 100.011 is infeasible for the label
    assert_eq!(far.revenue, 0.0);
}

#[test]
fn failure_has_no_model_or_value() {
    let f = Err(FormulationFailure { message: "scripted backend exhausted".into(), traces: Vec::new() });
    let r = grade(&diet_instance(15.6), &diet(4), 2, f, &CanonConfig::default());
    assert!(r.model.is_none() && r.solved.is_none() && !r.value_ok);
    assert_eq!(r.em, EmOutcome::Mismatch);
    assert_eq!(r.repetition, 2);
}

#[test]
fn stored_fixture_report() {
    let e = baseline();
    assert_eq!(e.runs.len(), 4);
    let by_id: HashMap<&str, &RunResult> = e.runs.iter().map(|r| (r.id.as_str(), r)).collect();
    for id in ["nike-oliviakim", "truck-scheduling", "norway-dealership"] {
        let r = by_id[id];
        assert!(r.value_ok && r.em == EmOutcome::Match, "{id}: {r:?}");
        // matched runs earn the label optimum
        assert!((r.revenue - r.label).abs() <= 1e-6 * r.label, "{id}: {}", r.revenue);
    }
    let tp = by_id["tp-two-warehouses"];
    assert!(!tp.value_ok && tp.em == EmOutcome::Mismatch);
    assert!(tp.solved.unwrap() < tp.label);

    let rep = &e.report;
    assert_eq!(rep.instances, 4);
    assert_eq!(rep.overall.value, 0.75);
    assert_eq!(rep.overall.em, 0.75);
    assert_eq!(rep.by_type[&ProblemType::Ra].value, 1.0);
    assert_eq!(rep.by_type[&ProblemType::Tp].value, 0.0);
    assert_eq!(rep.by_type.keys().copied().collect::<Vec<_>>(), [ProblemType::Nrm, ProblemType::Ra, ProblemType::Tp]);
    assert!(rep.failures.is_empty());
    assert!(rep.em_without_value.is_empty());
    // only maximization labels (nike, norway) enter WMAPE, both at their optimum
    assert_eq!(rep.wmape_by_variables.iter().map(|w| w.instances).sum::<usize>(), 2);
    assert!(rep.wmape_overall.unwrap().abs() < 1e-9);

    let text = render_table(rep);
    for needle in ["NRM", "RA", "TP", "Overall", "75.0%", "[800,inf)", "WMAPE"] {
        assert!(text.contains(needle), "missing {needle}:\n{text}");
    }
}

#[test]
fn report_is_recomputable_and_groups_partition() {
    let e = baseline();
    let o = EvalOptions::default();
    assert_eq!(Report::from_runs(&e.runs, 1, &o.token_edges, &o.variable_edges), e.report);
    assert_eq!(e.report.overall.value, modeling_accuracy(&e.runs));
    assert_eq!(e.report.overall.em, em_accuracy(&e.runs));
    for groups in [&e.report.by_tokens, &e.report.by_variables] {
        assert_eq!(groups.len(), 4);
        assert_eq!(groups.iter().map(|b| b.accuracy.instances).sum::<usize>(), e.report.instances);
        assert_eq!(groups.iter().map(|b| b.accuracy.runs).sum::<usize>(), e.runs.len());
        assert!(groups.iter().all(|b| (0.0..=1.0).contains(&b.accuracy.value) && (0.0..=1.0).contains(&b.accuracy.em)));
    }
    for r in &e.runs {
        assert!(r.solved.is_none() || r.model.is_some());
        assert!(r.em != EmOutcome::Match || r.value_ok, "{}", r.id);
    }
}

fn strip_wall(mut runs: Vec<RunResult>) -> Vec<RunResult> {
    for r in &mut runs {
        r.wall_ms = 0;
    }
    runs
}

#[test]
fn runs_are_bit_reproducible_across_modes() {
    let seq = evaluate(&formulator(), 1, ExecMode::Sequential);
    let base = baseline();
    assert_eq!(serde_json::to_string(&seq.report).unwrap(), serde_json::to_string(&base.report).unwrap());
    assert_eq!(strip_wall(seq.runs), strip_wall(base.runs.clone()));
}

#[test]
fn repetitions_average_to_single_run() {
    let e3 = evaluate(&formulator(), 3, ExecMode::Parallel);
    let e1 = baseline();
    assert_eq!(e3.runs.len(), 12);
    assert_eq!(e3.report.repetitions, 3);
    assert_eq!(e3.report.instances, 4);
    assert_eq!(e3.report.overall.runs, 12);
    assert_eq!(e3.report.overall.value, e1.report.overall.value);
    assert_eq!(e3.report.overall.em, e1.report.overall.em);
    for (t, a) in &e1.report.by_type {
        assert_eq!(e3.report.by_type[t].value, a.value);
        assert_eq!(e3.report.by_type[t].em, a.em);
    }
    for (a, b) in e3.report.by_tokens.iter().zip(&e1.report.by_tokens) {
        assert_eq!((a.accuracy.value, a.accuracy.em, a.accuracy.instances), (b.accuracy.value, b.accuracy.em, b.accuracy.instances));
    }
    assert_eq!(e3.report.wmape_overall, e1.report.wmape_overall);
    let reps: Vec<usize> = e3.runs.iter().filter(|r| r.id == "nike-oliviakim").map(|r| r.repetition).collect();
    assert_eq!(reps, [0, 1, 2]);
}

/// Fails one instance on chosen repetitions, otherwise replays transcripts.
struct Faulty {
    inner: TranscriptFormulator,
    id: &'static str,
    reps: &'static [usize],
}

impl Formulator for Faulty {
    fn formulate(&self, inst: &BenchmarkInstance, rep: usize) -> Result<PipelineResult, FormulationFailure> {
        if inst.id == self.id && self.reps.contains(&rep) {
            return Err(FormulationFailure { message: "injected fault".into(), traces: Vec::new() });
        }
        self.inner.formulate(inst, rep)
    }
}

#[test]
fn injected_fault_becomes_failure_row() {
    let f = Faulty { inner: formulator(), id: "nike-oliviakim", reps: &[1] };
    let e = evaluate(&f, 2, ExecMode::Parallel);
    assert_eq!(e.runs.len(), 8);
    assert_eq!(e.report.failures.len(), 1);
    assert_eq!(e.report.failures[0].id, "nike-oliviakim");
    assert_eq!(e.report.failures[0].repetition, 1);
    assert_eq!(e.report.failures[0].message, "injected fault");
    assert_eq!(e.report.overall.value, 5.0 / 8.0);
    assert_eq!(e.report.by_type[&ProblemType::Nrm].value, 0.5);
    assert!(render_table(&e.report).contains("nike-oliviakim#1: injected fault"));

    // WMAPE oracle: the failed run earns nothing
    let insts = instances();
    let revenue_total: f64 = insts
        .iter()
        .filter(|i| i.label_model().unwrap().sense == ObjSense::Maximize)
        .map(|i| i.label_optimal)
        .sum();
    let nike = insts.iter().find(|i| i.id == "nike-oliviakim").unwrap().label_optimal;
    let want = nike / (2.0 * revenue_total);
    assert!((e.report.wmape_overall.unwrap() - want).abs() < 1e-12);
}

#[test]
fn missing_transcript_is_recorded_not_fatal() {
    let tmp = tempfile::tempdir().unwrap();
    let mut insts = instances();
    insts.retain(|i| i.id != "truck-scheduling");
    insts[0].dir = tmp.path().to_path_buf();
    let e = run_benchmark(&formulator(), &insts, 1, &EvalOptions::default()).unwrap();
    assert_eq!(e.runs.len(), 3);
    assert_eq!(e.report.failures.len(), 1);
    assert!(e.report.failures[0].message.contains("transcript.json"), "{}", e.report.failures[0].message);
}

#[test]
fn truncated_transcript_fails_inside_the_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let mut insts = instances();
    insts.retain(|i| i.id == "norway-dealership");
    let turns: Vec<String> =
        serde_json::from_str(&std::fs::read_to_string(insts[0].dir.join("transcript.json")).unwrap()).unwrap();
    std::fs::write(tmp.path().join("transcript.json"), serde_json::to_string(&turns[..turns.len() - 1]).unwrap()).unwrap();
    insts[0].dir = tmp.path().to_path_buf();
    let e = run_benchmark(&formulator(), &insts, 1, &EvalOptions::default()).unwrap();
    let r = &e.runs[0];
    assert!(r.failed() && r.model.is_none());
    assert!(!r.traces.is_empty(), "traces up to the failure are kept");
}

#[test]
fn bad_options_rejected() {
    let f = formulator();
    assert!(matches!(run_benchmark(&f, &[], 0, &EvalOptions::default()), Err(EvalError::ZeroRepetitions)));
    let o = EvalOptions { token_edges: vec![400.0, 200.0], ..EvalOptions::default() };
    assert!(matches!(run_benchmark(&f, &[], 1, &o), Err(EvalError::BadEdges)));
}

#[test]
fn report_json_round_trips() {
    let rep = &baseline().report;
    let json = serde_json::to_string_pretty(rep).unwrap();
    assert!(json.contains("\"NRM\""));
    let back: Report = serde_json::from_str(&json).unwrap();
    assert_eq!(&back, rep);
}
