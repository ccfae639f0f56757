use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use leanopt::agents::{AgentConfig, Pipeline, RouteOptions};
use leanopt::eval::{run_benchmark, EvalOptions, TranscriptFormulator};
use leanopt::llm::ScriptedBackend;
use leanopt::model::{Constraint, LinearExpr, LinearModel, ObjSense, RowSense, Variable};
use leanopt::par::{self, ExecMode};
use leanopt::refdata::{load_benchmark, load_refdata};
use leanopt::retrieval::LexicalEmbedder;
use leanopt::solver::{brute_force_with, solve_milp, IntBox, SolverConfig};
use std::hint::black_box;
use std::path::PathBuf;
use std::sync::Arc;

const MODES: [ExecMode; 2] = [ExecMode::Sequential, ExecMode::Parallel];

fn data(sub: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(sub)
}

/// Knapsack with two weight rows over `n` integer items in [0, ub].
fn knapsack(n: usize, ub: f64) -> LinearModel {
    let mut m = LinearModel::new(ObjSense::Maximize);
    let mut w1 = LinearExpr::new();
    let mut w2 = LinearExpr::new();
    for i in 0..n {
        let x = format!("x{i}");
        m.add_variable(Variable::integer(x.clone()).with_bounds(0.0, ub));
        m.objective = m.objective.clone().term((7 + 5 * i % 11) as f64, x.clone());
        w1 = w1.term((3 + 7 * i % 9) as f64, x.clone());
        w2 = w2.term((2 + 4 * i % 7) as f64, x);
    }
    m.add_constraint(Constraint::new("w1", w1, RowSense::Le, 6.0 * n as f64));
    m.add_constraint(Constraint::new("w2", w2, RowSense::Le, 5.0 * n as f64));
    m
}

fn enumeration(c: &mut Criterion) {
    let m = knapsack(7, 5.0);
    let mut g = c.benchmark_group("brute_force_6^7");
    g.sample_size(10);
    for mode in MODES {
        let cfg = SolverConfig { exec: mode, ..SolverConfig::default() };
        g.bench_with_input(BenchmarkId::from_parameter(format!("{mode:?}")), &cfg, |b, cfg| {
            b.iter(|| brute_force_with(black_box(&m), &IntBox::new(), cfg).unwrap())
        });
    }
    g.finish();
}

fn batch_solves(c: &mut Criterion) {
    let models: Vec<LinearModel> = (6..30).map(|n| knapsack(n, 9.0)).collect();
    let mut g = c.benchmark_group("solve_milp_batch24");
    g.sample_size(10);
    for mode in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(format!("{mode:?}")), &mode, |b, &mode| {
            b.iter(|| par::map(mode, black_box(&models), |m| solve_milp(m).unwrap().objective))
        });
    }
    g.finish();
}

fn evaluation(c: &mut Criterion) {
    let p = Pipeline::new(
        Arc::new(ScriptedBackend::new(Vec::<String>::new())),
        load_refdata(data("refdata")).unwrap(),
        Arc::new(LexicalEmbedder::default()),
        AgentConfig::default(),
    )
    .unwrap();
    let f = TranscriptFormulator::from_pipeline(&p, RouteOptions::default());
    let insts = load_benchmark(data("benchmark")).unwrap();
    let mut g = c.benchmark_group("run_benchmark_fixture_x2");
    g.sample_size(10);
    for mode in MODES {
        let opts = EvalOptions { exec: mode, ..EvalOptions::default() };
        g.bench_with_input(BenchmarkId::from_parameter(format!("{mode:?}")), &opts, |b, opts| {
            b.iter(|| run_benchmark(&f, &insts, 2, opts).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, enumeration, batch_solves, evaluation);
criterion_main!(benches);
