mod common;

use common::{close, data_dir, random_int_model};
use leanopt::model::{parse_model_grammar, LinearModel, Params, VarKind};
use leanopt::par::ExecMode;
use leanopt::solver::{brute_force, brute_force_with, solve_milp, IntBox, SolverConfig, Status};
use proptest::prelude::*;

fn truck() -> LinearModel {
    parse_model_grammar(&std::fs::read_to_string(data_dir("benchmark/truck-scheduling/label.txt")).unwrap(), &Params::new()).unwrap()
}

#[test]
fn truck_running_example_golden_optimum() {
    let m = truck();
    assert_eq!((m.variables.len(), m.constraints.len()), (110, 258));
    let s = solve_milp(&m).unwrap();
    assert_eq!(s.status, Status::Optimal);
    assert!(close(s.objective, 14_300.0, 1e-6), "{}", s.objective);
    assert!(m.max_violation(&s.values) <= 1e-6);
}

#[test]
fn reduced_three_truck_variant_matches_enumeration() {
    let text = std::fs::read_to_string(data_dir("benchmark/truck-scheduling/label.txt")).unwrap()
        .replace("[1000, 800, 1200, 600, 900, 700, 1100, 500, 1000, 650]", "[1000, 800, 1200]")
        .replace("[500, 300, 400, 250, 450, 280, 420, 200, 480, 260]", "[500, 300, 400]")
        .replace("[2.0, 3.0, 2.5, 3.0, 2.2, 2.8, 2.4, 3.2, 2.1, 2.9]", "[2.0, 3.0, 2.5]");
    let m = parse_model_grammar(&text, &Params::new()).unwrap();
    let ints = m.variables.iter().filter(|v| v.kind.is_integral()).count();
    assert_eq!(ints, 3 * 4 + 3 * 3);
    // u_{i4} is pinned to 0 by an equality row; enumerate the other 18 binaries
    let mut bx = IntBox::uniform(&m, 0, 1);
    for i in 1..=3 {
        bx = bx.with(format!("u_{i}_4"), 0, 0);
    }
    let b = brute_force(&m, &bx).unwrap();
    let s = solve_milp(&m).unwrap();
    assert_eq!(b.status, Status::Optimal);
    assert!(close(s.objective, b.objective, 1e-6), "{} vs {}", s.objective, b.objective);
}

#[test]
fn brute_force_modes_agree() {
    for seed in 0..20 {
        let m = random_int_model(seed, 50_000);
        let bx = IntBox::new();
        let seq = brute_force_with(&m, &bx, &SolverConfig { exec: ExecMode::Sequential, ..Default::default() }).unwrap();
        let par = brute_force_with(&m, &bx, &SolverConfig { exec: ExecMode::Parallel, ..Default::default() }).unwrap();
        assert_eq!(serde_json::to_string(&seq).unwrap(), serde_json::to_string(&par).unwrap(), "seed {seed}");
    }
}

#[test]
fn all_binary_four_variable_models_match_enumeration() {
    for seed in 100..140 {
        let mut m = random_int_model(seed, 1 << 20);
        m.variables.truncate(4);
        let keep: Vec<String> = m.variables.iter().map(|v| v.name.clone()).collect();
        for v in &mut m.variables {
            v.kind = VarKind::Binary;
            v.lower = 0.0;
            v.upper = 1.0;
        }
        m.objective.terms.retain(|t| keep.contains(&t.1));
        for c in &mut m.constraints {
            c.expr.terms.retain(|t| keep.contains(&t.1));
        }
        m.constraints.retain(|c| !c.expr.terms.is_empty());
        let s = solve_milp(&m).unwrap();
        let b = brute_force(&m, &IntBox::new()).unwrap();
        assert_eq!(s.status, b.status, "seed {seed}");
        assert!(close(s.objective, b.objective, 1e-9), "seed {seed}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn milp_equals_enumeration(seed in any::<u64>()) {
        let m = random_int_model(seed, 200_000);
        let s = solve_milp(&m).unwrap();
        let b = brute_force(&m, &IntBox::new()).unwrap();
        prop_assert_eq!(s.status, b.status);
        prop_assert!(close(s.objective, b.objective, 1e-9), "{} vs {}", s.objective, b.objective);
        if s.has_point() {
            prop_assert!(m.max_violation(&s.values) <= 1e-6);
        }
    }

    #[test]
    fn lp_relaxation_bounds_integer_optimum(seed in any::<u64>()) {
        let m = random_int_model(seed, 200_000);
        let lp = leanopt::solver::solve_lp(&m.relaxed()).unwrap();
        let ip = solve_milp(&m).unwrap();
        if ip.has_point() {
            prop_assert_eq!(lp.status, Status::Optimal);
            let better = match m.sense {
                leanopt::model::ObjSense::Maximize => lp.objective >= ip.objective - 1e-6,
                leanopt::model::ObjSense::Minimize => lp.objective <= ip.objective + 1e-6,
            };
            prop_assert!(better);
        }
    }
}
