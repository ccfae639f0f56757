//! Shared generators for integration tests.
#![allow(dead_code)]

use leanopt::model::{Constraint, LinearExpr, LinearModel, ObjSense, RowSense, Variable};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::path::PathBuf;

/// Pure-integer model with ≤ 8 variables, bounds within [0, 10], integer
/// coefficients, and an enumeration box of at most `max_points`.
pub fn random_int_model(seed: u64, max_points: u64) -> LinearModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=8usize);
    let mut ub: Vec<u64> = (0..n).map(|_| rng.random_range(0..=10)).collect();
    while ub.iter().map(|u| u + 1).product::<u64>() > max_points {
        let k = (0..n).max_by_key(|&k| (ub[k], std::cmp::Reverse(k))).unwrap();
        ub[k] -= 1;
    }
    let sense = if rng.random_bool(0.5) { ObjSense::Maximize } else { ObjSense::Minimize };
    let mut m = LinearModel::new(sense);
    for (k, u) in ub.iter().enumerate() {
        let v = if *u == 1 && rng.random_bool(0.5) {
            Variable::binary(format!("x{k}"))
        } else {
            Variable::integer(format!("x{k}")).with_bounds(0.0, *u as f64)
        };
        m.add_variable(v);
        m.objective.terms.push((rng.random_range(-10..=10) as f64, format!("x{k}")));
    }
    let rows = rng.random_range(1..=5);
    for r in 0..rows {
        let mut e = LinearExpr::new();
        for k in 0..n {
            if rng.random_bool(0.7) {
                e = e.term(rng.random_range(-6..=9) as f64, format!("x{k}"));
            }
        }
        if e.terms.iter().all(|t| t.0 == 0.0) {
            e = e.term(1.0, format!("x{}", rng.random_range(0..n)));
        }
        let sense = match rng.random_range(0..6) {
            0 => RowSense::Eq,
            1 | 2 => RowSense::Ge,
            _ => RowSense::Le,
        };
        let rhs = rng.random_range(-5..=30) as f64;
        m.add_constraint(Constraint::new(format!("r{r}"), e, sense, rhs));
    }
    m
}

/// |a − b| ≤ tol·max(1, |b|), treating two NaNs as equal.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a.is_nan() && b.is_nan()) || a == b || (a - b).abs() <= tol * b.abs().max(1.0)
}

pub fn data_dir(sub: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(sub)
}

/// Three-city network (A hub, B and C spokes) with as many flights out of each
/// city as into it, so selecting every flight satisfies flow conservation.
pub fn random_gam_instance(seed: u64) -> leanopt::sblp::GamInstance {
    use leanopt::sblp::{FlightKey, GamInstance, ProductOption, Segment};
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ods = [("A", "B"), ("B", "A"), ("A", "C"), ("C", "A")];
    let segments: Vec<Segment> = ods
        .iter()
        .map(|(o, d)| Segment {
            origin: o.to_string(),
            destination: d.to_string(),
            demand: rng.random_range(100.0..2000.0),
            v0: 1.0,
        })
        .collect();
    let per_pair = [rng.random_range(1..=2usize), rng.random_range(1..=2usize)];
    let mut options = Vec::new();
    let mut capacity = std::collections::BTreeMap::new();
    for (l, _) in ods.iter().enumerate() {
        for k in 0..per_pair[l / 2] {
            let departure = format!("{:02}:{:02}", 6 + 4 * k + l % 2, 5 * l);
            capacity.insert(FlightKey { segment: l, departure: departure.clone() }, rng.random_range(20.0..200.0));
            for (fare, cons, base) in [("Eco-flexi", 2.0, 900.0), ("Eco-lite", 1.0, 400.0)] {
                let v = rng.random_range(0.05..0.5);
                options.push(ProductOption {
                    segment: l,
                    departure: departure.clone(),
                    fare: fare.into(),
                    price: base * rng.random_range(0.8..1.2),
                    v,
                    w: v * rng.random_range(0.0..0.5),
                    consumption: cons,
                });
            }
        }
    }
    GamInstance { segments, options, capacity }
}

/// Copy with variables renamed and shuffled, rows shuffled, and a random
/// subset of inequality rows negated. Returns the copy and the old → new names.
pub fn scramble(m: &LinearModel, seed: u64) -> (LinearModel, std::collections::BTreeMap<String, String>) {
    use rand::seq::SliceRandom;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut new_names: Vec<String> = (0..m.variables.len()).map(|k| format!("v{k}_{}", seed % 97)).collect();
    new_names.shuffle(&mut rng);
    let map: std::collections::BTreeMap<String, String> =
        m.variables.iter().map(|v| v.name.clone()).zip(new_names).collect();
    let hmap: std::collections::HashMap<String, String> = map.clone().into_iter().collect();
    let mut out = m.renamed(&hmap);
    out.variables.shuffle(&mut rng);
    for c in &mut out.constraints {
        c.expr.terms.shuffle(&mut rng);
        if c.sense != RowSense::Eq && rng.random_bool(0.5) || c.sense == RowSense::Eq && rng.random_bool(0.3) {
            for t in &mut c.expr.terms {
                t.0 = -t.0;
            }
            c.expr.constant = -c.expr.constant;
            c.rhs = -c.rhs;
            c.sense = c.sense.flipped();
        }
    }
    out.constraints.shuffle(&mut rng);
    out.objective.terms.shuffle(&mut rng);
    (out, map)
}

type OracleRow = (bool, Vec<(usize, u64)>, u64);

fn z(x: f64) -> f64 {
    x + 0.0
}

fn oracle_rows(m: &LinearModel, pos: &dyn Fn(&str) -> usize) -> Vec<OracleRow> {
    let mut rows: Vec<OracleRow> = m
        .constraints
        .iter()
        .map(|c| {
            let e = c.expr.normalized();
            let sign = if c.sense == RowSense::Ge { -1.0 } else { 1.0 };
            let build = |s: f64| {
                let mut t: Vec<(usize, u64)> = e.terms.iter().map(|(k, v)| (pos(v), z(s * k).to_bits())).collect();
                t.sort_unstable();
                (t, z(s * (c.rhs - e.constant)).to_bits())
            };
            if c.sense == RowSense::Eq {
                let (p, n) = (build(1.0), build(-1.0));
                let (t, r) = if p <= n { p } else { n };
                (true, t, r)
            } else {
                let (t, r) = build(sign);
                (false, t, r)
            }
        })
        .collect();
    rows.sort_unstable();
    rows
}

fn var_attrs(m: &LinearModel) -> Vec<(bool, u64, u64, u64)> {
    let obj = m.objective.normalized();
    m.variables
        .iter()
        .map(|v| {
            let (lo, hi) = match v.kind {
                leanopt::model::VarKind::Binary => (v.lower.max(0.0), v.upper.min(1.0)),
                _ => (v.lower, v.upper),
            };
            let c: f64 = obj.terms.iter().filter(|t| t.1 == v.name).map(|t| t.0).sum();
            (v.kind.is_integral(), z(lo).to_bits(), z(hi).to_bits(), z(c).to_bits())
        })
        .collect()
}

/// Equivalence up to renaming, row order and row negation, by trying every
/// variable bijection. Exponential; keep models small.
pub fn brute_equivalent(a: &LinearModel, b: &LinearModel) -> bool {
    let n = a.variables.len();
    if n != b.variables.len()
        || a.constraints.len() != b.constraints.len()
        || a.sense != b.sense
        || z(a.objective.normalized().constant) != z(b.objective.normalized().constant)
    {
        return false;
    }
    let (va, vb) = (var_attrs(a), var_attrs(b));
    let b_index = b.variable_index();
    let target = oracle_rows(b, &|s| b_index[s]);
    let a_index = a.variable_index();
    let mut perm = vec![usize::MAX; n];
    let mut used = vec![false; n];
    fn go(
        i: usize,
        perm: &mut Vec<usize>,
        used: &mut Vec<bool>,
        va: &[(bool, u64, u64, u64)],
        vb: &[(bool, u64, u64, u64)],
        check: &dyn Fn(&[usize]) -> bool,
    ) -> bool {
        if i == perm.len() {
            return check(perm);
        }
        for j in 0..perm.len() {
            if !used[j] && va[i] == vb[j] {
                used[j] = true;
                perm[i] = j;
                if go(i + 1, perm, used, va, vb, check) {
                    return true;
                }
                used[j] = false;
            }
        }
        false
    }
    let check = |p: &[usize]| oracle_rows(a, &|s| p[a_index[s]]) == target;
    go(0, &mut perm, &mut used, &va, &vb, &check)
}

/// Same variables (by name), same attributes, same rows up to order and negation.
pub fn identical_up_to_rows(a: &LinearModel, b: &LinearModel) -> bool {
    let b_index = b.variable_index();
    if a.variables.len() != b.variables.len() || a.variables.iter().any(|v| !b_index.contains_key(v.name.as_str())) {
        return false;
    }
    let perm: Vec<usize> = a.variables.iter().map(|v| b_index[v.name.as_str()]).collect();
    let (va, vb) = (var_attrs(a), var_attrs(b));
    let a_index = a.variable_index();
    a.sense == b.sense
        && z(a.objective.normalized().constant) == z(b.objective.normalized().constant)
        && (0..perm.len()).all(|i| va[i] == vb[perm[i]])
        && oracle_rows(a, &|s| perm[a_index[s]]) == oracle_rows(b, &|s| b_index[s])
}

/// min cost over four foods meeting protein and fat minimums; the optimum
/// only buys the first two.
pub fn diet(foods: usize) -> LinearModel {
    let cost = [2.0, 3.0, 5.0, 9.0];
    let protein = [4.0, 2.0, 1.0, 5.0];
    let fat = [1.0, 3.0, 1.0, 5.0];
    let names = ["bread", "milk", "cheese", "potato"];
    let mut m = LinearModel::new(ObjSense::Minimize);
    for n in &names[..foods] {
        m.add_variable(Variable::continuous(*n));
    }
    m.objective = LinearExpr::from_terms((0..foods).map(|i| (cost[i], names[i])));
    m.add_constraint(Constraint::new(
        "protein",
        LinearExpr::from_terms((0..foods).map(|i| (protein[i], names[i]))),
        RowSense::Ge,
        20.0,
    ));
    m.add_constraint(Constraint::new(
        "fat",
        LinearExpr::from_terms((0..foods).map(|i| (fat[i], names[i]))),
        RowSense::Ge,
        12.0,
    ));
    m
}
