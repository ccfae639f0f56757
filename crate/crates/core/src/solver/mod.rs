//! Embedded LP simplex, MILP branch-and-bound, and an exhaustive enumeration oracle.

mod bnb;
mod brute;
mod simplex;

pub use brute::{brute_force, brute_force_with, IntBox};

use crate::model::{validate, Defect, LinearModel, ObjSense, RowSense, VarKind};
use crate::par::ExecMode;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
    GapLimit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub status: Status,
    /// Objective in the model's own sense; NaN (`null` in JSON) when there is no solution.
    #[serde(with = "nan_serde")]
    pub objective: f64,
    pub values: BTreeMap<String, f64>,
    /// Relative gap between incumbent and best bound (0 for LPs).
    #[serde(with = "nan_serde")]
    pub gap: f64,
    /// Branch-and-bound nodes processed (0 for LPs).
    #[serde(default)]
    pub nodes: usize,
}

impl Solution {
    fn without_point(status: Status, objective: f64) -> Self {
        Solution { status, objective, values: BTreeMap::new(), gap: f64::INFINITY, nodes: 0 }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == Status::Optimal
    }

    pub fn has_point(&self) -> bool {
        matches!(self.status, Status::Optimal | Status::GapLimit)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub feasibility_tol: f64,
    pub integrality_tol: f64,
    pub rel_gap: f64,
    pub abs_gap: f64,
    pub node_limit: usize,
    pub enumeration_limit: u64,
    pub pivot_tol: f64,
    pub exec: ExecMode,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            feasibility_tol: 1e-6,
            integrality_tol: 1e-6,
            rel_gap: 1e-4,
            abs_gap: 1e-10,
            node_limit: 1_000_000,
            enumeration_limit: 1_000_000,
            pivot_tol: 1e-12,
            exec: ExecMode::default(),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("model is invalid: {}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Defect>),
    #[error("pivot magnitude {pivot:e} is below the stability threshold")]
    NumericalInstability { pivot: f64 },
    #[error("recovered point violates the model by {violation:e}")]
    InaccurateSolution { violation: f64 },
    #[error("dual objective {dual} does not match primal objective {primal}")]
    DualMismatch { primal: f64, dual: f64 },
    #[error("simplex iteration limit {0} reached")]
    IterationLimit(usize),
    #[error("node limit {nodes} reached without a feasible solution")]
    NodeLimit { nodes: usize },
    #[error("enumeration of {count} points exceeds the limit {limit}")]
    EnumerationLimit { count: u128, limit: u64 },
    #[error("integer variable `{0}` has no finite range to enumerate")]
    UnboxedInteger(String),
}

/// Dense internal form: minimize `c·x + obj_const` (objective negated for maximization).
#[derive(Debug, Clone)]
pub(crate) struct Problem {
    pub names: Vec<String>,
    pub c: Vec<f64>,
    pub obj_const: f64,
    pub rows: Vec<(Vec<(usize, f64)>, RowSense, f64)>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub integral: Vec<bool>,
    pub maximize: bool,
}

impl Problem {
    pub fn from_model(model: &LinearModel) -> Result<Problem, SolverError> {
        let defects = validate(model);
        if !defects.is_empty() {
            return Err(SolverError::Invalid(defects));
        }
        let index = model.variable_index();
        let maximize = model.sense == ObjSense::Maximize;
        let sign = if maximize { -1.0 } else { 1.0 };
        let mut c = vec![0.0; model.variables.len()];
        for (k, v) in &model.objective.terms {
            c[index[v.as_str()]] += sign * k;
        }
        let rows = model
            .constraints
            .iter()
            .map(|r| {
                let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
                for (k, v) in &r.expr.terms {
                    *acc.entry(index[v.as_str()]).or_insert(0.0) += k;
                }
                let terms = acc.into_iter().filter(|(_, k)| *k != 0.0).collect();
                (terms, r.sense, r.rhs - r.expr.constant)
            })
            .collect();
        let (mut lower, mut upper): (Vec<f64>, Vec<f64>) = model.variables.iter().map(|v| (v.lower, v.upper)).unzip();
        for (j, v) in model.variables.iter().enumerate() {
            if v.kind == VarKind::Binary {
                lower[j] = lower[j].max(0.0);
                upper[j] = upper[j].min(1.0);
            }
            if v.kind.is_integral() {
                lower[j] = (lower[j] - 1e-9).ceil();
                upper[j] = (upper[j] + 1e-9).floor();
            }
        }
        Ok(Problem {
            names: model.variables.iter().map(|v| v.name.clone()).collect(),
            c,
            obj_const: sign * model.objective.constant,
            rows,
            lower,
            upper,
            integral: model.variables.iter().map(|v| v.kind.is_integral()).collect(),
            maximize,
        })
    }

    /// Objective in the model's own sense.
    pub fn user_objective(&self, x: &[f64]) -> f64 {
        let z: f64 = self.c.iter().zip(x).map(|(c, x)| c * x).sum::<f64>() + self.obj_const;
        if self.maximize {
            -z
        } else {
            z
        }
    }

    /// Largest scaled row or bound violation.
    pub fn violation(&self, x: &[f64]) -> f64 {
        self.violation_within(x, &self.lower, &self.upper)
    }

    pub fn violation_within(&self, x: &[f64], lower: &[f64], upper: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for j in 0..x.len() {
            if lower[j].is_finite() {
                worst = worst.max((lower[j] - x[j]) / (1.0 + lower[j].abs()));
            }
            if upper[j].is_finite() {
                worst = worst.max((x[j] - upper[j]) / (1.0 + upper[j].abs()));
            }
        }
        for (terms, sense, rhs) in &self.rows {
            let lhs: f64 = terms.iter().map(|(j, a)| a * x[*j]).sum();
            let v = match sense {
                RowSense::Le => lhs - rhs,
                RowSense::Ge => rhs - lhs,
                RowSense::Eq => (lhs - rhs).abs(),
            };
            worst = worst.max(v / (1.0 + rhs.abs()));
        }
        worst
    }

    pub fn values(&self, x: &[f64]) -> BTreeMap<String, f64> {
        self.names.iter().cloned().zip(x.iter().copied()).collect()
    }
}

/// Solve the continuous relaxation of `model` (integrality ignored).
pub fn solve_lp(model: &LinearModel) -> Result<Solution, SolverError> {
    solve_lp_with(model, &SolverConfig::default())
}

pub fn solve_lp_with(model: &LinearModel, cfg: &SolverConfig) -> Result<Solution, SolverError> {
    let p = Problem::from_model(model)?;
    let mut p = p;
    // relaxation keeps the original, unrounded bounds
    for (j, v) in model.variables.iter().enumerate() {
        if v.kind != VarKind::Binary {
            p.lower[j] = v.lower;
            p.upper[j] = v.upper;
        }
    }
    let r = simplex::solve(&p, &p.lower, &p.upper, cfg)?;
    Ok(match r {
        simplex::LpOutcome::Optimal { x, .. } => Solution {
            status: Status::Optimal,
            objective: p.user_objective(&x),
            values: p.values(&x),
            gap: 0.0,
            nodes: 0,
        },
        simplex::LpOutcome::Infeasible => Solution::without_point(Status::Infeasible, f64::NAN),
        simplex::LpOutcome::Unbounded => Solution::without_point(
            Status::Unbounded,
            if p.maximize { f64::INFINITY } else { f64::NEG_INFINITY },
        ),
    })
}

/// Solve a MILP by best-first branch-and-bound (pure LPs are solved directly).
pub fn solve_milp(model: &LinearModel) -> Result<Solution, SolverError> {
    solve_milp_with(model, &SolverConfig::default())
}

pub fn solve_milp_with(model: &LinearModel, cfg: &SolverConfig) -> Result<Solution, SolverError> {
    if !model.is_mip() {
        return solve_lp_with(model, cfg);
    }
    bnb::solve(&Problem::from_model(model)?, cfg)
}

/// `solve_milp` under the default configuration; alias used by the harness.
pub fn solve(model: &LinearModel) -> Result<Solution, SolverError> {
    solve_milp(model)
}

mod nan_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_none()
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Text(String),
        Null(()),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(match Option::<Raw>::deserialize(d)? {
            None | Some(Raw::Null(())) => f64::NAN,
            Some(Raw::Num(x)) => x,
            Some(Raw::Text(t)) if t == "inf" => f64::INFINITY,
            Some(Raw::Text(t)) if t == "-inf" => f64::NEG_INFINITY,
            Some(Raw::Text(t)) => return Err(serde::de::Error::custom(format!("bad objective `{t}`"))),
        })
    }
}
