//! Exhaustive enumeration over a finite integer box; the reference oracle for
//! branch-and-bound.

use super::simplex::{self, LpOutcome};
use super::{Problem, Solution, SolverConfig, SolverError, Status};
use crate::model::{LinearModel, RowSense};
use crate::par;
use std::collections::BTreeMap;

/// Inclusive integer ranges to enumerate. Integral variables without an
/// entry fall back to their (finite) model bounds.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IntBox {
    pub ranges: BTreeMap<String, (i64, i64)>,
}

impl IntBox {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, var: impl Into<String>, lo: i64, hi: i64) -> Self {
        self.ranges.insert(var.into(), (lo, hi));
        self
    }

    /// Every integral variable gets `lo..=hi` clipped to its model bounds.
    pub fn uniform(model: &LinearModel, lo: i64, hi: i64) -> Self {
        let ranges = model
            .variables
            .iter()
            .filter(|v| v.kind.is_integral())
            .map(|v| {
                let l = (v.lower.max(lo as f64)).ceil() as i64;
                let h = (v.upper.min(hi as f64)).floor() as i64;
                (v.name.clone(), (l, h))
            })
            .collect();
        IntBox { ranges }
    }
}

pub fn brute_force(model: &LinearModel, bx: &IntBox) -> Result<Solution, SolverError> {
    brute_force_with(model, bx, &SolverConfig::default())
}

#[derive(Clone, Copy, Default)]
struct Acc {
    best: Option<(f64, usize)>,
    unbounded: bool,
}

impl Acc {
    fn merge(self, other: Acc) -> Acc {
        let best = match (self.best, other.best) {
            (Some(a), Some(b)) => Some(if (b.0, b.1) < (a.0, a.1) { b } else { a }),
            (a, b) => a.or(b),
        };
        Acc { best, unbounded: self.unbounded || other.unbounded }
    }
}

enum Eval {
    Skip,
    Unbounded,
    Point(f64, Vec<f64>),
}

pub fn brute_force_with(model: &LinearModel, bx: &IntBox, cfg: &SolverConfig) -> Result<Solution, SolverError> {
    let p = Problem::from_model(model)?;
    let ints: Vec<usize> = (0..p.names.len()).filter(|&j| p.integral[j]).collect();
    let mut ranges = Vec::with_capacity(ints.len());
    for &j in &ints {
        let (lo, hi) = match bx.ranges.get(&p.names[j]) {
            Some(r) => *r,
            None if p.lower[j].is_finite() && p.upper[j].is_finite() => (p.lower[j] as i64, p.upper[j] as i64),
            None => return Err(SolverError::UnboxedInteger(p.names[j].clone())),
        };
        ranges.push((lo, (hi - lo + 1).max(0) as u128));
    }
    let count: u128 = ranges.iter().map(|r| r.1).product();
    if count > cfg.enumeration_limit as u128 {
        return Err(SolverError::EnumerationLimit { count, limit: cfg.enumeration_limit });
    }
    let has_continuous = ints.len() < p.names.len();
    // rows over integral variables only can be checked before any LP
    let int_rows: Vec<usize> =
        (0..p.rows.len()).filter(|&r| p.rows[r].0.iter().all(|(j, _)| p.integral[*j])).collect();

    let eval = |idx: usize| -> Result<Eval, SolverError> {
        let (mut lower, mut upper) = (p.lower.clone(), p.upper.clone());
        let mut rest = idx as u128;
        for (k, &j) in ints.iter().enumerate().rev() {
            let (lo, size) = ranges[k];
            let v = (lo + (rest % size) as i64) as f64;
            rest /= size;
            if v < p.lower[j] || v > p.upper[j] {
                return Ok(Eval::Skip);
            }
            lower[j] = v;
            upper[j] = v;
        }
        for &r in &int_rows {
            let (terms, sense, rhs) = &p.rows[r];
            let lhs: f64 = terms.iter().map(|(j, a)| a * lower[*j]).sum();
            let tol = cfg.feasibility_tol * (1.0 + rhs.abs());
            let ok = match sense {
                RowSense::Le => lhs <= rhs + tol,
                RowSense::Ge => lhs >= rhs - tol,
                RowSense::Eq => (lhs - rhs).abs() <= tol,
            };
            if !ok {
                return Ok(Eval::Skip);
            }
        }
        if !has_continuous {
            if p.violation(&lower) > cfg.feasibility_tol {
                return Ok(Eval::Skip);
            }
            let z = p.c.iter().zip(&lower).map(|(c, x)| c * x).sum::<f64>() + p.obj_const;
            return Ok(Eval::Point(z, lower));
        }
        Ok(match simplex::solve(&p, &lower, &upper, cfg)? {
            LpOutcome::Infeasible => Eval::Skip,
            LpOutcome::Unbounded => Eval::Unbounded,
            LpOutcome::Optimal { x, z } => Eval::Point(z, x),
        })
    };

    let acc = par::fold_range(
        cfg.exec,
        count as usize,
        1024,
        Ok(Acc::default()),
        |acc: Result<Acc, SolverError>, idx| {
            let acc = acc?;
            Ok(match eval(idx)? {
                Eval::Skip => acc,
                Eval::Unbounded => Acc { unbounded: true, ..acc },
                Eval::Point(z, _) => acc.merge(Acc { best: Some((z, idx)), unbounded: false }),
            })
        },
        |a, b| Ok(a?.merge(b?)),
    )?;

    if acc.unbounded {
        return Ok(Solution::without_point(
            Status::Unbounded,
            if p.maximize { f64::INFINITY } else { f64::NEG_INFINITY },
        ));
    }
    let Some((_, idx)) = acc.best else {
        return Ok(Solution::without_point(Status::Infeasible, f64::NAN));
    };
    let Eval::Point(_, x) = eval(idx)? else {
        unreachable!("re-evaluating the best point is deterministic")
    };
    Ok(Solution { status: Status::Optimal, objective: p.user_objective(&x), values: p.values(&x), gap: 0.0, nodes: 0 })
}
