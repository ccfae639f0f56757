//! Best-first branch-and-bound over LP relaxations.

use super::simplex::{self, LpOutcome};
use super::{Problem, Solution, SolverConfig, SolverError, Status};
use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

struct Node {
    bound: f64,
    id: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
    x: Vec<f64>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    // max-heap: smallest bound first, then oldest node
    fn cmp(&self, other: &Self) -> Ordering {
        other.bound.total_cmp(&self.bound).then(Reverse(self.id).cmp(&Reverse(other.id)))
    }
}

/// Most fractional integer variable; ties go to the lowest index.
fn branch_var(p: &Problem, x: &[f64], tol: f64) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (j, &v) in x.iter().enumerate() {
        if !p.integral[j] {
            continue;
        }
        let frac = v - v.floor();
        let dist = frac.min(1.0 - frac);
        if dist <= tol {
            continue;
        }
        if best.is_none_or(|(_, d)| dist > d) {
            best = Some((j, dist));
        }
    }
    best.map(|(j, _)| j)
}

fn gap_closed(inc: f64, bound: f64, cfg: &SolverConfig) -> bool {
    inc - bound <= cfg.abs_gap.max(cfg.rel_gap * inc.abs())
}

fn rel_gap(inc: f64, bound: f64) -> f64 {
    ((inc - bound) / inc.abs().max(1e-10)).max(0.0)
}

struct Search<'a> {
    p: &'a Problem,
    cfg: &'a SolverConfig,
    heap: BinaryHeap<Node>,
    /// (internal objective, point)
    incumbent: Option<(f64, Vec<f64>)>,
    next_id: usize,
    nodes: usize,
}

impl Search<'_> {
    /// Solves one node; returns false when its relaxation is unbounded.
    fn visit(&mut self, lower: Vec<f64>, upper: Vec<f64>) -> Result<bool, SolverError> {
        let (p, cfg) = (self.p, self.cfg);
        self.nodes += 1;
        let (x, z) = match simplex::solve(p, &lower, &upper, cfg)? {
            LpOutcome::Infeasible => return Ok(true),
            LpOutcome::Unbounded => return Ok(false),
            LpOutcome::Optimal { x, z } => (x, z),
        };
        if self.incumbent.as_ref().is_some_and(|(inc, _)| gap_closed(*inc, z, cfg)) {
            return Ok(true);
        }
        if branch_var(p, &x, cfg.integrality_tol).is_none() {
            let mut rounded = x.clone();
            for (j, v) in rounded.iter_mut().enumerate() {
                if p.integral[j] {
                    *v = v.round();
                }
            }
            let point = if p.violation(&rounded) <= cfg.feasibility_tol { rounded } else { x };
            let val = p.user_objective(&point);
            let val = if p.maximize { -val } else { val };
            if self.incumbent.as_ref().is_none_or(|(inc, _)| val < *inc) {
                self.incumbent = Some((val, point));
            }
            return Ok(true);
        }
        self.heap.push(Node { bound: z, id: self.next_id, lower, upper, x });
        self.next_id += 1;
        Ok(true)
    }
}

pub(crate) fn solve(p: &Problem, cfg: &SolverConfig) -> Result<Solution, SolverError> {
    let mut s = Search { p, cfg, heap: BinaryHeap::new(), incumbent: None, next_id: 0, nodes: 0 };
    if !s.visit(p.lower.clone(), p.upper.clone())? {
        return Ok(Solution::without_point(
            Status::Unbounded,
            if p.maximize { f64::INFINITY } else { f64::NEG_INFINITY },
        ));
    }

    let mut limit_hit = false;
    while let Some(node) = s.heap.pop() {
        if let Some((inc, _)) = &s.incumbent {
            if gap_closed(*inc, node.bound, cfg) {
                s.heap.push(node);
                break;
            }
        }
        if s.nodes >= cfg.node_limit {
            s.heap.push(node);
            limit_hit = true;
            break;
        }
        let j = branch_var(p, &node.x, cfg.integrality_tol).expect("queued nodes are fractional");
        let v = node.x[j];
        let mut up_lower = node.lower.clone();
        up_lower[j] = v.ceil();
        let mut down_upper = node.upper.clone();
        down_upper[j] = v.floor();
        // a child of a bounded relaxation is bounded too
        s.visit(node.lower, down_upper)?;
        s.visit(up_lower, node.upper)?;
    }

    let nodes = s.nodes;
    let Some((inc, x)) = s.incumbent else {
        if limit_hit {
            return Err(SolverError::NodeLimit { nodes });
        }
        return Ok(Solution { nodes, ..Solution::without_point(Status::Infeasible, f64::NAN) });
    };
    let bound = s.heap.peek().map_or(inc, |n| n.bound.min(inc));
    Ok(Solution {
        status: if limit_hit { Status::GapLimit } else { Status::Optimal },
        objective: p.user_objective(&x),
        values: p.values(&x),
        gap: rel_gap(inc, bound),
        nodes,
    })
}
