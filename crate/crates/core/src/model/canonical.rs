//! Canonical labeling of linear models up to variable renaming, row permutation
//! and row negation.
//!
//! Variables and rows form a coefficient-labelled bipartite graph. Colour
//! refinement splits variables by their neighbourhoods; remaining symmetric
//! cells are resolved by individualize-and-refine search, keeping the smallest
//! leaf certificate.

use super::{validate, Defect, LinearModel, ObjSense, RowSense, VarKind};
use crate::hash::hash_of;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap, HashSet};
use thiserror::Error;

/// Variable-name mapping from the first model onto the second.
pub type VarMapping = BTreeMap<String, String>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CanonConfig {
    /// Largest number of refinement-unresolved variables the exhaustive search accepts.
    pub cap: usize,
    /// Maximum number of search-tree leaves visited.
    pub leaf_budget: usize,
}

impl Default for CanonConfig {
    fn default() -> Self {
        CanonConfig { cap: 30, leaf_budget: 100_000 }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CanonError {
    #[error("model is invalid: {}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Defect>),
    #[error("signature refinement leaves {unresolved} variables unresolved (cap {cap})")]
    Ambiguity { unresolved: usize, cap: usize },
    #[error("canonical search exceeded its budget of {budget} leaves")]
    LeafBudget { budget: usize },
}

/// Deterministic normal form; equal forms mean equivalent models.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CanonicalForm {
    pub sense: ObjSense,
    /// One signature per canonical variable position: kind, bounds, objective coefficient.
    pub variables: Vec<String>,
    /// Sorted row signatures over canonical positions, `<=` or `=` only.
    pub constraints: Vec<String>,
    /// Hex digest of the full certificate.
    pub fingerprint: String,
}

/// Three-way outcome of a structural comparison.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", content = "mapping", rename_all = "snake_case")]
pub enum EmVerdict {
    Match(VarMapping),
    Mismatch,
    NotProven,
}

impl EmVerdict {
    pub fn is_match(&self) -> bool {
        matches!(self, EmVerdict::Match(_))
    }
}

/// Quantize to ten significant digits so values equal within ~1e-9 relative share a key.
fn quant(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { 0.0 } else { x };
    }
    format!("{x:.9e}").parse().unwrap_or(x)
}

fn kind_code(k: VarKind) -> u64 {
    match k {
        VarKind::Continuous => 0,
        VarKind::Integer | VarKind::Binary => 1,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum RowKind {
    Le,
    EqOriented,
    EqSymmetric,
}

#[derive(Debug, Clone)]
struct Row {
    kind: RowKind,
    rhs: f64,
    terms: Vec<(usize, f64)>,
}

#[derive(Debug, Clone)]
struct VarAttr {
    kind: u64,
    lower: f64,
    upper: f64,
    obj: f64,
}

#[derive(Debug, Clone)]
struct Norm {
    names: Vec<String>,
    sense: ObjSense,
    obj_const: f64,
    vars: Vec<VarAttr>,
    rows: Vec<Row>,
}

fn sorted_keys(terms: &[(usize, f64)], sign: f64) -> Vec<u64> {
    let mut v: Vec<u64> = terms.iter().map(|(_, c)| (sign * c).to_bits()).collect();
    v.sort_unstable();
    v
}

fn normalize(model: &LinearModel) -> Norm {
    let index = model.variable_index();
    let mut vars: Vec<VarAttr> = model
        .variables
        .iter()
        .map(|v| {
            let (lo, hi) = match v.kind {
                VarKind::Binary => (v.lower.max(0.0), v.upper.min(1.0)),
                _ => (v.lower, v.upper),
            };
            VarAttr { kind: kind_code(v.kind), lower: quant(lo), upper: quant(hi), obj: 0.0 }
        })
        .collect();
    let obj = model.objective.normalized();
    for (c, name) in &obj.terms {
        vars[index[name.as_str()]].obj = quant(*c);
    }
    let mut rows = Vec::with_capacity(model.constraints.len());
    for c in &model.constraints {
        let e = c.expr.normalized();
        let mut terms: Vec<(usize, f64)> =
            e.terms.iter().map(|(k, v)| (index[v.as_str()], *k)).collect();
        terms.sort_by_key(|t| t.0);
        let mut rhs = c.rhs - e.constant;
        let kind = match c.sense {
            RowSense::Le => RowKind::Le,
            RowSense::Ge => {
                for t in &mut terms {
                    t.1 = -t.1;
                }
                rhs = -rhs;
                RowKind::Le
            }
            RowSense::Eq => RowKind::EqOriented,
        };
        for t in &mut terms {
            t.1 = quant(t.1);
        }
        rhs = quant(rhs);
        let kind = if kind == RowKind::EqOriented {
            let pos = (sorted_keys(&terms, 1.0), rhs.to_bits());
            let neg = (sorted_keys(&terms, -1.0), quant(-rhs).to_bits());
            match pos.cmp(&neg) {
                std::cmp::Ordering::Less => RowKind::EqOriented,
                std::cmp::Ordering::Greater => {
                    for t in &mut terms {
                        t.1 = -t.1;
                    }
                    rhs = quant(-rhs);
                    RowKind::EqOriented
                }
                std::cmp::Ordering::Equal => RowKind::EqSymmetric,
            }
        } else {
            kind
        };
        rows.push(Row { kind, rhs, terms });
    }
    Norm {
        names: model.variables.iter().map(|v| v.name.clone()).collect(),
        sense: model.sense,
        obj_const: quant(obj.constant),
        vars,
        rows,
    }
}

struct Graph {
    var_init: Vec<u64>,
    row_init: Vec<u64>,
    var_adj: Vec<Vec<(usize, u64)>>,
    row_adj: Vec<Vec<(usize, u64)>>,
    twin: Vec<usize>,
}

fn edge_label(kind: RowKind, c: f64) -> u64 {
    match kind {
        RowKind::EqSymmetric => hash_of(&(c.abs().to_bits(), 0x5u8)),
        _ => c.to_bits(),
    }
}

fn build_graph(n: &Norm) -> Graph {
    let var_init: Vec<u64> = n
        .vars
        .iter()
        .map(|v| hash_of(&(v.kind, v.lower.to_bits(), v.upper.to_bits(), v.obj.to_bits())))
        .collect();
    let row_init: Vec<u64> = n
        .rows
        .iter()
        .map(|r| {
            let code: u8 = match r.kind {
                RowKind::Le => 1,
                RowKind::EqOriented => 2,
                RowKind::EqSymmetric => 3,
            };
            hash_of(&(code, r.rhs.to_bits()))
        })
        .collect();
    let mut var_adj = vec![Vec::new(); n.vars.len()];
    let mut row_adj = Vec::with_capacity(n.rows.len());
    let mut columns: Vec<Vec<(usize, u64)>> = vec![Vec::new(); n.vars.len()];
    for (ri, r) in n.rows.iter().enumerate() {
        let mut adj = Vec::with_capacity(r.terms.len());
        for &(v, c) in &r.terms {
            let l = edge_label(r.kind, c);
            var_adj[v].push((ri, l));
            adj.push((v, l));
            columns[v].push((ri, c.to_bits()));
        }
        row_adj.push(adj);
    }
    // Variables with identical attributes and identical columns can be swapped
    // without changing the model; only one per class needs to be branched on.
    let mut classes: HashMap<(u64, &Vec<(usize, u64)>), usize> = HashMap::new();
    let twin = (0..n.vars.len())
        .map(|v| {
            let next = classes.len();
            *classes.entry((var_init[v], &columns[v])).or_insert(next)
        })
        .collect();
    Graph { var_init, row_init, var_adj, row_adj, twin }
}

fn distinct(colors: &[u64]) -> usize {
    let mut c = colors.to_vec();
    c.sort_unstable();
    c.dedup();
    c.len()
}

fn refine(g: &Graph, vc: &mut Vec<u64>, rc: &mut Vec<u64>) {
    let mut nv = distinct(vc);
    let mut nr = distinct(rc);
    loop {
        let new_v: Vec<u64> = (0..vc.len())
            .map(|v| {
                let mut sig: Vec<(u64, u64)> =
                    g.var_adj[v].iter().map(|&(r, l)| (l, rc[r])).collect();
                sig.sort_unstable();
                hash_of(&(vc[v], sig))
            })
            .collect();
        let new_r: Vec<u64> = (0..rc.len())
            .map(|r| {
                let mut sig: Vec<(u64, u64)> =
                    g.row_adj[r].iter().map(|&(v, l)| (l, vc[v])).collect();
                sig.sort_unstable();
                hash_of(&(rc[r], sig))
            })
            .collect();
        let (dv, dr) = (distinct(&new_v), distinct(&new_r));
        *vc = new_v;
        *rc = new_r;
        if dv == nv && dr == nr {
            return;
        }
        nv = dv;
        nr = dr;
    }
}

/// Colour multiset after initial refinement; differs only between non-equivalent models.
fn invariant(vc: &[u64], rc: &[u64]) -> (Vec<u64>, Vec<u64>) {
    let mut a = vc.to_vec();
    let mut b = rc.to_vec();
    a.sort_unstable();
    b.sort_unstable();
    (a, b)
}

fn cells(vc: &[u64]) -> BTreeMap<u64, Vec<usize>> {
    let mut m: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    for (v, &c) in vc.iter().enumerate() {
        m.entry(c).or_default().push(v);
    }
    m
}

fn unresolved(g: &Graph, vc: &[u64]) -> usize {
    cells(vc)
        .values()
        .filter(|m| m.len() > 1)
        .map(|m| {
            let k = m.iter().map(|&v| g.twin[v]).collect::<HashSet<_>>().len();
            if k > 1 {
                k
            } else {
                0
            }
        })
        .sum()
}

fn encode_row(kind: RowKind, rhs: f64, terms: &[(usize, f64)], pos: &[usize], sign: f64) -> Vec<u64> {
    let code = if kind == RowKind::Le { 1 } else { 2 };
    let mut t: Vec<(u64, u64)> =
        terms.iter().map(|&(v, c)| (pos[v] as u64, quant(sign * c).to_bits())).collect();
    t.sort_unstable();
    let mut out = vec![code, quant(sign * rhs).to_bits(), t.len() as u64];
    for (p, c) in t {
        out.push(p);
        out.push(c);
    }
    out
}

fn row_certificate(r: &Row, pos: &[usize]) -> Vec<u64> {
    let a = encode_row(r.kind, r.rhs, &r.terms, pos, 1.0);
    if r.kind == RowKind::Le {
        a
    } else {
        a.min(encode_row(r.kind, r.rhs, &r.terms, pos, -1.0))
    }
}

fn certificate(n: &Norm, order: &[usize]) -> Vec<u64> {
    let mut pos = vec![0usize; order.len()];
    for (k, &v) in order.iter().enumerate() {
        pos[v] = k;
    }
    let mut out = vec![
        matches!(n.sense, ObjSense::Maximize) as u64,
        n.obj_const.to_bits(),
        n.vars.len() as u64,
        n.rows.len() as u64,
    ];
    for &v in order {
        let a = &n.vars[v];
        out.extend([a.kind, a.lower.to_bits(), a.upper.to_bits(), a.obj.to_bits()]);
    }
    let mut rows: Vec<Vec<u64>> = n.rows.iter().map(|r| row_certificate(r, &pos)).collect();
    rows.sort_unstable();
    for r in rows {
        out.extend(r);
    }
    out
}

struct Search<'a> {
    g: &'a Graph,
    n: &'a Norm,
    best: Option<(Vec<u64>, Vec<usize>)>,
    leaves: usize,
    budget: usize,
}

impl Search<'_> {
    fn run(&mut self, mut vc: Vec<u64>, mut rc: Vec<u64>, depth: u64) -> Result<(), CanonError> {
        refine(self.g, &mut vc, &mut rc);
        let target = cells(&vc)
            .into_iter()
            .filter(|(_, m)| m.len() > 1)
            .min_by_key(|(c, m)| (m.len(), *c));
        match target {
            None => {
                self.leaves += 1;
                if self.leaves > self.budget {
                    return Err(CanonError::LeafBudget { budget: self.budget });
                }
                let mut order: Vec<usize> = (0..vc.len()).collect();
                order.sort_by_key(|&v| vc[v]);
                let cert = certificate(self.n, &order);
                if self.best.as_ref().is_none_or(|(b, _)| cert < *b) {
                    self.best = Some((cert, order));
                }
                Ok(())
            }
            Some((color, members)) => {
                let mut tried = HashSet::new();
                for v in members {
                    if !tried.insert(self.g.twin[v]) {
                        continue;
                    }
                    let mut next = vc.clone();
                    next[v] = hash_of(&(color, 0x1d1d_u32, depth));
                    self.run(next, rc.clone(), depth + 1)?;
                }
                Ok(())
            }
        }
    }
}

struct Labeled {
    norm: Norm,
    cert: Vec<u64>,
    order: Vec<usize>,
}

struct Prepared {
    norm: Norm,
    graph: Graph,
    vc: Vec<u64>,
    rc: Vec<u64>,
}

fn prepare(model: &LinearModel) -> Result<Prepared, CanonError> {
    let defects = validate(model);
    if !defects.is_empty() {
        return Err(CanonError::Invalid(defects));
    }
    let norm = normalize(model);
    let graph = build_graph(&norm);
    let mut vc = graph.var_init.clone();
    let mut rc = graph.row_init.clone();
    refine(&graph, &mut vc, &mut rc);
    Ok(Prepared { norm, graph, vc, rc })
}

fn label(p: Prepared, cfg: &CanonConfig) -> Result<Labeled, CanonError> {
    let u = unresolved(&p.graph, &p.vc);
    if u > cfg.cap {
        return Err(CanonError::Ambiguity { unresolved: u, cap: cfg.cap });
    }
    let mut s = Search { g: &p.graph, n: &p.norm, best: None, leaves: 0, budget: cfg.leaf_budget };
    s.run(p.vc.clone(), p.rc.clone(), 0)?;
    let (cert, order) = s.best.unwrap_or_default();
    Ok(Labeled { norm: p.norm, cert, order })
}

fn fmt_num(x: f64) -> String {
    if x == f64::INFINITY {
        "inf".into()
    } else if x == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{x}")
    }
}

fn form_of(l: &Labeled) -> CanonicalForm {
    let n = &l.norm;
    let mut pos = vec![0usize; l.order.len()];
    for (k, &v) in l.order.iter().enumerate() {
        pos[v] = k;
    }
    let variables = l
        .order
        .iter()
        .enumerate()
        .map(|(k, &v)| {
            let a = &n.vars[v];
            let kind = if a.kind == 0 { "C" } else { "I" };
            format!(
                "v{k}:{kind}[{},{}]obj={}",
                fmt_num(a.lower),
                fmt_num(a.upper),
                fmt_num(a.obj)
            )
        })
        .collect();
    let mut constraints: Vec<String> = n
        .rows
        .iter()
        .map(|r| {
            let enc = row_certificate(r, &pos);
            let sense = if enc[0] == 1 { "<=" } else { "=" };
            let rhs = f64::from_bits(enc[1]);
            let terms: Vec<String> = enc[3..]
                .chunks(2)
                .map(|p| format!("{}*v{}", fmt_num(f64::from_bits(p[1])), p[0]))
                .collect();
            format!("{} {sense} {}", terms.join(" + "), fmt_num(rhs))
        })
        .collect();
    constraints.sort();
    CanonicalForm {
        sense: n.sense,
        variables,
        constraints,
        fingerprint: format!("{:016x}", hash_of(&l.cert)),
    }
}

pub fn canonicalize(model: &LinearModel) -> Result<CanonicalForm, CanonError> {
    canonicalize_with(model, &CanonConfig::default())
}

pub fn canonicalize_with(model: &LinearModel, cfg: &CanonConfig) -> Result<CanonicalForm, CanonError> {
    Ok(form_of(&label(prepare(model)?, cfg)?))
}

/// Structural comparison; `NotProven` when the search cap or budget is hit and
/// cheaper invariants could not separate the models.
pub fn compare_models(a: &LinearModel, b: &LinearModel, cfg: &CanonConfig) -> Result<EmVerdict, CanonError> {
    let pa = prepare(a)?;
    let pb = prepare(b)?;
    if pa.norm.sense != pb.norm.sense
        || pa.norm.vars.len() != pb.norm.vars.len()
        || pa.norm.rows.len() != pb.norm.rows.len()
        || pa.norm.obj_const.to_bits() != pb.norm.obj_const.to_bits()
        || invariant(&pa.vc, &pa.rc) != invariant(&pb.vc, &pb.rc)
    {
        return Ok(EmVerdict::Mismatch);
    }
    let la = match label(pa, cfg) {
        Ok(l) => l,
        Err(CanonError::Ambiguity { .. } | CanonError::LeafBudget { .. }) => {
            return Ok(EmVerdict::NotProven)
        }
        Err(e) => return Err(e),
    };
    let lb = match label(pb, cfg) {
        Ok(l) => l,
        Err(CanonError::Ambiguity { .. } | CanonError::LeafBudget { .. }) => {
            return Ok(EmVerdict::NotProven)
        }
        Err(e) => return Err(e),
    };
    if la.cert != lb.cert {
        return Ok(EmVerdict::Mismatch);
    }
    let mapping = la
        .order
        .iter()
        .zip(&lb.order)
        .map(|(&x, &y)| (la.norm.names[x].clone(), lb.norm.names[y].clone()))
        .collect();
    Ok(EmVerdict::Match(mapping))
}

/// `(true, mapping)` when `a` maps onto `b`; errors when equivalence cannot be decided.
pub fn models_equivalent(a: &LinearModel, b: &LinearModel) -> Result<(bool, Option<VarMapping>), CanonError> {
    match compare_models(a, b, &CanonConfig::default())? {
        EmVerdict::Match(m) => Ok((true, Some(m))),
        EmVerdict::Mismatch => Ok((false, None)),
        EmVerdict::NotProven => {
            let p = prepare(a)?;
            Err(CanonError::Ambiguity {
                unresolved: unresolved(&p.graph, &p.vc),
                cap: CanonConfig::default().cap,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Constraint, LinearExpr, Variable};

    fn base() -> LinearModel {
        let mut m = LinearModel::new(ObjSense::Maximize);
        m.objective = LinearExpr::from_terms([(3.0, "x"), (2.0, "y"), (1.0, "z")]);
        for n in ["x", "y", "z"] {
            m.add_variable(Variable::integer(n).with_bounds(0.0, 10.0));
        }
        m.add_constraint(Constraint::new(
            "a",
            LinearExpr::from_terms([(1.0, "x"), (1.0, "y"), (1.0, "z")]),
            RowSense::Le,
            7.0,
        ));
        m.add_constraint(Constraint::new(
            "b",
            LinearExpr::from_terms([(2.0, "x"), (-1.0, "z")]),
            RowSense::Ge,
            1.0,
        ));
        m.add_constraint(Constraint::new(
            "c",
            LinearExpr::from_terms([(1.0, "y"), (-1.0, "z")]),
            RowSense::Eq,
            0.0,
        ));
        m
    }

    #[test]
    fn identity_match_maps_each_name_to_itself() {
        let m = base();
        let (eq, map) = models_equivalent(&m, &m).unwrap();
        assert!(eq);
        let map = map.unwrap();
        for v in ["x", "y", "z"] {
            assert_eq!(map[v], v);
        }
    }

    #[test]
    fn row_negation_and_sense_flip_is_invisible() {
        let m = base();
        let mut n = m.clone();
        for c in &mut n.constraints {
            for t in &mut c.expr.terms {
                t.0 = -t.0;
            }
            c.rhs = -c.rhs;
            c.sense = c.sense.flipped();
        }
        assert_eq!(canonicalize(&m).unwrap(), canonicalize(&n).unwrap());
    }

    #[test]
    fn constant_in_row_moves_to_rhs() {
        let m = base();
        let mut n = m.clone();
        n.constraints[0].expr.constant = 2.0;
        n.constraints[0].rhs = 9.0;
        assert!(models_equivalent(&m, &n).unwrap().0);
    }

    #[test]
    fn sense_and_kind_changes_are_detected() {
        let m = base();
        let mut n = m.clone();
        n.sense = ObjSense::Minimize;
        assert!(!models_equivalent(&m, &n).unwrap().0);
        let mut k = m.clone();
        k.variables[1].kind = VarKind::Continuous;
        assert!(!models_equivalent(&m, &k).unwrap().0);
    }

    #[test]
    fn tolerance_absorbs_last_bit_noise() {
        let m = base();
        let mut n = m.clone();
        n.objective.terms[0].0 = 3.0 * (1.0 + 1e-13);
        assert!(models_equivalent(&m, &n).unwrap().0);
        n.objective.terms[0].0 = 3.0 * (1.0 + 1e-6);
        assert!(!models_equivalent(&m, &n).unwrap().0);
    }

    #[test]
    fn symmetric_cycle_is_resolved_by_search() {
        // 6-cycle of pairwise rows: refinement alone cannot split any variable.
        let names = ["a", "b", "c", "d", "e", "f"];
        let mut m = LinearModel::new(ObjSense::Minimize);
        for n in names {
            m.add_variable(Variable::continuous(n));
        }
        m.objective = LinearExpr::from_terms(names.iter().map(|n| (1.0, *n)));
        for i in 0..6 {
            m.add_constraint(Constraint::new(
                format!("r{i}"),
                LinearExpr::from_terms([(1.0, names[i]), (2.0, names[(i + 1) % 6])]),
                RowSense::Ge,
                1.0,
            ));
        }
        let rot: HashMap<String, String> =
            (0..6).map(|i| (names[i].to_string(), names[(i + 2) % 6].to_string())).collect();
        let n = m.renamed(&rot);
        let v = compare_models(&m, &n, &CanonConfig::default()).unwrap();
        let EmVerdict::Match(map) = v else { panic!("expected match") };
        let mapped = m.renamed(&map.clone().into_iter().collect());
        assert_eq!(canonicalize(&mapped).unwrap(), canonicalize(&n).unwrap());
    }

    #[test]
    fn cap_exceeded_reports_not_proven() {
        // Transportation-like grid with identical data: no refinement progress.
        let mut m = LinearModel::new(ObjSense::Minimize);
        let n = 7;
        for i in 0..n {
            for j in 0..n {
                m.add_variable(Variable::continuous(format!("x_{i}_{j}")));
                m.objective.terms.push((1.0, format!("x_{i}_{j}")));
            }
        }
        for i in 0..n {
            m.add_constraint(Constraint::new(
                format!("r{i}"),
                LinearExpr::from_terms((0..n).map(|j| (1.0, format!("x_{i}_{j}")))),
                RowSense::Eq,
                1.0,
            ));
            m.add_constraint(Constraint::new(
                format!("c{i}"),
                LinearExpr::from_terms((0..n).map(|j| (1.0, format!("x_{j}_{i}")))),
                RowSense::Eq,
                1.0,
            ));
        }
        assert!(matches!(canonicalize(&m), Err(CanonError::Ambiguity { unresolved: 49, cap: 30 })));
        assert_eq!(compare_models(&m, &m, &CanonConfig::default()).unwrap(), EmVerdict::NotProven);
        // A structurally different model is still separated by refinement invariants.
        let mut other = m.clone();
        other.constraints[0].rhs = 2.0;
        assert_eq!(compare_models(&m, &other, &CanonConfig::default()).unwrap(), EmVerdict::Mismatch);
    }

    #[test]
    fn twins_are_collapsed() {
        let mut m = LinearModel::new(ObjSense::Maximize);
        let names: Vec<String> = (0..40).map(|i| format!("t{i}")).collect();
        for n in &names {
            m.add_variable(Variable::continuous(n.clone()));
        }
        m.objective = LinearExpr::from_terms(names.iter().map(|n| (1.0, n.clone())));
        m.add_constraint(Constraint::new(
            "sum",
            LinearExpr::from_terms(names.iter().map(|n| (1.0, n.clone()))),
            RowSense::Le,
            5.0,
        ));
        assert!(canonicalize(&m).is_ok());
    }

    #[test]
    fn invalid_model_is_an_error() {
        let mut m = base();
        m.objective.terms.push((1.0, "ghost".into()));
        assert!(matches!(canonicalize(&m), Err(CanonError::Invalid(_))));
    }
}
