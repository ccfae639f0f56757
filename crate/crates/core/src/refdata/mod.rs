//! Reference dataset and benchmark instance stores.
//!
//! Layout: a `manifest.json` next to one directory per entry. Reference
//! entries hold `query.txt`, `category.txt`, `data.txt`, `label.txt` and any
//! CSVs; benchmark instances hold a query, their CSVs and `label.txt` or
//! `label.lp`.

mod ptype;

pub use ptype::{ProblemType, UnknownProblemType};

use crate::model::{parse_model_grammar, read_lp, GrammarError, LinearModel, LpError, ObjSense, Params};
use crate::solver::{solve_milp, SolverError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};
use thiserror::Error;

/// Type distribution of the original 96-entry reference set, kept as the
/// authoring target for new entries.
pub const REFERENCE_PROFILE: [(ProblemType, usize); 8] = [
    (ProblemType::Ra, 24),
    (ProblemType::Mixture, 24),
    (ProblemType::Others, 16),
    (ProblemType::Flp, 9),
    (ProblemType::Ap, 8),
    (ProblemType::Tp, 7),
    (ProblemType::Nrm, 5),
    (ProblemType::Sblp, 3),
];

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("manifest {path}: {msg}")]
    Manifest { path: PathBuf, msg: String },
    #[error("entry `{id}`: {msg}")]
    Entry { id: String, msg: String },
    #[error("duplicate id `{0}`")]
    DuplicateId(String),
    #[error("instance `{id}` references missing file {path}")]
    DanglingPath { id: String, path: PathBuf },
    #[error("manifest declares {declared} entries of type {ptype} but {found} were loaded")]
    CountMismatch { ptype: ProblemType, declared: usize, found: usize },
    #[error("label of `{id}`: {source}")]
    Grammar { id: String, source: GrammarError },
    #[error("label of `{id}`: {source}")]
    Lp { id: String, source: LpError },
}

fn read(path: &Path) -> Result<String, StoreError> {
    std::fs::read_to_string(path).map_err(|source| StoreError::Io { path: path.to_path_buf(), source })
}

fn read_manifest<T: for<'de> Deserialize<'de>>(dir: &Path) -> Result<T, StoreError> {
    let path = dir.join("manifest.json");
    let text = read(&path)?;
    serde_json::from_str(&text).map_err(|e| StoreError::Manifest { path, msg: e.to_string() })
}

/// One reference problem: query, type, data category, relevant data, label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefEntry {
    pub id: String,
    pub q: String,
    pub t: ProblemType,
    pub g: String,
    pub f: String,
    pub m: String,
    #[serde(default)]
    pub datasets: Vec<PathBuf>,
}

#[derive(Debug, Deserialize)]
struct RefManifest {
    #[serde(default)]
    type_counts: Option<BTreeMap<ProblemType, usize>>,
    entries: Vec<RefManifestEntry>,
}

#[derive(Debug, Deserialize)]
struct RefManifestEntry {
    id: String,
    #[serde(rename = "type")]
    ptype: ProblemType,
    #[serde(default)]
    dir: Option<String>,
}

#[derive(Debug, Clone, Default)]
pub struct RefStore {
    pub entries: Vec<RefEntry>,
}

impl RefStore {
    pub fn counts(&self) -> BTreeMap<ProblemType, usize> {
        let mut c = BTreeMap::new();
        for e in &self.entries {
            *c.entry(e.t).or_insert(0) += 1;
        }
        c
    }

    pub fn get(&self, id: &str) -> Option<&RefEntry> {
        self.entries.iter().find(|e| e.id == id)
    }

    pub fn of_type(&self, t: ProblemType) -> impl Iterator<Item = &RefEntry> {
        self.entries.iter().filter(move |e| e.t == t)
    }

    /// Parses every label that carries its own data.
    pub fn check_labels(&self) -> Result<(), StoreError> {
        for e in &self.entries {
            if e.m.contains("Retrieved Information") || e.m.contains("Retrieved Data") {
                parse_model_grammar(&e.m, &Params::new())
                    .map_err(|source| StoreError::Grammar { id: e.id.clone(), source })?;
            }
        }
        Ok(())
    }
}

pub fn load_refdata(dir: impl AsRef<Path>) -> Result<RefStore, StoreError> {
    let dir = dir.as_ref();
    let manifest: RefManifest = read_manifest(dir)?;
    let mut seen = HashSet::new();
    let mut entries = Vec::with_capacity(manifest.entries.len());
    for m in &manifest.entries {
        if !seen.insert(m.id.clone()) {
            return Err(StoreError::DuplicateId(m.id.clone()));
        }
        let edir = dir.join(m.dir.as_deref().unwrap_or(&m.id));
        let part = |name: &str| {
            let p = edir.join(name);
            std::fs::read_to_string(&p)
                .map(|s| s.trim_end().to_string())
                .map_err(|e| StoreError::Entry { id: m.id.clone(), msg: format!("{}: {e}", p.display()) })
        };
        let mut datasets: Vec<PathBuf> = std::fs::read_dir(&edir)
            .map_err(|e| StoreError::Entry { id: m.id.clone(), msg: format!("{}: {e}", edir.display()) })?
            .filter_map(|d| d.ok().map(|d| d.path()))
            .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("csv")))
            .collect();
        datasets.sort();
        entries.push(RefEntry {
            id: m.id.clone(),
            q: part("query.txt")?,
            t: m.ptype,
            g: part("category.txt")?,
            f: part("data.txt")?,
            m: part("label.txt")?,
            datasets,
        });
    }
    let store = RefStore { entries };
    if let Some(declared) = manifest.type_counts {
        let found = store.counts();
        for t in ProblemType::ALL {
            let (d, f) = (declared.get(&t).copied().unwrap_or(0), found.get(&t).copied().unwrap_or(0));
            if d != f {
                return Err(StoreError::CountMismatch { ptype: t, declared: d, found: f });
            }
        }
    }
    Ok(store)
}

/// Where a benchmark label lives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "format", content = "path", rename_all = "snake_case")]
pub enum LabelSource {
    Grammar(PathBuf),
    Lp(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeInfo {
    pub variables: usize,
    pub approx_tokens: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkInstance {
    pub id: String,
    /// Directory holding the instance files.
    pub dir: PathBuf,
    pub query: String,
    pub datasets: Vec<PathBuf>,
    pub label: LabelSource,
    pub label_optimal: f64,
    pub ptype: ProblemType,
    pub size: SizeInfo,
}

/// Character count ÷ 4, rounded up.
pub fn approx_tokens(text: &str) -> usize {
    text.chars().count().div_ceil(4)
}

impl BenchmarkInstance {
    pub fn label_model(&self) -> Result<LinearModel, StoreError> {
        match &self.label {
            LabelSource::Grammar(p) => parse_model_grammar(&read(p)?, &Params::new())
                .map_err(|source| StoreError::Grammar { id: self.id.clone(), source }),
            LabelSource::Lp(p) => read_lp(&read(p)?).map_err(|source| StoreError::Lp { id: self.id.clone(), source }),
        }
    }
}

#[derive(Debug, Deserialize)]
struct BenchManifest {
    instances: Vec<BenchManifestEntry>,
}

#[derive(Debug, Deserialize)]
struct BenchManifestEntry {
    id: String,
    #[serde(rename = "type")]
    ptype: ProblemType,
    #[serde(default)]
    dir: Option<String>,
    #[serde(default = "default_query")]
    query: String,
    #[serde(default)]
    datasets: Vec<String>,
    label: String,
    label_optimal: f64,
}

fn default_query() -> String {
    "query.txt".into()
}

pub fn load_benchmark(dir: impl AsRef<Path>) -> Result<Vec<BenchmarkInstance>, StoreError> {
    let dir = dir.as_ref();
    let manifest: BenchManifest = read_manifest(dir)?;
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for m in manifest.instances {
        if !seen.insert(m.id.clone()) {
            return Err(StoreError::DuplicateId(m.id));
        }
        let idir = dir.join(m.dir.as_deref().unwrap_or(&m.id));
        let resolve = |rel: &str| {
            let p = idir.join(rel);
            if p.is_file() {
                Ok(p)
            } else {
                Err(StoreError::DanglingPath { id: m.id.clone(), path: p })
            }
        };
        let query = read(&resolve(&m.query)?)?.trim_end().to_string();
        let datasets = m.datasets.iter().map(|d| resolve(d)).collect::<Result<Vec<_>, _>>()?;
        let lp = resolve(&m.label)?;
        let label = if lp.extension().is_some_and(|x| x.eq_ignore_ascii_case("lp")) {
            LabelSource::Lp(lp)
        } else {
            LabelSource::Grammar(lp)
        };
        let mut inst = BenchmarkInstance {
            size: SizeInfo { variables: 0, approx_tokens: approx_tokens(&query) },
            id: m.id,
            dir: idir.clone(),
            query,
            datasets,
            label,
            label_optimal: m.label_optimal,
            ptype: m.ptype,
        };
        inst.size.variables = inst.label_model()?.variables.len();
        out.push(inst);
    }
    Ok(out)
}

/// Grading tolerance shared with the harness.
pub fn values_match(value: f64, label: f64) -> bool {
    (value - label).abs() <= 1e-6_f64.max(1e-4 * label.abs())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceReport {
    pub id: String,
    pub label_optimal: f64,
    pub solved: Option<f64>,
    pub value_ok: bool,
    pub multiple_optima_suspected: bool,
    pub notes: Vec<String>,
}

const PERTURBATIONS: usize = 6;

/// Solves the label, compares with the recorded optimum, and probes for
/// alternative optimal points by re-solving under small random objective
/// perturbations.
pub fn validate_instance(inst: &BenchmarkInstance) -> Result<InstanceReport, StoreError> {
    let model = inst.label_model()?;
    let mut report = InstanceReport {
        id: inst.id.clone(),
        label_optimal: inst.label_optimal,
        solved: None,
        value_ok: false,
        multiple_optima_suspected: false,
        notes: Vec::new(),
    };
    let sol = solve_milp(&model).map_err(|e| StoreError::Entry { id: inst.id.clone(), msg: e.to_string() })?;
    if !sol.has_point() {
        report.notes.push(format!("label model status {:?}", sol.status));
        return Ok(report);
    }
    report.solved = Some(sol.objective);
    report.value_ok = values_match(sol.objective, inst.label_optimal);
    if !report.value_ok {
        report.notes.push(format!("solved {} but label says {}", sol.objective, inst.label_optimal));
    }
    match distinct_optima(&model, sol.objective) {
        Ok(found) => report.multiple_optima_suspected = found,
        Err(e) => report.notes.push(format!("uniqueness probe skipped: {e}")),
    }
    Ok(report)
}

fn distinct_optima(model: &LinearModel, best: f64) -> Result<bool, SolverError> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let scale = model.objective.terms.iter().fold(0.0f64, |m, t| m.max(t.0.abs())).max(1.0);
    let eps = 1e-6 * scale;
    let mut points: Vec<BTreeMap<String, f64>> = Vec::new();
    for _ in 0..PERTURBATIONS {
        let mut p = model.clone();
        for v in &p.variables {
            p.objective.terms.push((eps * rng.random_range(-1.0..1.0), v.name.clone()));
        }
        let s = solve_milp(&p)?;
        if !s.has_point() {
            continue;
        }
        let val = model.objective.evaluate(&s.values);
        let tol = 1e-6_f64.max(1e-6 * best.abs());
        let optimal = match model.sense {
            ObjSense::Maximize => val >= best - tol,
            ObjSense::Minimize => val <= best + tol,
        };
        if !optimal {
            continue;
        }
        if points.iter().any(|q| q.iter().any(|(k, v)| (v - s.values[k]).abs() > 1e-6)) {
            return Ok(true);
        }
        points.push(s.values);
    }
    Ok(false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Constraint, LinearExpr, RowSense, Variable};

    #[test]
    fn profile_totals_96() {
        assert_eq!(REFERENCE_PROFILE.iter().map(|p| p.1).sum::<usize>(), 96);
    }

    #[test]
    fn tolerance_rule() {
        assert!(values_match(100.000009, 100.0));
        assert!(!values_match(100.02, 100.0));
        assert!(values_match(0.0000005, 0.0));
    }

    #[test]
    fn symmetric_model_has_two_optima() {
        let mut m = LinearModel::new(ObjSense::Maximize);
        m.add_variable(Variable::continuous("x"));
        m.add_variable(Variable::continuous("y"));
        m.objective = LinearExpr::from_terms([(1.0, "x"), (1.0, "y")]);
        m.add_constraint(Constraint::new("c", LinearExpr::from_terms([(1.0, "x"), (1.0, "y")]), RowSense::Le, 1.0));
        assert!(distinct_optima(&m, 1.0).unwrap());
        m.objective = LinearExpr::from_terms([(2.0, "x"), (1.0, "y")]);
        assert!(!distinct_optima(&m, 2.0).unwrap());
    }
}
