use super::{wmape, wmape_applies, EmOutcome, RunResult};
use crate::refdata::ProblemType;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

pub const TOLERANCE_RULE: &str = "|v - label| <= max(1e-6, 1e-4*|label|)";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Accuracy {
    pub instances: usize,
    pub runs: usize,
    pub value: f64,
    pub em: f64,
    pub em_not_proven: f64,
    pub failures: usize,
}

impl Accuracy {
    fn of(runs: &[&RunResult]) -> Self {
        let frac = |hit: &dyn Fn(&RunResult) -> bool| {
            if runs.is_empty() {
                0.0
            } else {
                runs.iter().filter(|r| hit(r)).count() as f64 / runs.len() as f64
            }
        };
        Accuracy {
            instances: runs.iter().map(|r| &r.id).collect::<BTreeSet<_>>().len(),
            runs: runs.len(),
            value: frac(&|r| r.value_ok),
            em: frac(&|r| r.em == EmOutcome::Match),
            em_not_proven: frac(&|r| r.em == EmOutcome::NotProven),
            failures: runs.iter().filter(|r| r.failed()).count(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketRow {
    pub bucket: String,
    pub lo: f64,
    /// `None` for the open last bucket.
    pub hi: Option<f64>,
    #[serde(flatten)]
    pub accuracy: Accuracy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WmapeRow {
    pub variables: usize,
    pub instances: usize,
    pub runs: usize,
    pub wmape: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRow {
    pub id: String,
    pub repetition: usize,
    pub message: String,
}

/// Aggregates over a set of runs. Wall times are left out so reports from
/// scripted runs are byte-identical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub repetitions: usize,
    pub instances: usize,
    pub tolerance: String,
    pub overall: Accuracy,
    pub by_type: BTreeMap<ProblemType, Accuracy>,
    pub by_tokens: Vec<BucketRow>,
    pub by_variables: Vec<BucketRow>,
    pub wmape_by_variables: Vec<WmapeRow>,
    pub wmape_overall: Option<f64>,
    pub failures: Vec<FailureRow>,
    /// Runs graded as structural matches without a value match.
    pub em_without_value: Vec<String>,
}

fn bucket_label(lo: f64, hi: Option<f64>) -> String {
    match hi {
        Some(h) => format!("[{lo},{h})"),
        None => format!("[{lo},inf)"),
    }
}

fn buckets(runs: &[RunResult], edges: &[f64], key: impl Fn(&RunResult) -> usize) -> Vec<BucketRow> {
    let mut lows = vec![0.0];
    lows.extend_from_slice(edges);
    lows.iter()
        .enumerate()
        .map(|(i, &lo)| {
            let hi = edges.get(i).copied();
            let members: Vec<&RunResult> = runs
                .iter()
                .filter(|r| {
                    let k = key(r) as f64;
                    k >= lo && hi.is_none_or(|h| k < h)
                })
                .collect();
            BucketRow { bucket: bucket_label(lo, hi), lo, hi, accuracy: Accuracy::of(&members) }
        })
        .collect()
}

fn wmape_of(runs: &[&RunResult]) -> Option<f64> {
    let opt: Vec<f64> = runs.iter().map(|r| r.label).collect();
    let rev: Vec<f64> = runs.iter().map(|r| r.revenue).collect();
    wmape(&opt, &rev).ok()
}

impl Report {
    /// Pure function of the runs; every figure can be recomputed from them.
    pub fn from_runs(runs: &[RunResult], repetitions: usize, token_edges: &[f64], variable_edges: &[f64]) -> Report {
        let all: Vec<&RunResult> = runs.iter().collect();
        let mut by_type: BTreeMap<ProblemType, Vec<&RunResult>> = BTreeMap::new();
        for r in runs {
            by_type.entry(r.ptype).or_default().push(r);
        }
        let revenue_runs: Vec<&RunResult> = runs.iter().filter(|r| wmape_applies(r)).collect();
        let mut by_size: BTreeMap<usize, Vec<&RunResult>> = BTreeMap::new();
        for r in &revenue_runs {
            by_size.entry(r.label_variables).or_default().push(r);
        }
        let wmape_by_variables = by_size
            .into_iter()
            .filter_map(|(variables, rs)| {
                let wmape = wmape_of(&rs)?;
                let instances = rs.iter().map(|r| &r.id).collect::<BTreeSet<_>>().len();
                Some(WmapeRow { variables, instances, runs: rs.len(), wmape })
            })
            .collect();
        Report {
            repetitions,
            instances: all.iter().map(|r| &r.id).collect::<BTreeSet<_>>().len(),
            tolerance: TOLERANCE_RULE.into(),
            overall: Accuracy::of(&all),
            by_type: by_type.into_iter().map(|(t, rs)| (t, Accuracy::of(&rs))).collect(),
            by_tokens: buckets(runs, token_edges, |r| r.approx_tokens),
            by_variables: buckets(runs, variable_edges, |r| r.label_variables),
            wmape_by_variables,
            wmape_overall: wmape_of(&revenue_runs),
            failures: runs
                .iter()
                .filter_map(|r| {
                    r.failure.as_ref().map(|m| FailureRow { id: r.id.clone(), repetition: r.repetition, message: m.clone() })
                })
                .collect(),
            em_without_value: runs
                .iter()
                .filter(|r| r.em == EmOutcome::Match && !r.value_ok)
                .map(|r| format!("{}#{}", r.id, r.repetition))
                .collect(),
        }
    }
}

fn pct(x: f64) -> String {
    format!("{:.1}%", 100.0 * x)
}

fn table(out: &mut String, head: &[String], rows: &[Vec<String>]) {
    let mut width: Vec<usize> = head.iter().map(|h| h.len()).collect();
    for row in rows {
        for (w, c) in width.iter_mut().zip(row) {
            *w = (*w).max(c.len());
        }
    }
    let line = |cells: &[String]| {
        cells
            .iter()
            .zip(&width)
            .enumerate()
            .map(|(i, (c, w))| if i == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
            .collect::<Vec<_>>()
            .join("  ")
    };
    let _ = writeln!(out, "{}", line(head));
    let _ = writeln!(out, "{}", width.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("  "));
    for row in rows {
        let _ = writeln!(out, "{}", line(row));
    }
}

fn bucket_table(out: &mut String, title: &str, rows: &[BucketRow]) {
    let _ = writeln!(out, "\n{title}");
    let head = ["bucket", "instances", "runs", "value", "em"].map(String::from);
    let rows: Vec<Vec<String>> = rows
        .iter()
        .map(|b| {
            vec![
                b.bucket.clone(),
                b.accuracy.instances.to_string(),
                b.accuracy.runs.to_string(),
                if b.accuracy.runs == 0 { "-".into() } else { pct(b.accuracy.value) },
                if b.accuracy.runs == 0 { "-".into() } else { pct(b.accuracy.em) },
            ]
        })
        .collect();
    table(out, &head, &rows);
}

/// Plain-text rendering: accuracy by type (types as columns), then the size
/// breakdowns, WMAPE and failure rows.
pub fn render_table(r: &Report) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{} instances x {} repetitions; value match: {}",
        r.instances, r.repetitions, r.tolerance
    );
    let _ = writeln!(out, "\nModeling accuracy by problem type");
    let mut head = vec![String::new()];
    head.extend(r.by_type.keys().map(|t| t.code().to_string()));
    head.push("Overall".into());
    let cols: Vec<&Accuracy> = r.by_type.values().chain(std::iter::once(&r.overall)).collect();
    let row = |name: &str, f: &dyn Fn(&Accuracy) -> String| {
        let mut v = vec![name.to_string()];
        v.extend(cols.iter().map(|a| f(a)));
        v
    };
    let rows = vec![
        row("instances", &|a| a.instances.to_string()),
        row("value", &|a| pct(a.value)),
        row("em", &|a| pct(a.em)),
        row("em not proven", &|a| pct(a.em_not_proven)),
        row("failures", &|a| a.failures.to_string()),
    ];
    table(&mut out, &head, &rows);
    bucket_table(&mut out, "By input size (approx tokens)", &r.by_tokens);
    bucket_table(&mut out, "By label variable count", &r.by_variables);
    if !r.wmape_by_variables.is_empty() {
        let _ = writeln!(out, "\nWMAPE by variable count");
        let head = ["variables", "instances", "runs", "wmape"].map(String::from);
        let rows: Vec<Vec<String>> = r
            .wmape_by_variables
            .iter()
            .map(|w| vec![w.variables.to_string(), w.instances.to_string(), w.runs.to_string(), pct(w.wmape)])
            .collect();
        table(&mut out, &head, &rows);
        if let Some(w) = r.wmape_overall {
            let _ = writeln!(out, "overall {}", pct(w));
        }
    }
    if !r.failures.is_empty() {
        let _ = writeln!(out, "\nFailures");
        for f in &r.failures {
            let _ = writeln!(out, "  {}#{}: {}", f.id, f.repetition, f.message);
        }
    }
    if !r.em_without_value.is_empty() {
        let _ = writeln!(out, "\nStructural match without value match (check solver or comparison): {}", r.em_without_value.join(", "));
    }
    out
}
