//! Abstract Model Plan: parsing, column extraction and compilation into a model.

use super::format::parse_number;
use crate::model::{parse_model_grammar, GrammarError, LinearModel, ParamValue, Params, VarKind};
use crate::retrieval::{fuzzy_match, CsvTable};
use serde::{Deserialize, Serialize};
use std::fmt::Write;
use thiserror::Error;

pub const PLAN_START: &str = "------------Abstract Model Plan Start------------";
pub const PLAN_END: &str = "------------Abstract Model Plan End------------";

/// Step headers in order; a plan must contain all of them.
pub const PLAN_STEPS: [&str; 7] = [
    "Analyze Query",
    "Identify Model Type",
    "Define Index Sets",
    "Define Decision Variables",
    "Identify Parameters",
    "Formulate Objective",
    "Formulate Constraints",
];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("plan is missing step {0:?}")]
    MissingStep(&'static str),
    #[error("plan declares no decision variables")]
    NoVariables,
    #[error("plan objective has no formula")]
    NoObjective,
    #[error("cannot read parameter line {0:?}")]
    BadParameter(String),
    #[error("parameter `{symbol}`: no dataset named {file:?}")]
    UnknownFile { symbol: String, file: String },
    #[error("parameter `{symbol}`: {file} has no column {column:?}")]
    UnknownColumn { symbol: String, file: String, column: String },
    #[error("parameter `{symbol}`: {msg}")]
    Extract { symbol: String, msg: String },
    #[error("compiled plan does not parse: {0}")]
    Compile(#[from] GrammarError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanVariable {
    pub name: String,
    pub indices: Vec<String>,
    pub kind: VarKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Selection {
    Column(String),
    Columns { columns: Vec<String>, transpose: bool },
    AllNumeric { transpose: bool },
    Cell { column: String, row: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ParamSpec {
    Literal(f64),
    Read { file: String, select: Selection, filter: Option<RowFilter> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowFilter {
    pub column: String,
    pub fuzzy: bool,
    /// Keep the rows that do not match instead.
    #[serde(default)]
    pub negate: bool,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub steps: Vec<(String, String)>,
    pub variables: Vec<PlanVariable>,
    pub parameters: Vec<(String, ParamSpec)>,
    pub objective: String,
    pub maximize_hint: Option<bool>,
    pub constraints: Vec<(String, String)>,
}

fn step_header(line: &str) -> Option<(usize, &str)> {
    let t = line.trim().trim_start_matches(['#', '*', ' ']);
    let dot = t.find('.')?;
    let n: usize = t[..dot].trim().parse().ok()?;
    let rest = t[dot + 1..].trim_start().trim_start_matches('*');
    let name = PLAN_STEPS.get(n.checked_sub(1)?)?;
    rest.get(..name.len()).filter(|h| h.eq_ignore_ascii_case(name))?;
    let after = rest[name.len()..].trim_start_matches(['*', ' ', ':']).trim_start_matches('*');
    Some((n, after))
}

/// Text inside `$$...$$` or `$...$` on a line, with the outer delimiters removed.
fn math_segments(line: &str) -> Vec<String> {
    let l = line.replace("$$", "$");
    l.split('$').skip(1).step_by(2).map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()
}

fn bullet(line: &str) -> &str {
    line.trim().trim_start_matches(['-', '*', '•']).trim()
}

fn parse_variable(line: &str) -> Option<PlanVariable> {
    let b = bullet(line).replace('`', "");
    let b = b.trim_start_matches('$');
    let head: String = b.chars().take_while(|c| !c.is_whitespace() && *c != '=' && *c != ':' && *c != '$').collect();
    if head.is_empty() {
        return None;
    }
    let (name, indices) = if let Some(open) = head.find('[') {
        let inner = head[open + 1..].trim_end_matches(']');
        (head[..open].to_string(), inner.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect())
    } else if let Some((n, sub)) = head.split_once('_') {
        let sub = sub.trim_start_matches('{').trim_end_matches('}');
        let idx: Vec<String> = if sub.contains(',') {
            sub.split(',').map(|s| s.trim().to_string()).collect()
        } else {
            sub.chars().map(|c| c.to_string()).collect()
        };
        (n.to_string(), idx)
    } else {
        (head.clone(), Vec::new())
    };
    if name.is_empty() || !name.chars().all(|c| c.is_alphanumeric()) {
        return None;
    }
    Some(PlanVariable { name, indices, kind: parse_kind(b) })
}

fn parse_kind(text: &str) -> VarKind {
    let upper = text.to_uppercase();
    let type_part = upper.rsplit_once("TYPE").map_or(upper.as_str(), |(_, t)| t);
    if type_part.contains("BINARY") {
        VarKind::Binary
    } else if type_part.contains("INTEGER") {
        VarKind::Integer
    } else {
        VarKind::Continuous
    }
}

fn parse_selection(inside: &str, transpose: bool) -> Selection {
    let inside = inside.trim();
    if inside == "*" {
        return Selection::AllNumeric { transpose };
    }
    let cols: Vec<String> = inside.split(',').map(|s| s.trim().trim_matches(['\'', '"']).to_string()).collect();
    if cols.len() == 1 {
        Selection::Column(cols.into_iter().next().unwrap_or_default())
    } else {
        Selection::Columns { columns: cols, transpose }
    }
}

fn parse_parameter(line: &str) -> Result<Option<(String, ParamSpec)>, PlanError> {
    let b = bullet(line).replace('`', "");
    let Some((lhs, rhs)) = b.split_once('=') else { return Ok(None) };
    let sym = lhs.trim().trim_start_matches('\\');
    if sym.is_empty() || !sym.chars().all(|c| c.is_alphanumeric()) {
        return Ok(None);
    }
    let rhs = rhs.trim().trim_end_matches('.');
    if let Some(x) = parse_number(rhs) {
        return Ok(Some((sym.to_string(), ParamSpec::Literal(x))));
    }
    let bad = || PlanError::BadParameter(line.trim().to_string());
    let (expr, filter) = match rhs.find(" where ") {
        Some(p) => (&rhs[..p], Some(&rhs[p + 7..])),
        None => (rhs, None),
    };
    let open = expr.find('[').ok_or_else(bad)?;
    let file = expr[..open].trim().to_string();
    let close = open + expr[open..].find(']').ok_or_else(bad)?;
    let mut rest = expr[close + 1..].trim();
    let mut transpose = false;
    let mut cell_row = None;
    if let Some(r) = rest.strip_prefix('[') {
        let end = r.find(']').ok_or_else(bad)?;
        cell_row = Some(r[..end].trim().parse::<usize>().map_err(|_| bad())?);
        rest = r[end + 1..].trim();
    }
    if let Some(r) = rest.strip_prefix("^T") {
        transpose = true;
        rest = r.trim();
    }
    if !rest.is_empty() {
        return Err(bad());
    }
    let mut select = parse_selection(&expr[open + 1..close], transpose);
    if let Some(row) = cell_row {
        let Selection::Column(column) = select else { return Err(bad()) };
        select = Selection::Cell { column, row };
    }
    let filter = match filter {
        None => None,
        Some(f) => {
            let (column, fuzzy, negate, value) = if let Some((c, v)) = f.split_once("!=") {
                (c, false, true, v)
            } else if let Some((c, v)) = f.split_once('~') {
                (c, true, false, v)
            } else if let Some((c, v)) = f.split_once('=') {
                (c, false, false, v)
            } else {
                return Err(bad());
            };
            Some(RowFilter {
                column: column.trim().to_string(),
                fuzzy,
                negate,
                value: value.trim().trim_matches(['\'', '"']).to_string(),
            })
        }
    };
    Ok(Some((sym.to_string(), ParamSpec::Read { file, select, filter })))
}

/// Parses the seven-step plan. Text outside the start/end markers is ignored
/// when the markers are present.
pub fn parse_plan(text: &str) -> Result<Plan, PlanError> {
    let body = match (text.find(PLAN_START), text.rfind(PLAN_END)) {
        (Some(a), Some(b)) if b > a => &text[a + PLAN_START.len()..b],
        (Some(a), _) => &text[a + PLAN_START.len()..],
        _ => text,
    };
    let mut steps: Vec<(usize, Vec<String>)> = Vec::new();
    for line in body.lines() {
        if let Some((n, after)) = step_header(line) {
            steps.push((n, vec![after.to_string()]));
        } else if let Some(last) = steps.last_mut() {
            last.1.push(line.to_string());
        }
    }
    let step = |n: usize| steps.iter().find(|s| s.0 == n).map(|s| &s.1);
    for (i, name) in PLAN_STEPS.iter().enumerate() {
        if step(i + 1).is_none() {
            return Err(PlanError::MissingStep(name));
        }
    }
    let lines = |n: usize| step(n).cloned().unwrap_or_default();

    let mut variables: Vec<PlanVariable> = Vec::new();
    for l in lines(4).iter().map(|l| bullet(l)).filter(|l| !l.is_empty()) {
        // a "Type: ..." line on its own qualifies the variable above it
        if l.to_ascii_lowercase().starts_with("type") {
            if let Some(v) = variables.last_mut() {
                v.kind = parse_kind(l);
            }
            continue;
        }
        variables.extend(parse_variable(l));
    }
    if variables.is_empty() {
        return Err(PlanError::NoVariables);
    }
    let mut parameters = Vec::new();
    for l in lines(5) {
        if let Some(p) = parse_parameter(&l)? {
            parameters.push(p);
        }
    }
    let obj_lines = lines(6);
    let objective = obj_lines.iter().flat_map(|l| math_segments(l)).collect::<Vec<_>>().join(" ");
    if objective.is_empty() {
        return Err(PlanError::NoObjective);
    }
    let obj_words = obj_lines.join(" ").to_lowercase();
    let maximize_hint = if obj_words.contains("maximi") {
        Some(true)
    } else if obj_words.contains("minimi") {
        Some(false)
    } else {
        None
    };
    let mut constraints = Vec::new();
    let mut pending = String::new();
    for l in lines(7) {
        let segs = math_segments(&l);
        if segs.is_empty() {
            let b = bullet(&l).trim_matches(['*', ':', ' ']).to_string();
            if !b.is_empty() {
                pending = b;
            }
            continue;
        }
        let before = l.replace("$$", "$");
        let label = bullet(before.split('$').next().unwrap_or("")).trim_matches(['*', ':', ' ']).to_string();
        let label = if label.is_empty() { std::mem::take(&mut pending) } else { label };
        for s in segs {
            constraints.push((label.clone(), s));
        }
    }
    Ok(Plan {
        steps: steps.iter().map(|(n, l)| (PLAN_STEPS[n - 1].to_string(), l.join("\n").trim().to_string())).collect(),
        variables,
        parameters,
        objective,
        maximize_hint,
        constraints,
    })
}

fn find_table<'a>(tables: &'a [CsvTable], file: &str) -> Option<&'a CsvTable> {
    let want = file.trim().trim_matches(['\'', '"']).to_lowercase();
    let stem = |s: &str| s.rsplit_once('.').map_or(s.to_string(), |(a, _)| a.to_string());
    tables
        .iter()
        .find(|t| t.name.to_lowercase() == want)
        .or_else(|| tables.iter().find(|t| stem(&t.name.to_lowercase()) == stem(&want)))
}

fn transpose(m: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let cols = m.first().map_or(0, Vec::len);
    (0..cols).map(|j| m.iter().map(|r| r[j]).collect()).collect()
}

/// Reads the numbers a parameter line names; blank cells are skipped in
/// single-column reads so ragged columns yield shorter vectors.
pub fn extract_parameter(symbol: &str, spec: &ParamSpec, tables: &[CsvTable]) -> Result<ParamValue, PlanError> {
    let (file, select, filter) = match spec {
        ParamSpec::Literal(x) => return Ok(ParamValue::Scalar(*x)),
        ParamSpec::Read { file, select, filter } => (file, select, filter),
    };
    let t = find_table(tables, file).ok_or_else(|| PlanError::UnknownFile { symbol: symbol.into(), file: file.clone() })?;
    let col = |name: &str| {
        t.column(name).ok_or_else(|| PlanError::UnknownColumn {
            symbol: symbol.into(),
            file: t.name.clone(),
            column: name.to_string(),
        })
    };
    let rows: Vec<&Vec<String>> = match filter {
        None => t.rows.iter().collect(),
        Some(f) => {
            let c = col(&f.column)?;
            t.rows
                .iter()
                .filter(|r| {
                    let hit = if f.fuzzy {
                        fuzzy_match(&f.value, &r[c])
                    } else {
                        r[c].trim().eq_ignore_ascii_case(f.value.trim())
                    };
                    hit != f.negate
                })
                .collect()
        }
    };
    let num = |r: &Vec<String>, c: usize| {
        parse_number(&r[c]).ok_or_else(|| PlanError::Extract {
            symbol: symbol.into(),
            msg: format!("{}: cell {:?} in column {:?} is not a number", t.name, r[c], t.headers[c]),
        })
    };
    let matrix = |cols: &[usize], tr: bool| -> Result<ParamValue, PlanError> {
        let m = rows.iter().map(|r| cols.iter().map(|&c| num(r, c)).collect::<Result<Vec<_>, _>>()).collect::<Result<Vec<_>, _>>()?;
        Ok(ParamValue::Matrix(if tr { transpose(m) } else { m }))
    };
    match select {
        Selection::Column(name) => {
            let c = col(name)?;
            let v = rows.iter().filter(|r| !r[c].trim().is_empty()).map(|r| num(r, c)).collect::<Result<Vec<_>, _>>()?;
            Ok(ParamValue::Vector(v))
        }
        Selection::Cell { column, row } => {
            let c = col(column)?;
            let r = row
                .checked_sub(1)
                .and_then(|k| rows.get(k))
                .ok_or_else(|| PlanError::Extract { symbol: symbol.into(), msg: format!("row {row} out of range") })?;
            Ok(ParamValue::Scalar(num(r, c)?))
        }
        Selection::Columns { columns, transpose } => {
            let cols = columns.iter().map(|c| col(c)).collect::<Result<Vec<_>, _>>()?;
            matrix(&cols, *transpose)
        }
        Selection::AllNumeric { transpose } => {
            let cols = super::format::numeric_columns(t);
            if cols.is_empty() {
                return Err(PlanError::Extract { symbol: symbol.into(), msg: format!("{} has no numeric column", t.name) });
            }
            matrix(&cols, *transpose)
        }
    }
}

fn domain_line(v: &PlanVariable) -> String {
    let sub = if v.indices.is_empty() { String::new() } else { format!("_{{{}}}", v.indices.join(",")) };
    let q = if v.indices.is_empty() { String::new() } else { format!(", \\quad \\forall {}", v.indices.join(", ")) };
    let dom = match v.kind {
        VarKind::Continuous => "\\geq 0",
        VarKind::Integer => "\\in \\mathbb{Z}_+",
        VarKind::Binary => "\\in \\{0, 1\\}",
    };
    format!("${}{sub} {dom}{q}$", v.name)
}

/// Output of [`compile_plan`]: the bound parameters and the equivalent model text.
#[derive(Debug, Clone)]
pub struct CompiledPlan {
    pub params: Params,
    pub model_text: String,
    pub model: LinearModel,
}

/// Extracts every parameter from the datasets, writes the plan as model text
/// and parses it against those parameters.
pub fn compile_plan(plan: &Plan, tables: &[CsvTable]) -> Result<CompiledPlan, PlanError> {
    let mut params = Params::new();
    for (sym, spec) in &plan.parameters {
        params.insert(sym.clone(), extract_parameter(sym, spec, tables)?);
    }
    let mut text = String::new();
    let header = match plan.maximize_hint {
        Some(true) => "Objective Function (maximize):",
        Some(false) => "Objective Function (minimize):",
        None => "Objective Function:",
    };
    let _ = writeln!(text, "{header}\n$${}$$\n\nConstraints:", plan.objective);
    let mut k = 0;
    for (label, math) in &plan.constraints {
        k += 1;
        let label = if label.is_empty() { format!("Constraint {k}") } else { label.clone() };
        let _ = writeln!(text, "{k}. {label}\n$${math}$$");
    }
    let _ = writeln!(text, "{}. Variable Domains", k + 1);
    for v in &plan.variables {
        let _ = writeln!(text, "{}", domain_line(v));
    }
    text.push_str("\nRetrieved Information:\n");
    for (sym, v) in &params {
        let _ = writeln!(text, "${sym} = {}$", serde_json::to_string(v).unwrap_or_default());
    }
    let model = parse_model_grammar(&text, &Params::new())?;
    Ok(CompiledPlan { params, model_text: text, model })
}
