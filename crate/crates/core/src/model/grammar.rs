//! Structured model text: `Objective Function:` / `Constraints:` /
//! `Retrieved Information:` sections with LaTeX-style statements bound to
//! positional data arrays.

use super::expr::{self, infer_sizes, nonneg_target, parse_objective, parse_statement, symbol_bases, Builder, Statement};
use super::{validate, Defect, ExprError, LinearModel, ObjSense, ParamValue, Params};
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GrammarError {
    #[error("section `{0}` is missing")]
    MissingSection(&'static str),
    #[error("objective has no max/min direction")]
    MissingSense,
    #[error("in {section} line `{line}`: {source}")]
    Expr {
        section: &'static str,
        line: String,
        #[source]
        source: ExprError,
    },
    #[error("cannot read retrieved data `{line}`: {msg}")]
    Retrieved { line: String, msg: String },
    #[error("resulting model is invalid: {}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Defect>),
}

impl GrammarError {
    /// The underlying expression error, if any.
    pub fn expr_error(&self) -> Option<&ExprError> {
        match self {
            GrammarError::Expr { source, .. } => Some(source),
            _ => None,
        }
    }
}

/// Raw section bodies; `None` when a header was never seen.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Sections {
    pub objective_header: String,
    pub objective: Option<Vec<String>>,
    pub constraints: Option<Vec<String>>,
    pub retrieved: Option<Vec<String>>,
}

#[derive(Clone, Copy, PartialEq)]
enum Which {
    Preamble,
    Objective,
    Constraints,
    Retrieved,
}

fn unwrap_command(line: &str, cmd: &str) -> String {
    let mut s = line.to_string();
    while let Some(p) = s.find(cmd) {
        let after = p + cmd.len();
        let Some(open) = s[after..].find('{').map(|o| after + o) else { break };
        if s[after..open].trim() != "" {
            break;
        }
        let mut depth = 0;
        let mut close = None;
        for (k, c) in s[open..].char_indices() {
            match c {
                '{' => depth += 1,
                '}' => {
                    depth -= 1;
                    if depth == 0 {
                        close = Some(open + k);
                        break;
                    }
                }
                _ => {}
            }
        }
        let Some(close) = close else { break };
        s = format!("{}{}{}", &s[..p], &s[open + 1..close], &s[close + 1..]);
    }
    s
}

/// Strip presentation markup, leaving words and math.
fn clean_line(line: &str) -> String {
    let mut s = unwrap_command(line, "\\textbf");
    s = unwrap_command(&s, "\\textit");
    s = unwrap_command(&s, "\\emph");
    for junk in ["\\small", "\\item", "\\noindent", "**", "\\\\", "\\[", "\\]"] {
        s = s.replace(junk, " ");
    }
    if let Some(p) = s.find("%%") {
        s.truncate(p);
    }
    let mut out = String::new();
    let mut rest = s.as_str();
    // drop \begin{..} / \end{..} markers
    while let Some(p) = rest.find("\\begin{").or_else(|| rest.find("\\end{")) {
        out.push_str(&rest[..p]);
        let tail = &rest[p..];
        match tail.find('}') {
            Some(c) => rest = &tail[c + 1..],
            None => {
                rest = "";
            }
        }
    }
    out.push_str(rest);
    let t = out.trim().trim_start_matches(['#', '-', '*', ' ']).trim();
    t.to_string()
}

fn header_of(clean: &str) -> Option<(Which, String, String)> {
    let headers: [(&str, Which); 5] = [
        ("Objective Function", Which::Objective),
        ("Constraints", Which::Constraints),
        ("Subject to", Which::Constraints),
        ("Retrieved Information", Which::Retrieved),
        ("Retrieved Data", Which::Retrieved),
    ];
    for (h, w) in headers {
        if let Some(rest) = clean.strip_prefix(h) {
            let rest = rest.trim_start();
            // optional parenthetical, then optional colon
            let (paren, rest) = if rest.starts_with('(') {
                match rest.find(')') {
                    Some(c) => (rest[1..c].to_string(), rest[c + 1..].trim_start()),
                    None => (String::new(), rest),
                }
            } else {
                (String::new(), rest)
            };
            let had_colon = rest.starts_with(':');
            let rest = rest.strip_prefix(':').unwrap_or(rest).trim();
            if rest.is_empty() || had_colon {
                return Some((w, paren, rest.to_string()));
            }
        }
    }
    None
}

/// Split model text into its three sections.
pub fn split_sections(text: &str) -> Sections {
    let mut s = Sections::default();
    let mut cur = Which::Preamble;
    for raw in text.lines() {
        let clean = clean_line(raw);
        if let Some((w, paren, rest)) = header_of(&clean) {
            cur = w;
            let body = match w {
                Which::Objective => {
                    s.objective_header = paren;
                    &mut s.objective
                }
                Which::Constraints => &mut s.constraints,
                Which::Retrieved => &mut s.retrieved,
                Which::Preamble => unreachable!(),
            };
            let v = body.get_or_insert_with(Vec::new);
            if !rest.is_empty() {
                v.push(rest);
            }
            continue;
        }
        let body = match cur {
            Which::Preamble => continue,
            Which::Objective => &mut s.objective,
            Which::Constraints => &mut s.constraints,
            Which::Retrieved => &mut s.retrieved,
        };
        if !clean.is_empty() {
            body.get_or_insert_with(Vec::new).push(clean);
        }
    }
    s
}

fn math_of(line: &str) -> String {
    if line.contains('$') {
        line.replace("$$", "$").split('$').enumerate().filter(|(k, _)| k % 2 == 1).map(|(_, s)| s).collect::<Vec<_>>().join(" ")
    } else {
        line.to_string()
    }
}

fn has_relation(m: &str) -> bool {
    ["\\leq", "\\geq", "\\le ", "\\ge ", "\\le{", "\\ge{", "<", ">", "=", "≤", "≥", "\\in", "∈"]
        .iter()
        .any(|r| m.contains(r))
        || m.ends_with("\\le")
        || m.ends_with("\\ge")
}

/// `1. Inventory Constraints:` → `inventory_constraints`.
fn group_name(label: &str) -> String {
    let words: String = label
        .trim_start_matches(|c: char| c.is_ascii_digit() || c == '.' || c == ' ' || c == ')')
        .chars()
        .take_while(|c| *c != '(' && *c != ':')
        .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '_' })
        .collect();
    let collapsed: Vec<&str> = words.split('_').filter(|w| !w.is_empty()).collect();
    if collapsed.is_empty() {
        "c".into()
    } else {
        collapsed.join("_")
    }
}

fn strip_label(line: &str) -> (Option<String>, String) {
    if line.contains('$') {
        let label = line.split('$').next().unwrap_or("").trim();
        let label = (!label.is_empty()).then(|| label.to_string());
        return (label, math_of(line));
    }
    if let Some(p) = line.find(':') {
        let (head, tail) = line.split_at(p);
        if !has_relation(head) && head.chars().any(|c| c.is_alphabetic()) && !head.contains('\\') {
            return (Some(head.to_string()), tail[1..].to_string());
        }
    }
    (None, line.to_string())
}

fn parse_retrieved(lines: &[String]) -> Result<Params, GrammarError> {
    let mut out = Params::new();
    let mut pending: Option<String> = None;
    let mut depth = 0i32;
    let mut finished: Vec<String> = Vec::new();
    for raw in lines {
        let m = raw.replace('$', " ").replace("\\quad", " ").replace("\\small", " ").replace('&', " ");
        let m = m.trim().to_string();
        match pending.as_mut() {
            Some(p) => {
                p.push(' ');
                p.push_str(&m);
            }
            None => {
                if !m.contains('=') {
                    continue;
                }
                pending = Some(m.clone());
                depth = 0;
            }
        }
        depth += m.matches('[').count() as i32 - m.matches(']').count() as i32;
        if depth <= 0 {
            finished.push(pending.take().unwrap());
        }
    }
    if let Some(p) = pending {
        return Err(GrammarError::Retrieved { line: p, msg: "unbalanced brackets".into() });
    }
    for line in finished {
        let line = line.trim().trim_end_matches(['.', ',', ';']).to_string();
        let Some((name, value)) = line.split_once('=') else { continue };
        let name = name.trim().trim_start_matches('\\');
        let name = name.split('_').next().unwrap_or(name).trim();
        if name.is_empty() || !name.chars().all(|c| c.is_alphanumeric()) {
            continue;
        }
        let value = value.trim().replace("\\,", "").replace("\\!", "");
        if value.starts_with("\\in") || value.starts_with("\\{") {
            continue;
        }
        let json: serde_json::Value = match serde_json::from_str(&value) {
            Ok(v) => v,
            Err(e) => {
                if value.starts_with('[') || value.parse::<f64>().is_ok() {
                    return Err(GrammarError::Retrieved { line: line.clone(), msg: e.to_string() });
                }
                continue;
            }
        };
        let pv: ParamValue = serde_json::from_value(json)
            .map_err(|e| GrammarError::Retrieved { line: line.clone(), msg: e.to_string() })?;
        out.insert(name.to_string(), pv);
    }
    Ok(out)
}

/// Parse model text into a [`LinearModel`].
///
/// Arrays in the `Retrieved Information` section bind positionally (1-based) to
/// the indices that subscript them. Entries of `retrieved` override arrays of
/// the same name found in the text.
pub fn parse_model_grammar(text: &str, retrieved: &Params) -> Result<LinearModel, GrammarError> {
    let sec = split_sections(text);
    let obj_lines = sec.objective.ok_or(GrammarError::MissingSection("Objective Function"))?;
    let con_lines = sec.constraints.unwrap_or_default();
    let mut params = match &sec.retrieved {
        Some(lines) => parse_retrieved(lines)?,
        None if retrieved.is_empty() => return Err(GrammarError::MissingSection("Retrieved Information")),
        None => Params::new(),
    };
    for (k, v) in retrieved {
        params.insert(k.clone(), v.clone());
    }

    let obj_text: String = obj_lines.iter().map(|l| math_of(l)).collect::<Vec<_>>().join(" ");
    let wrap = |section: &'static str, line: &str| {
        let line = line.to_string();
        move |source| GrammarError::Expr { section, line, source }
    };
    let (sense, obj_expr) = parse_objective(&obj_text).map_err(wrap("objective", &obj_text))?;
    let header = sec.objective_header.to_ascii_lowercase();
    let sense = sense
        .or_else(|| {
            let all = format!("{header} {}", obj_lines.join(" ")).to_ascii_lowercase();
            if all.contains("minimi") {
                Some(ObjSense::Minimize)
            } else if all.contains("maximi") {
                Some(ObjSense::Maximize)
            } else {
                None
            }
        })
        .ok_or(GrammarError::MissingSense)?;

    let mut statements: Vec<(String, String, Statement)> = Vec::new();
    let mut group = "c".to_string();
    for line in &con_lines {
        let (label, math) = strip_label(line);
        if let Some(l) = &label {
            group = group_name(l);
        }
        let math = math.trim().trim_end_matches(['.', ';']).trim().to_string();
        if math.is_empty() || !has_relation(&math) {
            if label.is_none() && !line.is_empty() {
                group = group_name(line);
            }
            continue;
        }
        for st in parse_statement(&math).map_err(wrap("constraints", line))? {
            statements.push((group.clone(), line.clone(), st));
        }
    }

    let mut b = Builder::new(&params);
    let mut declared: Vec<String> = Vec::new();
    for (_, _, st) in &statements {
        let name = match st {
            Statement::Domain { name, .. } => Some(name.as_str()),
            s => nonneg_target(s),
        };
        if let Some(n) = name {
            if !declared.iter().any(|d| d == n) && !params.contains_key(n) {
                declared.push(n.to_string());
            }
        }
    }
    if declared.is_empty() {
        let mut syms = Vec::new();
        symbol_bases(&obj_expr, &mut syms);
        declared = syms.into_iter().filter(|s| !params.contains_key(s)).collect();
    }
    b.var_bases = declared.into_iter().collect();

    let mut sizes = HashMap::new();
    let mut exprs = vec![&obj_expr];
    for (_, _, st) in &statements {
        if let Statement::Relation { lhs, rhs, .. } = st {
            exprs.push(lhs);
            exprs.push(rhs);
        }
    }
    infer_sizes(&exprs, &params, &mut sizes).map_err(|source| GrammarError::Expr {
        section: "retrieved information",
        line: String::new(),
        source,
    })?;
    b.sizes = sizes;

    let objective = b.objective(&obj_expr).map_err(wrap("objective", &obj_text))?;
    for (g, line, st) in &statements {
        expr::eval_statement_into(&mut b, st, g).map_err(wrap("constraints", line))?;
    }
    let model = LinearModel {
        sense,
        objective,
        variables: b.variables,
        constraints: b.constraints,
        metadata: Default::default(),
    };
    let defects = validate(&model);
    if !defects.is_empty() {
        return Err(GrammarError::Invalid(defects));
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{RowSense, VarKind};

    pub(crate) const NIKE: &str = r"\textbf{Objective Function:}

$\quad \quad \max \quad \sum_i A_i \cdot x_i$

\textbf{ Constraints:}

1. Inventory Constraints: 

$\quad \quad x_i \leq I_i, \quad \forall i $

2. Demand Constraints: 

$\quad \quad x_i \leq d_i, \quad \forall i $

3. Variable Constraints: 

$\quad \quad x_i \in \mathbb Z_+, \quad \forall i $

\textbf{Retrieved Information:}

$\quad \quad I = [97, 240, 322, 281]$

$\quad \quad A =  [11197, 9097, 11197, 9995]$

$\quad \quad d =  [17, 26, 50, 53]$
";

    #[test]
    fn nike_label_parses_to_four_integer_variables() {
        let m = parse_model_grammar(NIKE, &Params::new()).unwrap();
        assert_eq!(m.sense, ObjSense::Maximize);
        assert_eq!(m.variables.len(), 4);
        assert!(m.variables.iter().all(|v| v.kind == VarKind::Integer && v.lower == 0.0));
        assert_eq!(m.constraints.len(), 8);
        assert_eq!(m.objective.terms[1], (9097.0, "x_2".to_string()));
        assert!(m.constraints.iter().all(|c| c.sense == RowSense::Le));
        assert_eq!(m.constraints[0].name, "inventory_constraints_1");
        assert_eq!(m.constraints[4].rhs, 17.0);
    }

    #[test]
    fn short_array_is_a_length_mismatch() {
        let text = NIKE.replace("d =  [17, 26, 50, 53]", "d = [17, 26, 50]");
        let err = parse_model_grammar(&text, &Params::new()).unwrap_err();
        assert!(matches!(err.expr_error(), Some(ExprError::LengthMismatch { index, .. }) if index == "i"), "{err}");
    }

    #[test]
    fn objective_only_model() {
        let text = "Objective Function:\n$\\max \\sum_i A_i x_i$\nConstraints:\nRetrieved Information:\n$A = [1, 2]$\n";
        let m = parse_model_grammar(text, &Params::new()).unwrap();
        assert_eq!(m.constraints.len(), 0);
        assert_eq!(m.variables.len(), 2);
    }

    #[test]
    fn missing_objective_section() {
        let err = parse_model_grammar("Constraints:\n$x \\leq 1$\n", &Params::new()).unwrap_err();
        assert_eq!(err, GrammarError::MissingSection("Objective Function"));
    }

    #[test]
    fn unbound_symbol_is_reported() {
        let text = NIKE.replace("x_i \\leq d_i", "x_i \\leq D_i");
        let err = parse_model_grammar(&text, &Params::new()).unwrap_err();
        assert!(matches!(err.expr_error(), Some(ExprError::UnboundSymbol(s)) if s == "D"), "{err}");
    }

    #[test]
    fn two_dimensional_sony_label() {
        let text = r"\textbf{Objective Function:}

$\quad \quad \max \sum_i \sum_j p_i \cdot x_{ij}$

\textbf{ Constraints:}

1. Capacity Constraints: 

$\quad \quad \sum_i a_i x_{ij} \leq c_j, \quad \forall j$

2. Non-negativity Constraints: 

$\quad \quad  x_{ij} \geq 0, \quad \forall i,j $

\textbf{Retrieved Information:}

$\quad \quad p = [1818, 1609, 509, 1808, 528]$

$\quad \quad a = [400, 200, 40, 60, 50]$

$\quad \quad c = [1200, 1374, 800, 2042, 1000, 1800]$
";
        let m = parse_model_grammar(text, &Params::new()).unwrap();
        assert_eq!(m.variables.len(), 30);
        assert_eq!(m.constraints.len(), 6);
        assert_eq!(m.constraints[5].rhs, 1800.0);
    }

    #[test]
    fn external_arrays_override_text() {
        let mut p = Params::new();
        p.insert("d".into(), ParamValue::Vector(vec![1.0, 1.0, 1.0, 1.0]));
        let m = parse_model_grammar(NIKE, &p).unwrap();
        assert_eq!(m.constraints[4].rhs, 1.0);
    }

    #[test]
    fn matrix_data_and_scalar() {
        let text = r"Objective Function:
$\min \sum_i \sum_j c_{ij} x_{ij}$
Constraints:
Supply: $\sum_j x_{ij} \leq s_i, \forall i$
Demand: $\sum_i x_{ij} \geq d_j, \forall j$
Budget: $\sum_i \sum_j x_{ij} \leq B$
Retrieved Information:
$c = [[1, 2, 3],
      [4, 5, 6]]$
$s = [10, 20]$
$d = [5, 5, 5]$
$B = 100$
";
        let m = parse_model_grammar(text, &Params::new()).unwrap();
        assert_eq!(m.variables.len(), 6);
        assert_eq!(m.constraints.len(), 6);
        assert_eq!(m.objective.terms[5], (6.0, "x_2_3".to_string()));
    }
}
