//! CPLEX-style LP file reader and writer.

use super::{validate, Constraint, Defect, LinearExpr, LinearModel, ObjSense, RowSense, VarKind, Variable};
use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("empty LP input")]
    Empty,
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("LP model is invalid: {}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Defect>),
}

fn num(x: f64) -> String {
    if x == f64::INFINITY {
        "+inf".into()
    } else if x == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{x}")
    }
}

fn write_expr(out: &mut String, prefix: &str, e: &LinearExpr) {
    let mut line = String::from(prefix);
    let mut first = true;
    let mut push = |line: &mut String, piece: String| {
        if line.len() + piece.len() > 200 {
            out.push_str(line.trim_end());
            out.push('\n');
            line.clear();
            line.push_str("   ");
        }
        line.push_str(&piece);
    };
    for (c, v) in &e.terms {
        let piece = if first {
            format!("{} {v}", num(*c))
        } else if *c < 0.0 {
            format!(" - {} {v}", num(-c))
        } else {
            format!(" + {} {v}", num(*c))
        };
        first = false;
        push(&mut line, piece);
    }
    if e.constant != 0.0 || e.terms.is_empty() {
        let piece = if first {
            num(e.constant)
        } else if e.constant < 0.0 {
            format!(" - {}", num(-e.constant))
        } else {
            format!(" + {}", num(e.constant))
        };
        push(&mut line, piece);
    }
    out.push_str(&line);
}

/// Render a model in LP format. Every variable gets an explicit bound line.
pub fn write_lp(model: &LinearModel) -> String {
    let mut out = String::new();
    for (k, v) in &model.metadata {
        let _ = writeln!(out, "\\ @{k} {}", v.replace('\n', " "));
    }
    out.push_str(match model.sense {
        ObjSense::Maximize => "Maximize\n",
        ObjSense::Minimize => "Minimize\n",
    });
    write_expr(&mut out, " obj: ", &model.objective);
    out.push_str("\nSubject To\n");
    for c in &model.constraints {
        let e = LinearExpr { terms: c.expr.terms.clone(), constant: 0.0 };
        write_expr(&mut out, &format!(" {}: ", c.name), &e);
        let _ = writeln!(out, " {} {}", c.sense.symbol(), num(c.rhs - c.expr.constant));
    }
    out.push_str("Bounds\n");
    for v in &model.variables {
        if v.lower == f64::NEG_INFINITY && v.upper == f64::INFINITY {
            let _ = writeln!(out, " {} free", v.name);
        } else {
            let _ = writeln!(out, " {} <= {} <= {}", num(v.lower), v.name, num(v.upper));
        }
    }
    let ints: Vec<&str> =
        model.variables.iter().filter(|v| v.kind == VarKind::Integer).map(|v| v.name.as_str()).collect();
    if !ints.is_empty() {
        out.push_str("General\n");
        for n in ints {
            let _ = writeln!(out, " {n}");
        }
    }
    let bins: Vec<&str> =
        model.variables.iter().filter(|v| v.kind == VarKind::Binary).map(|v| v.name.as_str()).collect();
    if !bins.is_empty() {
        out.push_str("Binaries\n");
        for n in bins {
            let _ = writeln!(out, " {n}");
        }
    }
    out.push_str("End\n");
    out
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Name(String),
    Plus,
    Minus,
    Colon,
    Sense(RowSense),
}

#[derive(Clone, Copy, PartialEq, Debug)]
enum Section {
    None,
    Objective,
    Rows,
    Bounds,
    General,
    Binary,
    End,
}

fn section_keyword(line: &str) -> Option<(Section, Option<ObjSense>)> {
    let l = line.trim().to_ascii_lowercase();
    let l = l.trim_end_matches(':');
    Some(match l {
        "maximize" | "maximise" | "maximum" | "max" => (Section::Objective, Some(ObjSense::Maximize)),
        "minimize" | "minimise" | "minimum" | "min" => (Section::Objective, Some(ObjSense::Minimize)),
        "subject to" | "such that" | "st" | "s.t." | "st." => (Section::Rows, None),
        "bounds" | "bound" => (Section::Bounds, None),
        "general" | "generals" | "gen" | "integer" | "integers" => (Section::General, None),
        "binary" | "binaries" | "bin" => (Section::Binary, None),
        "end" => (Section::End, None),
        _ => return None,
    })
}

fn is_name_char(c: char) -> bool {
    !(c.is_whitespace() || matches!(c, '+' | '-' | '<' | '>' | '=' | ':' | '*' | '\\'))
}

fn lex(line: &str, lineno: usize) -> Result<Vec<(Tok, usize)>, LpError> {
    let chars: Vec<char> = line.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    let err = |msg: String| LpError::Parse { line: lineno, msg };
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() || c == '*' {
            i += 1;
        } else if c == '\\' {
            break;
        } else if c == '+' {
            out.push((Tok::Plus, lineno));
            i += 1;
        } else if c == '-' {
            out.push((Tok::Minus, lineno));
            i += 1;
        } else if c == ':' {
            out.push((Tok::Colon, lineno));
            i += 1;
        } else if matches!(c, '<' | '>' | '=') {
            let mut s = String::from(c);
            i += 1;
            if i < chars.len() && matches!(chars[i], '<' | '>' | '=') {
                s.push(chars[i]);
                i += 1;
            }
            let sense = match s.as_str() {
                "<" | "<=" | "=<" => RowSense::Le,
                ">" | ">=" | "=>" => RowSense::Ge,
                "=" | "==" => RowSense::Eq,
                _ => return Err(err(format!("bad operator `{s}`"))),
            };
            out.push((Tok::Sense(sense), lineno));
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && matches!(chars[i], 'e' | 'E') {
                let mut j = i + 1;
                if j < chars.len() && matches!(chars[j], '+' | '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let s: String = chars[start..i].iter().collect();
            let v = s.parse::<f64>().map_err(|_| err(format!("bad number `{s}`")))?;
            out.push((Tok::Num(v), lineno));
        } else {
            let start = i;
            while i < chars.len() && is_name_char(chars[i]) {
                i += 1;
            }
            let s: String = chars[start..i].iter().collect();
            let lower = s.to_ascii_lowercase();
            if lower == "inf" || lower == "infinity" {
                out.push((Tok::Num(f64::INFINITY), lineno));
            } else {
                out.push((Tok::Name(s), lineno));
            }
        }
    }
    Ok(out)
}

/// Parse `[name:] expr [sense rhs]` statements out of a token stream.
struct Stream {
    toks: Vec<(Tok, usize)>,
    pos: usize,
}

impl Stream {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.0)
    }

    fn line(&self) -> usize {
        self.toks.get(self.pos).or(self.toks.last()).map_or(0, |t| t.1)
    }

    fn err(&self, msg: impl Into<String>) -> LpError {
        LpError::Parse { line: self.line(), msg: msg.into() }
    }

    fn label(&mut self) -> Option<String> {
        if let (Some((Tok::Name(n), _)), Some((Tok::Colon, _))) = (self.toks.get(self.pos), self.toks.get(self.pos + 1)) {
            let n = n.clone();
            self.pos += 2;
            Some(n)
        } else {
            None
        }
    }

    /// Linear expression; stops at a sense, a label, or the end.
    fn expr(&mut self) -> Result<LinearExpr, LpError> {
        let mut e = LinearExpr::new();
        loop {
            let mut sign = 1.0;
            let mut saw = false;
            while let Some(t) = self.peek() {
                match t {
                    Tok::Plus => {}
                    Tok::Minus => sign = -sign,
                    _ => break,
                }
                saw = true;
                self.pos += 1;
            }
            match self.peek() {
                Some(Tok::Num(v)) => {
                    let v = *v;
                    self.pos += 1;
                    if let Some(Tok::Name(n)) = self.peek() {
                        if !matches!(self.toks.get(self.pos + 1), Some((Tok::Colon, _))) {
                            let n = n.clone();
                            self.pos += 1;
                            e.terms.push((sign * v, n));
                            continue;
                        }
                    }
                    e.constant += sign * v;
                }
                Some(Tok::Name(n)) => {
                    if matches!(self.toks.get(self.pos + 1), Some((Tok::Colon, _))) {
                        if saw {
                            return Err(self.err("dangling sign"));
                        }
                        return Ok(e);
                    }
                    let n = n.clone();
                    self.pos += 1;
                    e.terms.push((sign, n));
                }
                _ => {
                    if saw {
                        return Err(self.err("dangling sign"));
                    }
                    return Ok(e);
                }
            }
        }
    }

    fn signed_number(&mut self) -> Result<f64, LpError> {
        let mut sign = 1.0;
        loop {
            match self.peek() {
                Some(Tok::Plus) => self.pos += 1,
                Some(Tok::Minus) => {
                    sign = -sign;
                    self.pos += 1
                }
                Some(Tok::Num(v)) => {
                    let v = *v;
                    self.pos += 1;
                    return Ok(sign * v);
                }
                other => return Err(self.err(format!("expected a number, found {other:?}"))),
            }
        }
    }
}

/// Parse LP text. Rows keep their names; variables default to `[0, +inf)`.
pub fn read_lp(text: &str) -> Result<LinearModel, LpError> {
    if text.trim().is_empty() {
        return Err(LpError::Empty);
    }
    let mut metadata = BTreeMap::new();
    let mut section = Section::None;
    let mut sense = None;
    let mut buckets: HashMap<&'static str, Vec<(Tok, usize)>> = HashMap::new();
    let mut bound_lines: Vec<(usize, Vec<(Tok, usize)>)> = Vec::new();
    let mut general = Vec::new();
    let mut binary = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let lineno = k + 1;
        let trimmed = raw.trim();
        if let Some(rest) = trimmed.strip_prefix("\\ @").or_else(|| trimmed.strip_prefix("\\@")) {
            let (key, value) = rest.split_once(' ').unwrap_or((rest, ""));
            metadata.insert(key.to_string(), value.trim().to_string());
            continue;
        }
        if trimmed.is_empty() || trimmed.starts_with('\\') {
            continue;
        }
        if let Some((s, obj)) = section_keyword(trimmed) {
            if s == Section::Objective {
                if sense.is_some() {
                    return Err(LpError::Parse { line: lineno, msg: "second objective section".into() });
                }
                sense = obj;
            }
            section = s;
            continue;
        }
        match section {
            Section::None => {
                return Err(LpError::Parse { line: lineno, msg: format!("content before any section: `{trimmed}`") })
            }
            Section::End => {
                return Err(LpError::Parse { line: lineno, msg: "content after End".into() })
            }
            Section::Objective => buckets.entry("obj").or_default().extend(lex(raw, lineno)?),
            Section::Rows => buckets.entry("rows").or_default().extend(lex(raw, lineno)?),
            Section::Bounds => bound_lines.push((lineno, lex(raw, lineno)?)),
            Section::General | Section::Binary => {
                for (t, l) in lex(raw, lineno)? {
                    match t {
                        Tok::Name(n) => {
                            if section == Section::General {
                                general.push(n)
                            } else {
                                binary.push(n)
                            }
                        }
                        other => return Err(LpError::Parse { line: l, msg: format!("expected a name, found {other:?}") }),
                    }
                }
            }
        }
    }
    let sense = sense.ok_or(LpError::Parse { line: 1, msg: "missing Maximize/Minimize section".into() })?;

    let mut s = Stream { toks: buckets.remove("obj").unwrap_or_default(), pos: 0 };
    s.label();
    let objective = s.expr()?.normalized();
    if s.pos < s.toks.len() {
        return Err(s.err("unexpected token in objective"));
    }

    let mut constraints = Vec::new();
    let mut s = Stream { toks: buckets.remove("rows").unwrap_or_default(), pos: 0 };
    while s.pos < s.toks.len() {
        let name = s.label().unwrap_or_else(|| format!("R{}", constraints.len() + 1));
        let mut expr = s.expr()?;
        let rsense = match s.peek() {
            Some(Tok::Sense(r)) => *r,
            other => return Err(s.err(format!("expected <=, >= or =, found {other:?}"))),
        };
        s.pos += 1;
        let rhs = s.signed_number()?;
        // constants written on the left move to the right-hand side
        let rhs = rhs - expr.constant;
        expr.constant = 0.0;
        if expr.terms.is_empty() {
            return Err(s.err(format!("row `{name}` has no variables")));
        }
        constraints.push(Constraint::new(name, expr.normalized(), rsense, rhs));
    }

    let mut order: Vec<String> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    let mut note = |n: &str, order: &mut Vec<String>| {
        if seen.insert(n.to_string()) {
            order.push(n.to_string());
        }
    };
    for (_, n) in &objective.terms {
        note(n, &mut order);
    }
    for c in &constraints {
        for (_, n) in &c.expr.terms {
            note(n, &mut order);
        }
    }
    let mut bounds: HashMap<String, (f64, f64)> = HashMap::new();
    for (lineno, toks) in bound_lines {
        let toks: Vec<Tok> = toks.into_iter().map(|t| t.0).collect();
        let err = |m: &str| LpError::Parse { line: lineno, msg: m.to_string() };
        let neg = |t: &[Tok]| -> Option<(f64, usize)> {
            match t {
                [Tok::Minus, Tok::Num(v), ..] => Some((-v, 2)),
                [Tok::Plus, Tok::Num(v), ..] => Some((*v, 2)),
                [Tok::Num(v), ..] => Some((*v, 1)),
                _ => None,
            }
        };
        let (name, lo, hi) = if let [Tok::Name(n), Tok::Name(f)] = toks.as_slice() {
            if !f.eq_ignore_ascii_case("free") {
                return Err(err("expected `free`"));
            }
            (n.clone(), f64::NEG_INFINITY, f64::INFINITY)
        } else if let Some((a, k)) = neg(&toks) {
            // a <= x [<= b]   or   a >= x
            let (Some(Tok::Sense(s1)), Some(Tok::Name(n))) = (toks.get(k), toks.get(k + 1)) else {
                return Err(err("malformed bound"));
            };
            let cur = bounds.get(n).copied().unwrap_or((0.0, f64::INFINITY));
            let (mut lo, mut hi) = match s1 {
                RowSense::Le => (a, cur.1),
                RowSense::Ge => (cur.0, a),
                RowSense::Eq => (a, a),
            };
            if let Some(Tok::Sense(s2)) = toks.get(k + 2) {
                let (b, _) = neg(&toks[k + 3..]).ok_or_else(|| err("malformed bound"))?;
                match s2 {
                    RowSense::Le => hi = b,
                    RowSense::Ge => lo = b,
                    RowSense::Eq => return Err(err("malformed bound")),
                }
            } else if toks.len() != k + 2 {
                return Err(err("malformed bound"));
            }
            (n.clone(), lo, hi)
        } else if let [Tok::Name(n), Tok::Sense(s1), rest @ ..] = toks.as_slice() {
            let (b, used) = neg(rest).ok_or_else(|| err("malformed bound"))?;
            if rest.len() != used {
                return Err(err("malformed bound"));
            }
            let cur = bounds.get(n).copied().unwrap_or((0.0, f64::INFINITY));
            match s1 {
                RowSense::Le => (n.clone(), cur.0, b),
                RowSense::Ge => (n.clone(), b, cur.1),
                RowSense::Eq => (n.clone(), b, b),
            }
        } else {
            return Err(err("malformed bound"));
        };
        note(&name, &mut order);
        bounds.insert(name, (lo, hi));
    }
    for n in general.iter().chain(&binary) {
        note(n, &mut order);
    }
    let variables = order
        .into_iter()
        .map(|n| {
            let kind = if binary.contains(&n) {
                VarKind::Binary
            } else if general.contains(&n) {
                VarKind::Integer
            } else {
                VarKind::Continuous
            };
            let default = if kind == VarKind::Binary { (0.0, 1.0) } else { (0.0, f64::INFINITY) };
            let (lower, upper) = bounds.get(&n).copied().unwrap_or(default);
            Variable { name: n, lower, upper, kind }
        })
        .collect();
    let model = LinearModel { sense, objective, variables, constraints, metadata };
    let defects = validate(&model);
    if !defects.is_empty() {
        return Err(LpError::Invalid(defects));
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::models_equivalent;

    fn sample() -> LinearModel {
        let mut m = LinearModel::new(ObjSense::Maximize);
        m.objective = LinearExpr::from_terms([(3.0, "x"), (-2.5, "y"), (1.0, "b")]).with_constant(4.0);
        m.add_variable(Variable::continuous("x").with_bounds(0.0, 5.0));
        m.add_variable(Variable::free("y"));
        m.add_variable(Variable::binary("b"));
        m.add_variable(Variable::integer("k").with_bounds(-3.0, 7.0));
        m.add_constraint(Constraint::new(
            "c1",
            LinearExpr::from_terms([(1.0, "x"), (1.0, "y"), (2.0, "k")]),
            RowSense::Le,
            10.0,
        ));
        m.add_constraint(Constraint::new("c2", LinearExpr::from_terms([(1.0, "y"), (-1.0, "b")]), RowSense::Ge, -2.0));
        m.add_constraint(Constraint::new("c3", LinearExpr::from_terms([(1.0, "x"), (1e-7, "k")]), RowSense::Eq, 0.5));
        m.metadata.insert("instance".into(), "demo".into());
        m
    }

    #[test]
    fn writes_expected_stanzas() {
        let text = write_lp(&sample());
        for s in ["Maximize", "Subject To", "Bounds", "General", "Binaries", "End", " y free"] {
            assert!(text.contains(s), "missing {s} in\n{text}");
        }
    }

    #[test]
    fn round_trip_is_equivalent() {
        let m = sample();
        let back = read_lp(&write_lp(&m)).unwrap();
        assert!(models_equivalent(&m, &back).unwrap().0);
        assert_eq!(back.metadata["instance"], "demo");
        assert_eq!(back.constraints[2].expr.terms[1].0, 1e-7);
    }

    #[test]
    fn one_variable_max() {
        let mut m = LinearModel::new(ObjSense::Maximize);
        m.objective = LinearExpr::from_terms([(1.0, "x")]);
        m.add_variable(Variable::continuous("x"));
        let t = write_lp(&m);
        assert!(t.contains("Maximize") && t.contains("Bounds"));
    }

    #[test]
    fn errors_carry_line_numbers() {
        assert_eq!(read_lp("  \n"), Err(LpError::Empty));
        let err = read_lp("Maximize\n obj: x\nSubject To\n c1: x + <= 4\nEnd\n").unwrap_err();
        assert!(matches!(err, LpError::Parse { line: 4, .. }), "{err:?}");
        let err = read_lp("Minimize\n x\nBounds\n x <= <= 3\nEnd\n").unwrap_err();
        assert!(matches!(err, LpError::Parse { line: 4, .. }), "{err:?}");
        let err = read_lp("x + y\n").unwrap_err();
        assert!(matches!(err, LpError::Parse { line: 1, .. }));
    }

    #[test]
    fn reads_hand_written_lp() {
        let text = "\\ a comment\nMinimize\n 2x + 3 y\nSubject To\n -x - y <= -4\n r2: x - y >= -1\nBounds\n y <= 10\n x >= 1\nGenerals\n x\nEnd\n";
        let m = read_lp(text).unwrap();
        assert_eq!(m.sense, ObjSense::Minimize);
        assert_eq!(m.constraints[0].name, "R1");
        assert_eq!(m.constraints[0].rhs, -4.0);
        let x = m.variable("x").unwrap();
        assert_eq!((x.lower, x.upper, x.kind), (1.0, f64::INFINITY, VarKind::Integer));
        assert_eq!(m.variable("y").unwrap().upper, 10.0);
    }
}
