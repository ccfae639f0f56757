//! Restricted LaTeX-style linear algebra: tokenizer, parser and evaluator used by
//! the label grammar and the plan compiler.

use super::{Constraint, LinearExpr, RowSense, VarKind, Variable};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap, HashSet};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExprError {
    #[error("cannot tokenize `{0}`")]
    Lex(String),
    #[error("unparsable expression: {0}")]
    Syntax(String),
    #[error("symbol `{0}` is neither a declared variable nor retrieved data")]
    UnboundSymbol(String),
    #[error("index `{0}` has no known range")]
    UnknownIndexRange(String),
    #[error("index `{0}` is used but not bound")]
    UnboundIndex(String),
    #[error("`{name}` indexed at position {index} but has length {len}")]
    IndexOutOfRange { name: String, index: i64, len: usize },
    #[error("`{name}` takes {expected} subscripts, got {found}")]
    Arity { name: String, expected: usize, found: usize },
    #[error("index `{index}` has length {first_len} from `{first}` but {second_len} from `{second}`")]
    LengthMismatch { index: String, first: String, first_len: usize, second: String, second_len: usize },
    #[error("term is not linear: {0}")]
    Nonlinear(String),
    #[error("division by zero or by a non-constant")]
    BadDivisor,
    #[error("no row of `{name}` is labelled `{label}`")]
    UnknownLabel { name: String, label: String },
    #[error("relation between constants does not hold: {0}")]
    FalseConstantRelation(String),
}

type Result<T> = std::result::Result<T, ExprError>;

/// Retrieved data bound to a symbol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Scalar(f64),
    Vector(Vec<f64>),
    Matrix(Vec<Vec<f64>>),
}

impl ParamValue {
    pub fn dims(&self) -> Vec<usize> {
        match self {
            ParamValue::Scalar(_) => vec![],
            ParamValue::Vector(v) => vec![v.len()],
            ParamValue::Matrix(m) => vec![m.len(), m.first().map_or(0, |r| r.len())],
        }
    }
}

pub type Params = BTreeMap<String, ParamValue>;

/// Resolved subscript value.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum IndexValue {
    Int(i64),
    Label(String),
}

impl IndexValue {
    fn render(&self) -> String {
        match self {
            IndexValue::Int(i) => i.to_string(),
            IndexValue::Label(s) => s
                .chars()
                .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
                .collect(),
        }
    }
}

/// Source of numeric data referenced by symbols.
pub(crate) trait ParamSource {
    fn dims(&self, name: &str) -> Option<Vec<usize>>;
    fn value(&self, name: &str, idx: &[IndexValue]) -> Result<f64>;
}

fn one_based(name: &str, i: &IndexValue, len: usize) -> Result<usize> {
    match i {
        IndexValue::Int(k) if *k >= 1 && (*k as usize) <= len => Ok(*k as usize - 1),
        IndexValue::Int(k) => Err(ExprError::IndexOutOfRange { name: name.into(), index: *k, len }),
        IndexValue::Label(l) => Err(ExprError::UnknownLabel { name: name.into(), label: l.clone() }),
    }
}

impl ParamSource for Params {
    fn dims(&self, name: &str) -> Option<Vec<usize>> {
        self.get(name).map(ParamValue::dims)
    }

    fn value(&self, name: &str, idx: &[IndexValue]) -> Result<f64> {
        let p = self.get(name).ok_or_else(|| ExprError::UnboundSymbol(name.into()))?;
        let arity = p.dims().len();
        if idx.len() != arity {
            return Err(ExprError::Arity { name: name.into(), expected: arity, found: idx.len() });
        }
        match p {
            ParamValue::Scalar(x) => Ok(*x),
            ParamValue::Vector(v) => Ok(v[one_based(name, &idx[0], v.len())?]),
            ParamValue::Matrix(m) => {
                let r = &m[one_based(name, &idx[0], m.len())?];
                Ok(r[one_based(name, &idx[1], r.len())?])
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Rel {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Schema(String),
    Bb(char),
    Under,
    Caret,
    LBrace,
    RBrace,
    LParen,
    RParen,
    LBrack,
    RBrack,
    SetOpen,
    SetClose,
    Plus,
    Minus,
    Star,
    Slash,
    Comma,
    Sum,
    Frac,
    Rel(Rel),
    In,
    Forall,
    Dots,
}

fn read_group(chars: &[char], i: &mut usize) -> String {
    while *i < chars.len() && chars[*i] == ' ' {
        *i += 1;
    }
    if *i < chars.len() && chars[*i] == '{' {
        let mut depth = 0;
        let start = *i + 1;
        while *i < chars.len() {
            match chars[*i] {
                '{' => depth += 1,
                '}' => {
                    depth -= 1;
                    if depth == 0 {
                        let s: String = chars[start..*i].iter().collect();
                        *i += 1;
                        return s;
                    }
                }
                _ => {}
            }
            *i += 1;
        }
        chars[start..].iter().collect()
    } else if *i < chars.len() {
        let c = chars[*i];
        *i += 1;
        c.to_string()
    } else {
        String::new()
    }
}

fn clean_column(raw: &str) -> String {
    let mut s = raw.replace("\\_", "_");
    for cmd in ["\\text", "\\mathrm", "\\textrm", "\\texttt", "\\mathit"] {
        s = s.replace(cmd, "");
    }
    s.chars()
        .filter(|c| !matches!(c, '{' | '}' | '\'' | '"' | '`' | '‘' | '’' | '“' | '”'))
        .collect::<String>()
        .trim()
        .to_string()
}

fn tokenize(src: &str) -> Result<Vec<Tok>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        match c {
            ' ' | '\t' | '\n' | '\r' | '&' | '~' | ';' | '$' => i += 1,
            '0'..='9' | '.' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    i += 1;
                }
                if i < chars.len()
                    && (chars[i] == 'e' || chars[i] == 'E')
                    && i + 1 < chars.len()
                    && (chars[i + 1].is_ascii_digit()
                        || ((chars[i + 1] == '-' || chars[i + 1] == '+')
                            && i + 2 < chars.len()
                            && chars[i + 2].is_ascii_digit()))
                {
                    i += 2;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                let s: String = chars[start..i].iter().collect();
                if s.chars().all(|c| c == '.') {
                    if s.len() >= 3 {
                        out.push(Tok::Dots);
                    }
                    continue;
                }
                let s = s.trim_end_matches('.');
                out.push(Tok::Num(s.parse().map_err(|_| ExprError::Lex(s.to_string()))?));
            }
            'a'..='z' | 'A'..='Z' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '\'') {
                    i += 1;
                }
                let s: String = chars[start..i].iter().collect();
                push_ident(&mut out, s, &chars, &mut i);
            }
            '\\' => {
                i += 1;
                if i >= chars.len() {
                    break;
                }
                let n = chars[i];
                if !n.is_ascii_alphabetic() {
                    i += 1;
                    match n {
                        '{' => out.push(Tok::SetOpen),
                        '}' => out.push(Tok::SetClose),
                        '_' => out.push(Tok::Under),
                        _ => {}
                    }
                    continue;
                }
                let start = i;
                while i < chars.len() && chars[i].is_ascii_alphabetic() {
                    i += 1;
                }
                let cmd: String = chars[start..i].iter().collect();
                match cmd.as_str() {
                    "sum" => out.push(Tok::Sum),
                    "frac" | "dfrac" | "tfrac" => out.push(Tok::Frac),
                    "cdot" | "times" | "ast" => out.push(Tok::Star),
                    "div" => out.push(Tok::Slash),
                    "leq" | "le" | "leqslant" | "lt" => out.push(Tok::Rel(Rel::Le)),
                    "geq" | "ge" | "geqslant" | "gt" => out.push(Tok::Rel(Rel::Ge)),
                    "neq" | "ne" => return Err(ExprError::Syntax("`\\neq` is not a linear relation".into())),
                    "in" => out.push(Tok::In),
                    "forall" => out.push(Tok::Forall),
                    "dots" | "cdots" | "ldots" => out.push(Tok::Dots),
                    "quad" | "qquad" | "left" | "right" | "big" | "Big" | "bigg" | "Bigg"
                    | "displaystyle" | "textstyle" | "limits" | "nolimits" | "small"
                    | "mid" => {}
                    "text" | "mathrm" | "textrm" | "mathit" | "operatorname" | "textit"
                    | "mathbf" | "boldsymbol" | "bm" | "textbf" | "texttt" | "mathcal"
                    | "mathscr" => {
                        let g = read_group(&chars, &mut i);
                        let g = g.trim().to_string();
                        if g.is_empty() {
                            continue;
                        }
                        if let Ok(x) = g.parse::<f64>() {
                            out.push(Tok::Num(x));
                        } else {
                            push_ident(&mut out, g, &chars, &mut i);
                        }
                    }
                    "mathbb" => {
                        let g = read_group(&chars, &mut i);
                        let ch = g.trim().chars().next().unwrap_or('R');
                        out.push(Tok::Bb(ch));
                    }
                    other => out.push(Tok::Ident(other.to_string())),
                }
            }
            '_' => {
                out.push(Tok::Under);
                i += 1;
            }
            '^' => {
                out.push(Tok::Caret);
                i += 1;
            }
            '{' => {
                out.push(Tok::LBrace);
                i += 1;
            }
            '}' => {
                out.push(Tok::RBrace);
                i += 1;
            }
            '(' => {
                out.push(Tok::LParen);
                i += 1;
            }
            ')' => {
                out.push(Tok::RParen);
                i += 1;
            }
            '[' => {
                out.push(Tok::LBrack);
                i += 1;
            }
            ']' => {
                out.push(Tok::RBrack);
                i += 1;
            }
            '+' => {
                out.push(Tok::Plus);
                i += 1;
            }
            '-' | '−' | '–' => {
                out.push(Tok::Minus);
                i += 1;
            }
            '*' | '·' | '×' => {
                out.push(Tok::Star);
                i += 1;
            }
            '/' => {
                out.push(Tok::Slash);
                i += 1;
            }
            ',' => {
                out.push(Tok::Comma);
                i += 1;
            }
            ':' => i += 1,
            '<' | '≤' | '⩽' => {
                out.push(Tok::Rel(Rel::Le));
                i += 1;
                if i < chars.len() && chars[i] == '=' {
                    i += 1;
                }
            }
            '>' | '≥' | '⩾' => {
                out.push(Tok::Rel(Rel::Ge));
                i += 1;
                if i < chars.len() && chars[i] == '=' {
                    i += 1;
                }
            }
            '=' => {
                out.push(Tok::Rel(Rel::Eq));
                i += 1;
                if i < chars.len() && chars[i] == '=' {
                    i += 1;
                }
            }
            '∈' => {
                out.push(Tok::In);
                i += 1;
            }
            '∀' => {
                out.push(Tok::Forall);
                i += 1;
            }
            'Σ' | '∑' => {
                out.push(Tok::Sum);
                i += 1;
            }
            '…' => {
                out.push(Tok::Dots);
                i += 1;
            }
            'ℤ' => {
                out.push(Tok::Bb('Z'));
                i += 1;
            }
            'ℝ' => {
                out.push(Tok::Bb('R'));
                i += 1;
            }
            'ℕ' => {
                out.push(Tok::Bb('N'));
                i += 1;
            }
            _ => return Err(ExprError::Lex(c.to_string())),
        }
    }
    Ok(out)
}

/// Emit an identifier; `schema[...]` swallows its raw column text.
fn push_ident(out: &mut Vec<Tok>, s: String, chars: &[char], i: &mut usize) {
    if s == "schema" {
        let mut j = *i;
        while j < chars.len() && chars[j] == ' ' {
            j += 1;
        }
        if j < chars.len() && chars[j] == '[' {
            let mut depth = 0;
            let start = j + 1;
            while j < chars.len() {
                match chars[j] {
                    '[' => depth += 1,
                    ']' => {
                        depth -= 1;
                        if depth == 0 {
                            break;
                        }
                    }
                    _ => {}
                }
                j += 1;
            }
            let raw: String = chars[start..j.min(chars.len())].iter().collect();
            *i = (j + 1).min(chars.len());
            out.push(Tok::Schema(clean_column(&raw)));
            return;
        }
    }
    out.push(Tok::Ident(s));
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum IndexExpr {
    Const(i64),
    Name(String, i64),
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Range {
    Full,
    Named(String),
    List(Vec<IndexExpr>),
    Interval(IndexExpr, IndexExpr),
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Binder {
    pub index: String,
    pub range: Range,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Expr {
    Num(f64),
    Sym { name: String, subs: Vec<IndexExpr> },
    Neg(Box<Expr>),
    Add(Vec<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Sum { binders: Vec<Binder>, body: Box<Expr> },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Domain {
    Kind { kind: VarKind, lower: f64, upper: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Statement {
    Relation { lhs: Expr, rel: Rel, rhs: Expr, quant: Vec<Binder> },
    Domain { name: String, subs: Vec<IndexExpr>, domain: Domain, quant: Vec<Binder> },
}

fn is_simple_index(name: &str) -> bool {
    let mut c = name.chars();
    matches!(c.next(), Some(ch) if ch.is_ascii_lowercase()) && c.all(|ch| ch.is_ascii_digit() || ch == '\'')
}

struct Parser {
    toks: Vec<Tok>,
    pos: usize,
}

impl Parser {
    fn new(toks: Vec<Tok>) -> Self {
        Parser { toks, pos: 0 }
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }

    fn expect(&mut self, t: Tok) -> Result<()> {
        match self.next() {
            Some(ref x) if *x == t => Ok(()),
            other => Err(ExprError::Syntax(format!("expected {t:?}, found {other:?}"))),
        }
    }

    /// Tokens of a `{...}` group (the opening brace already consumed).
    fn group_tokens(&mut self, open: Tok, close: Tok) -> Result<Vec<Tok>> {
        let mut depth = 1;
        let mut out = Vec::new();
        while let Some(t) = self.next() {
            if t == open {
                depth += 1;
            } else if t == close {
                depth -= 1;
                if depth == 0 {
                    return Ok(out);
                }
            }
            out.push(t);
        }
        Err(ExprError::Syntax("unbalanced group".into()))
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut terms = Vec::new();
        loop {
            let mut neg = false;
            let mut saw_sign = false;
            while let Some(t) = self.peek() {
                match t {
                    Tok::Plus => {}
                    Tok::Minus => neg = !neg,
                    _ => break,
                }
                saw_sign = true;
                self.pos += 1;
            }
            if !saw_sign && !terms.is_empty() {
                break;
            }
            let p = self.product()?;
            terms.push(if neg { Expr::Neg(Box::new(p)) } else { p });
            if !matches!(self.peek(), Some(Tok::Plus | Tok::Minus)) {
                break;
            }
        }
        Ok(if terms.len() == 1 { terms.pop().unwrap() } else { Expr::Add(terms) })
    }

    fn starts_factor(t: &Tok) -> bool {
        matches!(
            t,
            Tok::Num(_) | Tok::Ident(_) | Tok::Schema(_) | Tok::LParen | Tok::LBrace | Tok::Sum | Tok::Frac
        )
    }

    fn product(&mut self) -> Result<Expr> {
        let mut acc = self.factor()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.pos += 1;
                    let neg = matches!(self.peek(), Some(Tok::Minus));
                    if neg {
                        self.pos += 1;
                    }
                    let f = self.factor()?;
                    let f = if neg { Expr::Neg(Box::new(f)) } else { f };
                    acc = Expr::Mul(Box::new(acc), Box::new(f));
                }
                Some(Tok::Slash) => {
                    self.pos += 1;
                    let f = self.factor()?;
                    acc = Expr::Div(Box::new(acc), Box::new(f));
                }
                Some(t) if Self::starts_factor(t) => {
                    let f = self.factor()?;
                    acc = Expr::Mul(Box::new(acc), Box::new(f));
                }
                _ => return Ok(acc),
            }
        }
    }

    fn sub_expr(toks: Vec<Tok>) -> Result<Expr> {
        let mut p = Parser::new(toks);
        let e = p.expr()?;
        if !p.at_end() {
            return Err(ExprError::Syntax(format!("trailing tokens {:?}", &p.toks[p.pos..])));
        }
        Ok(e)
    }

    fn factor(&mut self) -> Result<Expr> {
        match self.next() {
            Some(Tok::Num(x)) => Ok(Expr::Num(x)),
            Some(Tok::Ident(name)) => self.symbol(name),
            Some(Tok::Schema(col)) => self.symbol(format!("schema:{col}")),
            Some(Tok::LParen) => {
                let inner = self.group_tokens(Tok::LParen, Tok::RParen)?;
                Self::sub_expr(inner)
            }
            Some(Tok::LBrace) => {
                let inner = self.group_tokens(Tok::LBrace, Tok::RBrace)?;
                Self::sub_expr(inner)
            }
            Some(Tok::Frac) => {
                self.expect(Tok::LBrace)?;
                let num = Self::sub_expr(self.group_tokens(Tok::LBrace, Tok::RBrace)?)?;
                self.expect(Tok::LBrace)?;
                let den = Self::sub_expr(self.group_tokens(Tok::LBrace, Tok::RBrace)?)?;
                Ok(Expr::Div(Box::new(num), Box::new(den)))
            }
            Some(Tok::Sum) => {
                let binders = self.sum_binders()?;
                let body = self.product()?;
                Ok(Expr::Sum { binders, body: Box::new(body) })
            }
            Some(Tok::Minus) => Ok(Expr::Neg(Box::new(self.factor()?))),
            other => Err(ExprError::Syntax(format!("unexpected token {other:?}"))),
        }
    }

    fn symbol(&mut self, mut name: String) -> Result<Expr> {
        let mut subs = Vec::new();
        loop {
            match self.peek() {
                Some(Tok::Under) => {
                    self.pos += 1;
                    match self.next() {
                        Some(Tok::LBrace) => {
                            let g = self.group_tokens(Tok::LBrace, Tok::RBrace)?;
                            subs.extend(compact_subscripts(&g)?);
                        }
                        Some(Tok::Ident(s)) => subs.extend(split_compact(&s)),
                        Some(Tok::Num(x)) => subs.push(IndexExpr::Const(x as i64)),
                        other => return Err(ExprError::Syntax(format!("bad subscript {other:?}"))),
                    }
                }
                Some(Tok::LBrack) => {
                    self.pos += 1;
                    let g = self.group_tokens(Tok::LBrack, Tok::RBrack)?;
                    for part in split_top(&g, &Tok::Comma) {
                        subs.push(index_expr(&part)?);
                    }
                }
                Some(Tok::Caret) => {
                    self.pos += 1;
                    let sup = match self.next() {
                        Some(Tok::LBrace) => self.group_tokens(Tok::LBrace, Tok::RBrace)?,
                        Some(t) => vec![t],
                        None => return Err(ExprError::Syntax("dangling superscript".into())),
                    };
                    match sup.as_slice() {
                        [Tok::Ident(s)] => name = format!("{name}^{s}"),
                        [Tok::Plus] => name = format!("{name}^+"),
                        [Tok::Minus] => name = format!("{name}^-"),
                        _ => return Err(ExprError::Nonlinear(format!("power of `{name}`"))),
                    }
                }
                _ => break,
            }
        }
        Ok(Expr::Sym { name, subs })
    }

    fn sum_binders(&mut self) -> Result<Vec<Binder>> {
        if !matches!(self.peek(), Some(Tok::Under)) {
            return Err(ExprError::Syntax("sum without an index".into()));
        }
        self.pos += 1;
        let lower = match self.next() {
            Some(Tok::LBrace) => self.group_tokens(Tok::LBrace, Tok::RBrace)?,
            Some(t) => vec![t],
            None => return Err(ExprError::Syntax("sum without an index".into())),
        };
        let upper = if matches!(self.peek(), Some(Tok::Caret)) {
            self.pos += 1;
            Some(match self.next() {
                Some(Tok::LBrace) => self.group_tokens(Tok::LBrace, Tok::RBrace)?,
                Some(t) => vec![t],
                None => return Err(ExprError::Syntax("dangling sum bound".into())),
            })
        } else {
            None
        };
        let mut binders = Vec::new();
        for part in split_top(&lower, &Tok::Comma) {
            binders.extend(binder(&part)?);
        }
        if let Some(up) = upper {
            let hi = index_expr(&up)?;
            match binders.last_mut() {
                Some(Binder { range: Range::Interval(_, h), .. }) => *h = hi,
                Some(b) if b.range == Range::Full => b.range = Range::Interval(IndexExpr::Const(1), hi),
                _ => return Err(ExprError::Syntax("upper bound without lower bound".into())),
            }
        }
        Ok(binders)
    }
}

/// Split a token slice on a separator at nesting depth zero.
fn split_top(toks: &[Tok], sep: &Tok) -> Vec<Vec<Tok>> {
    let mut out = vec![Vec::new()];
    let mut depth = 0i32;
    for t in toks {
        match t {
            Tok::LBrace | Tok::LParen | Tok::LBrack | Tok::SetOpen => depth += 1,
            Tok::RBrace | Tok::RParen | Tok::RBrack | Tok::SetClose => depth -= 1,
            _ => {}
        }
        if depth == 0 && t == sep {
            out.push(Vec::new());
        } else {
            out.last_mut().unwrap().push(t.clone());
        }
    }
    out.retain(|p| !p.is_empty());
    out
}

fn split_compact(s: &str) -> Vec<IndexExpr> {
    if !s.chars().all(|c| c.is_ascii_lowercase() || c.is_ascii_digit()) {
        return vec![IndexExpr::Name(s.to_string(), 0)];
    }
    let chars: Vec<char> = s.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if chars[i].is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let n: String = chars[start..i].iter().collect();
            out.push(IndexExpr::Const(n.parse().unwrap_or(0)));
        } else {
            out.push(IndexExpr::Name(chars[i].to_string(), 0));
            i += 1;
        }
    }
    out
}

/// Subscript braces: `{i,t-1}` (comma form) or `{ij}`, `{i1}`, `{it-1}` (compact form).
fn compact_subscripts(g: &[Tok]) -> Result<Vec<IndexExpr>> {
    if g.contains(&Tok::Comma) {
        return split_top(g, &Tok::Comma).iter().map(|p| index_expr(p)).collect();
    }
    let mut out = Vec::new();
    let mut i = 0;
    while i < g.len() {
        match &g[i] {
            Tok::Ident(s) => out.extend(split_compact(s)),
            Tok::Num(x) => out.push(IndexExpr::Const(*x as i64)),
            Tok::Plus | Tok::Minus => {
                let sign = if g[i] == Tok::Minus { -1 } else { 1 };
                let Some(Tok::Num(x)) = g.get(i + 1) else {
                    return Err(ExprError::Syntax("bad subscript offset".into()));
                };
                match out.last_mut() {
                    Some(IndexExpr::Name(_, off)) => *off += sign * (*x as i64),
                    Some(IndexExpr::Const(c)) => *c += sign * (*x as i64),
                    None => return Err(ExprError::Syntax("bad subscript offset".into())),
                }
                i += 1;
            }
            other => return Err(ExprError::Syntax(format!("bad subscript token {other:?}"))),
        }
        i += 1;
    }
    Ok(out)
}

fn index_expr(toks: &[Tok]) -> Result<IndexExpr> {
    match toks {
        [Tok::Num(x)] => Ok(IndexExpr::Const(*x as i64)),
        [Tok::Minus, Tok::Num(x)] => Ok(IndexExpr::Const(-(*x as i64))),
        [Tok::Ident(s)] => Ok(IndexExpr::Name(s.clone(), 0)),
        [Tok::Ident(s), Tok::Plus, Tok::Num(x)] => Ok(IndexExpr::Name(s.clone(), *x as i64)),
        [Tok::Ident(s), Tok::Minus, Tok::Num(x)] => Ok(IndexExpr::Name(s.clone(), -(*x as i64))),
        _ => {
            let text: Vec<String> = toks
                .iter()
                .filter_map(|t| match t {
                    Tok::Ident(s) => Some(s.clone()),
                    Tok::Num(x) => Some(x.to_string()),
                    _ => None,
                })
                .collect();
            if !text.is_empty() && toks.iter().all(|t| matches!(t, Tok::Ident(_) | Tok::Num(_))) {
                Ok(IndexExpr::Name(text.join(" "), 0))
            } else {
                Err(ExprError::Syntax(format!("bad index {toks:?}")))
            }
        }
    }
}

fn set_range(toks: &[Tok]) -> Result<Range> {
    match toks {
        [Tok::SetOpen, inner @ .., Tok::SetClose] => {
            let parts = split_top(inner, &Tok::Comma);
            if parts.iter().any(|p| p.as_slice() == [Tok::Dots]) {
                let first = parts.first().ok_or_else(|| ExprError::Syntax("empty set".into()))?;
                let last = parts.last().unwrap();
                Ok(Range::Interval(index_expr(first)?, index_expr(last)?))
            } else {
                Ok(Range::List(parts.iter().map(|p| index_expr(p)).collect::<Result<_>>()?))
            }
        }
        [Tok::Ident(s)] => Ok(Range::Named(s.clone())),
        [Tok::Bb(_)] | [Tok::Bb(_), ..] => Ok(Range::Full),
        _ => Err(ExprError::Syntax(format!("bad index set {toks:?}"))),
    }
}

fn binder(part: &[Tok]) -> Result<Vec<Binder>> {
    match part {
        [Tok::Ident(s)] => Ok(split_compact(s)
            .into_iter()
            .filter_map(|e| match e {
                IndexExpr::Name(n, _) => Some(Binder { index: n, range: Range::Full }),
                IndexExpr::Const(_) => None,
            })
            .collect()),
        [Tok::Ident(s), Tok::In, rest @ ..] => Ok(vec![Binder { index: s.clone(), range: set_range(rest)? }]),
        [Tok::Ident(s), Tok::Rel(Rel::Eq), rest @ ..] => Ok(vec![Binder {
            index: s.clone(),
            range: Range::Interval(index_expr(rest)?, IndexExpr::Const(i64::MAX)),
        }]),
        _ => Err(ExprError::Syntax(format!("bad summation index {part:?}"))),
    }
}

fn quantifier(toks: &[Tok]) -> Result<Vec<Binder>> {
    let mut out = Vec::new();
    for part in split_top(toks, &Tok::Comma) {
        let part: Vec<Tok> = part.into_iter().filter(|t| !is_filler(t)).collect();
        if part.is_empty() {
            continue;
        }
        out.extend(binder(&part)?);
    }
    Ok(out)
}

fn is_filler(t: &Tok) -> bool {
    match t {
        Tok::Forall => true,
        Tok::Ident(s) => matches!(s.as_str(), "for" | "all" | "each" | "every"),
        _ => false,
    }
}

fn depth_positions(toks: &[Tok]) -> Vec<i32> {
    let mut d = 0;
    toks.iter()
        .map(|t| {
            let cur = d;
            match t {
                Tok::LBrace | Tok::LParen | Tok::LBrack | Tok::SetOpen => d += 1,
                Tok::RBrace | Tok::RParen | Tok::RBrack | Tok::SetClose => d -= 1,
                _ => {}
            }
            cur
        })
        .collect()
}

fn parse_domain(toks: &[Tok]) -> Result<Domain> {
    let inf = f64::INFINITY;
    let nonneg = |rest: &[Tok]| {
        rest.iter().any(|t| matches!(t, Tok::Plus | Tok::Rel(Rel::Ge)))
            || rest.iter().any(|t| matches!(t, Tok::Num(x) if *x == 0.0))
    };
    let kind = |kind, lower, upper| Ok(Domain::Kind { kind, lower, upper });
    match toks {
        [Tok::Bb('Z'), rest @ ..] => {
            if nonneg(rest) {
                kind(VarKind::Integer, 0.0, inf)
            } else {
                kind(VarKind::Integer, -inf, inf)
            }
        }
        [Tok::Bb('N'), ..] => kind(VarKind::Integer, 0.0, inf),
        [Tok::Bb('R'), rest @ ..] => {
            if nonneg(rest) {
                kind(VarKind::Continuous, 0.0, inf)
            } else {
                kind(VarKind::Continuous, -inf, inf)
            }
        }
        [Tok::SetOpen, Tok::Num(a), Tok::Comma, Tok::Num(b), Tok::SetClose] if *a == 0.0 && *b == 1.0 => {
            kind(VarKind::Binary, 0.0, 1.0)
        }
        [Tok::Ident(w), ..] => match w.to_ascii_lowercase().as_str() {
            "binary" => kind(VarKind::Binary, 0.0, 1.0),
            "integer" | "integers" | "int" => kind(VarKind::Integer, 0.0, inf),
            "continuous" | "real" => kind(VarKind::Continuous, 0.0, inf),
            _ => Err(ExprError::Syntax(format!("unknown domain `{w}`"))),
        },
        _ => Err(ExprError::Syntax(format!("unknown domain {toks:?}"))),
    }
}

/// Parse one math statement: a (possibly chained) relation or a domain declaration,
/// with an optional trailing quantifier.
pub(crate) fn parse_statement(text: &str) -> Result<Vec<Statement>> {
    let toks = tokenize(text)?;
    let depth = depth_positions(&toks);
    let forall = toks.iter().zip(&depth).position(|(t, d)| *d == 0 && *t == Tok::Forall);
    let (mut body, quant_toks): (Vec<Tok>, Vec<Tok>) = match forall {
        Some(p) => (toks[..p].to_vec(), toks[p + 1..].to_vec()),
        None => {
            // `..., t \in \{2,3\}` or `..., for t = 2..4` style trailing quantifier
            let last_rel = toks.iter().rposition(|t| matches!(t, Tok::Rel(_) | Tok::In));
            let mut split = None;
            if let Some(r) = last_rel {
                for k in r + 1..toks.len() {
                    if depth[k] == 0 && toks[k] == Tok::Comma {
                        let tail = &toks[k + 1..];
                        if tail.iter().any(|t| *t == Tok::In)
                            || tail.first().is_some_and(|t| matches!(t, Tok::Ident(s) if s == "for"))
                        {
                            split = Some(k);
                            break;
                        }
                    }
                }
            }
            match split {
                Some(k) => (toks[..k].to_vec(), toks[k + 1..].to_vec()),
                None => (toks.clone(), Vec::new()),
            }
        }
    };
    while matches!(body.last(), Some(Tok::Comma)) {
        body.pop();
    }
    let quant = quantifier(&quant_toks)?;
    let bdepth = depth_positions(&body);
    let in_pos = body.iter().zip(&bdepth).position(|(t, d)| *d == 0 && *t == Tok::In);
    let has_rel = body.iter().any(|t| matches!(t, Tok::Rel(_)));
    if let (Some(p), false) = (in_pos, has_rel) {
        let domain = parse_domain(&body[p + 1..])?;
        let mut out = Vec::new();
        for target in split_top(&body[..p], &Tok::Comma) {
            let mut parser = Parser::new(target);
            match parser.factor()? {
                Expr::Sym { name, subs } if parser.at_end() => out.push(Statement::Domain {
                    name,
                    subs,
                    domain,
                    quant: quant.clone(),
                }),
                _ => return Err(ExprError::Syntax("domain target must be a variable".into())),
            }
        }
        return Ok(out);
    }
    let mut parts: Vec<Vec<Tok>> = vec![Vec::new()];
    let mut rels = Vec::new();
    for (t, d) in body.iter().zip(&bdepth) {
        match t {
            Tok::Rel(r) if *d == 0 => {
                rels.push(*r);
                parts.push(Vec::new());
            }
            _ => parts.last_mut().unwrap().push(t.clone()),
        }
    }
    if rels.is_empty() {
        return Err(ExprError::Syntax("statement has no relation".into()));
    }
    let exprs: Vec<Expr> = parts.into_iter().map(Parser::sub_expr).collect::<Result<_>>()?;
    Ok(rels
        .iter()
        .enumerate()
        .map(|(k, r)| Statement::Relation {
            lhs: exprs[k].clone(),
            rel: *r,
            rhs: exprs[k + 1].clone(),
            quant: quant.clone(),
        })
        .collect())
}

/// Parse an objective line such as `\max \sum_i A_i x_i` or `Minimize Z = ...`.
pub(crate) fn parse_objective(text: &str) -> Result<(Option<super::ObjSense>, Expr)> {
    let mut toks = tokenize(text)?;
    let mut sense = None;
    let mut start = 0;
    while start < toks.len() {
        match &toks[start] {
            Tok::Ident(s) => match s.to_ascii_lowercase().as_str() {
                "max" | "maximize" | "maximise" | "maximum" => sense = Some(super::ObjSense::Maximize),
                "min" | "minimize" | "minimise" | "minimum" => sense = Some(super::ObjSense::Minimize),
                "z" | "obj" | "objective" | "total" if sense.is_some() => {}
                _ => break,
            },
            _ => break,
        }
        start += 1;
    }
    toks.drain(..start);
    let depth = depth_positions(&toks);
    if let Some(p) = toks.iter().zip(&depth).position(|(t, d)| *d == 0 && *t == Tok::Rel(Rel::Eq)) {
        toks.drain(..=p);
    }
    Ok((sense, Parser::sub_expr(toks)?))
}

/// Linear form over builder variable indices.
#[derive(Debug, Clone, Default)]
struct Lin {
    terms: BTreeMap<usize, f64>,
    constant: f64,
}

impl Lin {
    fn constant(c: f64) -> Self {
        Lin { terms: BTreeMap::new(), constant: c }
    }

    fn scale(mut self, k: f64) -> Self {
        for v in self.terms.values_mut() {
            *v *= k;
        }
        self.constant *= k;
        self
    }

    fn add(mut self, o: Lin) -> Self {
        for (k, v) in o.terms {
            *self.terms.entry(k).or_insert(0.0) += v;
        }
        self.constant += o.constant;
        self
    }

    fn as_constant(&self) -> Option<f64> {
        self.terms.values().all(|v| *v == 0.0).then_some(self.constant)
    }
}

/// Accumulates variables and rows while statements are evaluated.
pub(crate) struct Builder<'a> {
    pub params: &'a dyn ParamSource,
    pub var_bases: HashSet<String>,
    pub sizes: HashMap<String, usize>,
    pub variables: Vec<Variable>,
    index: HashMap<String, usize>,
    pub constraints: Vec<Constraint>,
    group_counts: HashMap<String, usize>,
}

type Env = Vec<(String, i64)>;

fn lookup(env: &Env, name: &str) -> Option<i64> {
    env.iter().rev().find(|(n, _)| n == name).map(|(_, v)| *v)
}

impl<'a> Builder<'a> {
    pub fn new(params: &'a dyn ParamSource) -> Self {
        Builder {
            params,
            var_bases: HashSet::new(),
            sizes: HashMap::new(),
            variables: Vec::new(),
            index: HashMap::new(),
            constraints: Vec::new(),
            group_counts: HashMap::new(),
        }
    }

    fn var(&mut self, name: String) -> usize {
        if let Some(&i) = self.index.get(&name) {
            return i;
        }
        let i = self.variables.len();
        self.index.insert(name.clone(), i);
        self.variables.push(Variable::continuous(name));
        i
    }

    fn resolve(&self, e: &IndexExpr, env: &Env) -> Result<IndexValue> {
        match e {
            IndexExpr::Const(c) => Ok(IndexValue::Int(*c)),
            IndexExpr::Name(n, off) => match lookup(env, n) {
                Some(v) => Ok(IndexValue::Int(v + off)),
                None if *off == 0 && !is_simple_index(n) => Ok(IndexValue::Label(n.clone())),
                None => Err(ExprError::UnboundIndex(n.clone())),
            },
        }
    }

    fn bound(&self, e: &IndexExpr, env: &Env) -> Result<i64> {
        match e {
            IndexExpr::Const(c) => Ok(*c),
            IndexExpr::Name(n, off) => {
                if let Some(v) = lookup(env, n) {
                    return Ok(v + off);
                }
                if self.params.dims(n).is_some_and(|d| d.is_empty()) {
                    return Ok(self.params.value(n, &[])? as i64 + off);
                }
                Err(ExprError::UnboundIndex(n.clone()))
            }
        }
    }

    fn range_values(&self, b: &Binder, env: &Env) -> Result<Vec<i64>> {
        let full = || {
            self.sizes
                .get(&b.index)
                .map(|&n| (1..=n as i64).collect())
                .ok_or_else(|| ExprError::UnknownIndexRange(b.index.clone()))
        };
        match &b.range {
            Range::Full | Range::Named(_) => full(),
            Range::List(items) => items.iter().map(|e| self.bound(e, env)).collect(),
            Range::Interval(lo, hi) => {
                let lo = self.bound(lo, env)?;
                let hi = if *hi == IndexExpr::Const(i64::MAX) {
                    *self.sizes.get(&b.index).ok_or_else(|| ExprError::UnknownIndexRange(b.index.clone()))? as i64
                } else {
                    self.bound(hi, env)?
                };
                Ok((lo..=hi).collect())
            }
        }
    }

    fn eval(&mut self, e: &Expr, env: &mut Env) -> Result<Lin> {
        match e {
            Expr::Num(x) => Ok(Lin::constant(*x)),
            Expr::Neg(x) => Ok(self.eval(x, env)?.scale(-1.0)),
            Expr::Add(xs) => {
                let mut acc = Lin::default();
                for x in xs {
                    acc = acc.add(self.eval(x, env)?);
                }
                Ok(acc)
            }
            Expr::Mul(a, b) => {
                let la = self.eval(a, env)?;
                let lb = self.eval(b, env)?;
                match (la.as_constant(), lb.as_constant()) {
                    (Some(k), _) => Ok(lb.scale(k)),
                    (_, Some(k)) => Ok(la.scale(k)),
                    _ => Err(ExprError::Nonlinear(format!("{a:?} * {b:?}"))),
                }
            }
            Expr::Div(a, b) => {
                let la = self.eval(a, env)?;
                match self.eval(b, env)?.as_constant() {
                    Some(k) if k != 0.0 => Ok(la.scale(1.0 / k)),
                    _ => Err(ExprError::BadDivisor),
                }
            }
            Expr::Sum { binders, body } => self.eval_sum(binders, body, env),
            Expr::Sym { name, subs } => {
                if subs.is_empty() {
                    if let Some(v) = lookup(env, name) {
                        return Ok(Lin::constant(v as f64));
                    }
                }
                let idx: Vec<IndexValue> = subs.iter().map(|s| self.resolve(s, env)).collect::<Result<_>>()?;
                if self.params.dims(name).is_some() {
                    return Ok(Lin::constant(self.params.value(name, &idx)?));
                }
                if self.var_bases.contains(name) {
                    let inst = instance_name(name, &idx);
                    let i = self.var(inst);
                    let mut l = Lin::default();
                    l.terms.insert(i, 1.0);
                    return Ok(l);
                }
                Err(ExprError::UnboundSymbol(name.clone()))
            }
        }
    }

    fn eval_sum(&mut self, binders: &[Binder], body: &Expr, env: &mut Env) -> Result<Lin> {
        let Some((first, rest)) = binders.split_first() else {
            return self.eval(body, env);
        };
        let mut acc = Lin::default();
        for v in self.range_values(first, env)? {
            env.push((first.index.clone(), v));
            let r = self.eval_sum(rest, body, env);
            env.pop();
            acc = acc.add(r?);
        }
        Ok(acc)
    }

    /// Evaluate `e` once per assignment of `binders`, calling `f` with each result.
    fn for_each<F>(&mut self, binders: &[Binder], env: &mut Env, f: &mut F) -> Result<()>
    where
        F: FnMut(&mut Self, &mut Env) -> Result<()>,
    {
        let Some((first, rest)) = binders.split_first() else {
            return f(self, env);
        };
        for v in self.range_values(first, env)? {
            env.push((first.index.clone(), v));
            let r = self.for_each(rest, env, f);
            env.pop();
            r?;
        }
        Ok(())
    }

    pub fn objective(&mut self, e: &Expr) -> Result<LinearExpr> {
        let free = free_indices(e, &HashSet::new());
        if let Some(f) = free.first() {
            return Err(ExprError::UnboundIndex(f.clone()));
        }
        let lin = self.eval(e, &mut Vec::new())?;
        Ok(self.to_expr(&lin))
    }

    fn to_expr(&self, lin: &Lin) -> LinearExpr {
        LinearExpr {
            terms: lin
                .terms
                .iter()
                .filter(|(_, c)| **c != 0.0)
                .map(|(i, c)| (*c, self.variables[*i].name.clone()))
                .collect(),
            constant: lin.constant,
        }
    }

    fn with_implicit(&self, quant: &[Binder], exprs: &[&Expr], extra: &[IndexExpr]) -> Vec<Binder> {
        let mut bound: HashSet<String> = quant.iter().map(|b| b.index.clone()).collect();
        let mut all = quant.to_vec();
        let mut free = Vec::new();
        for e in exprs {
            free.extend(free_indices(e, &bound));
        }
        for s in extra {
            if let IndexExpr::Name(n, _) = s {
                if is_simple_index(n) && !bound.contains(n) {
                    free.push(n.clone());
                }
            }
        }
        for f in free {
            if bound.insert(f.clone()) {
                all.push(Binder { index: f, range: Range::Full });
            }
        }
        all
    }

    pub fn statement(&mut self, s: &Statement, group: &str) -> Result<()> {
        match s {
            Statement::Relation { lhs, rel, rhs, quant } => {
                let binders = self.with_implicit(quant, &[lhs, rhs], &[]);
                let group = group.to_string();
                self.for_each(&binders, &mut Vec::new(), &mut |b, env| {
                    let diff = b.eval(lhs, env)?.add(b.eval(rhs, env)?.scale(-1.0));
                    b.push_relation(diff, *rel, &group, lhs, rhs)
                })
            }
            Statement::Domain { name, subs, domain, quant } => {
                let binders = self.with_implicit(quant, &[], subs);
                let Domain::Kind { kind, lower, upper } = *domain;
                self.for_each(&binders, &mut Vec::new(), &mut |b, env| {
                    let idx: Vec<IndexValue> = subs.iter().map(|s| b.resolve(s, env)).collect::<Result<_>>()?;
                    let i = b.var(instance_name(name, &idx));
                    let v = &mut b.variables[i];
                    v.kind = kind;
                    v.lower = lower;
                    v.upper = upper;
                    Ok(())
                })
            }
        }
    }

    fn push_relation(&mut self, diff: Lin, rel: Rel, group: &str, lhs: &Expr, rhs: &Expr) -> Result<()> {
        let terms: Vec<(usize, f64)> = diff.terms.iter().filter(|(_, c)| **c != 0.0).map(|(i, c)| (*i, *c)).collect();
        let rhs_val = -diff.constant;
        if terms.is_empty() {
            let ok = match rel {
                Rel::Le => 0.0 <= rhs_val + 1e-9,
                Rel::Ge => 0.0 >= rhs_val - 1e-9,
                Rel::Eq => rhs_val.abs() <= 1e-9,
            };
            return if ok {
                Ok(())
            } else {
                Err(ExprError::FalseConstantRelation(format!("{lhs:?} vs {rhs:?}")))
            };
        }
        // `x >= 0` / `0 <= x` on a single variable is a bound, not a row.
        if terms.len() == 1 && rhs_val == 0.0 {
            let (i, c) = terms[0];
            let nonneg = (rel == Rel::Ge && c > 0.0) || (rel == Rel::Le && c < 0.0);
            if nonneg {
                let v = &mut self.variables[i];
                v.lower = v.lower.max(0.0);
                return Ok(());
            }
        }
        let sense = match rel {
            Rel::Le => RowSense::Le,
            Rel::Ge => RowSense::Ge,
            Rel::Eq => RowSense::Eq,
        };
        let n = self.group_counts.entry(group.to_string()).or_insert(0);
        *n += 1;
        let name = format!("{group}_{n}");
        let expr = LinearExpr {
            terms: terms.iter().map(|(i, c)| (*c, self.variables[*i].name.clone())).collect(),
            constant: 0.0,
        };
        self.constraints.push(Constraint::new(name, expr, sense, rhs_val));
        Ok(())
    }
}

fn instance_name(base: &str, idx: &[IndexValue]) -> String {
    let base: String = base
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' })
        .collect();
    if idx.is_empty() {
        base
    } else {
        let parts: Vec<String> = idx.iter().map(IndexValue::render).collect();
        format!("{base}_{}", parts.join("_"))
    }
}

/// Simple index names used in subscripts but not bound by an enclosing sum or `bound`.
fn free_indices(e: &Expr, bound: &HashSet<String>) -> Vec<String> {
    fn walk(e: &Expr, bound: &mut Vec<String>, base: &HashSet<String>, out: &mut Vec<String>) {
        match e {
            Expr::Num(_) => {}
            Expr::Sym { subs, .. } => {
                for s in subs {
                    if let IndexExpr::Name(n, _) = s {
                        if is_simple_index(n) && !bound.contains(n) && !base.contains(n) && !out.contains(n) {
                            out.push(n.clone());
                        }
                    }
                }
            }
            Expr::Neg(x) => walk(x, bound, base, out),
            Expr::Add(xs) => xs.iter().for_each(|x| walk(x, bound, base, out)),
            Expr::Mul(a, b) | Expr::Div(a, b) => {
                walk(a, bound, base, out);
                walk(b, bound, base, out);
            }
            Expr::Sum { binders, body } => {
                let k = bound.len();
                for b in binders {
                    if let Range::Interval(lo, hi) = &b.range {
                        for x in [lo, hi] {
                            if let IndexExpr::Name(n, _) = x {
                                if is_simple_index(n) && !bound.contains(n) && !base.contains(n) && !out.contains(n) {
                                    out.push(n.clone());
                                }
                            }
                        }
                    }
                    bound.push(b.index.clone());
                }
                walk(body, bound, base, out);
                bound.truncate(k);
            }
        }
    }
    let mut out = Vec::new();
    walk(e, &mut Vec::new(), bound, &mut out);
    out
}

/// Infer index ranges from the shapes of the data each index subscripts.
pub(crate) fn infer_sizes(
    exprs: &[&Expr],
    params: &dyn ParamSource,
    sizes: &mut HashMap<String, usize>,
) -> Result<()> {
    let mut origin: HashMap<String, String> = HashMap::new();
    fn walk(
        e: &Expr,
        params: &dyn ParamSource,
        sizes: &mut HashMap<String, usize>,
        origin: &mut HashMap<String, String>,
    ) -> Result<()> {
        match e {
            Expr::Num(_) => Ok(()),
            Expr::Sym { name, subs } => {
                let Some(dims) = params.dims(name) else { return Ok(()) };
                for (k, s) in subs.iter().enumerate() {
                    let (IndexExpr::Name(n, 0), Some(&len)) = (s, dims.get(k)) else { continue };
                    if !is_simple_index(n) {
                        continue;
                    }
                    match sizes.get(n) {
                        Some(&prev) if prev != len => {
                            return Err(ExprError::LengthMismatch {
                                index: n.clone(),
                                first: origin.get(n).cloned().unwrap_or_else(|| "declared range".into()),
                                first_len: prev,
                                second: name.clone(),
                                second_len: len,
                            })
                        }
                        Some(_) => {}
                        None => {
                            sizes.insert(n.clone(), len);
                            origin.insert(n.clone(), name.clone());
                        }
                    }
                }
                Ok(())
            }
            Expr::Neg(x) => walk(x, params, sizes, origin),
            Expr::Add(xs) => xs.iter().try_for_each(|x| walk(x, params, sizes, origin)),
            Expr::Mul(a, b) | Expr::Div(a, b) => {
                walk(a, params, sizes, origin)?;
                walk(b, params, sizes, origin)
            }
            Expr::Sum { body, .. } => walk(body, params, sizes, origin),
        }
    }
    for e in exprs {
        walk(e, params, sizes, &mut origin)?;
    }
    Ok(())
}

/// Symbols that never carry data and are not bound indices; candidates for variables.
pub(crate) fn symbol_bases(e: &Expr, out: &mut Vec<String>) {
    match e {
        Expr::Num(_) => {}
        Expr::Sym { name, .. } => {
            if !out.contains(name) {
                out.push(name.clone());
            }
        }
        Expr::Neg(x) => symbol_bases(x, out),
        Expr::Add(xs) => xs.iter().for_each(|x| symbol_bases(x, out)),
        Expr::Mul(a, b) | Expr::Div(a, b) => {
            symbol_bases(a, out);
            symbol_bases(b, out);
        }
        Expr::Sum { body, .. } => symbol_bases(body, out),
    }
}

/// True when a relation is `var >= 0` on a lone symbol (a non-negativity declaration).
pub(crate) fn nonneg_target(s: &Statement) -> Option<&str> {
    if let Statement::Relation { lhs, rel, rhs, .. } = s {
        match (lhs, rel, rhs) {
            (Expr::Sym { name, .. }, Rel::Ge, Expr::Num(z)) | (Expr::Num(z), Rel::Le, Expr::Sym { name, .. })
                if *z == 0.0 =>
            {
                return Some(name);
            }
            _ => {}
        }
    }
    None
}

/// Evaluate one statement into the builder under a row-name group.
pub(crate) fn eval_statement_into(b: &mut Builder<'_>, s: &Statement, group: &str) -> Result<()> {
    b.statement(s, group)
}
