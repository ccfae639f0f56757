//! Linear / mixed-integer model representation.

mod canonical;
mod expr;
mod grammar;
mod lp;
mod script;

pub use canonical::{
    canonicalize, canonicalize_with, compare_models, models_equivalent, CanonConfig, CanonError,
    CanonicalForm, EmVerdict, VarMapping,
};
pub use expr::{ExprError, IndexValue, ParamValue, Params};
pub use grammar::{parse_model_grammar, split_sections, GrammarError, Sections};
pub use lp::{read_lp, write_lp, LpError};
pub use script::emit_solver_script;


use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

/// Variable domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarKind {
    Continuous,
    Integer,
    Binary,
}

impl VarKind {
    pub fn is_integral(self) -> bool {
        !matches!(self, VarKind::Continuous)
    }
}

/// Decision variable with bounds. Infinite bounds serialize as the strings `"inf"` / `"-inf"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    #[serde(with = "bound_serde")]
    pub lower: f64,
    #[serde(with = "bound_serde")]
    pub upper: f64,
    pub kind: VarKind,
}

impl Variable {
    pub fn continuous(name: impl Into<String>) -> Self {
        Variable { name: name.into(), lower: 0.0, upper: f64::INFINITY, kind: VarKind::Continuous }
    }

    pub fn integer(name: impl Into<String>) -> Self {
        Variable { name: name.into(), lower: 0.0, upper: f64::INFINITY, kind: VarKind::Integer }
    }

    pub fn binary(name: impl Into<String>) -> Self {
        Variable { name: name.into(), lower: 0.0, upper: 1.0, kind: VarKind::Binary }
    }

    pub fn free(name: impl Into<String>) -> Self {
        Variable {
            name: name.into(),
            lower: f64::NEG_INFINITY,
            upper: f64::INFINITY,
            kind: VarKind::Continuous,
        }
    }

    pub fn with_bounds(mut self, lower: f64, upper: f64) -> Self {
        self.lower = lower;
        self.upper = upper;
        self
    }
}

/// `Σ coef·var + constant`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LinearExpr {
    pub terms: Vec<(f64, String)>,
    #[serde(default)]
    pub constant: f64,
}

impl LinearExpr {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_terms<S: Into<String>>(terms: impl IntoIterator<Item = (f64, S)>) -> Self {
        LinearExpr {
            terms: terms.into_iter().map(|(c, v)| (c, v.into())).collect(),
            constant: 0.0,
        }
    }

    pub fn term(mut self, coef: f64, var: impl Into<String>) -> Self {
        self.terms.push((coef, var.into()));
        self
    }

    pub fn with_constant(mut self, constant: f64) -> Self {
        self.constant = constant;
        self
    }

    /// Merge repeated variables (first-occurrence order) and drop exact zeros.
    pub fn normalized(&self) -> LinearExpr {
        let mut order: Vec<String> = Vec::new();
        let mut acc: HashMap<&str, f64> = HashMap::new();
        for (c, v) in &self.terms {
            match acc.get_mut(v.as_str()) {
                Some(x) => *x += c,
                None => {
                    acc.insert(v.as_str(), *c);
                    order.push(v.clone());
                }
            }
        }
        let terms = order
            .into_iter()
            .filter_map(|v| {
                let c = acc[v.as_str()];
                (c != 0.0).then_some((c, v))
            })
            .collect();
        LinearExpr { terms, constant: self.constant }
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn evaluate(&self, values: &BTreeMap<String, f64>) -> f64 {
        self.constant
            + self
                .terms
                .iter()
                .map(|(c, v)| c * values.get(v).copied().unwrap_or(0.0))
                .sum::<f64>()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RowSense {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "=")]
    Eq,
}

impl RowSense {
    pub fn symbol(self) -> &'static str {
        match self {
            RowSense::Le => "<=",
            RowSense::Ge => ">=",
            RowSense::Eq => "=",
        }
    }

    pub fn flipped(self) -> RowSense {
        match self {
            RowSense::Le => RowSense::Ge,
            RowSense::Ge => RowSense::Le,
            RowSense::Eq => RowSense::Eq,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub name: String,
    pub expr: LinearExpr,
    pub sense: RowSense,
    pub rhs: f64,
}

impl Constraint {
    pub fn new(name: impl Into<String>, expr: LinearExpr, sense: RowSense, rhs: f64) -> Self {
        Constraint { name: name.into(), expr, sense, rhs }
    }

    /// Signed violation amount at `values` (0 when satisfied).
    pub fn violation(&self, values: &BTreeMap<String, f64>) -> f64 {
        let lhs = self.expr.evaluate(values);
        match self.sense {
            RowSense::Le => (lhs - self.rhs).max(0.0),
            RowSense::Ge => (self.rhs - lhs).max(0.0),
            RowSense::Eq => (lhs - self.rhs).abs(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjSense {
    Maximize,
    Minimize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub sense: ObjSense,
    pub objective: LinearExpr,
    pub variables: Vec<Variable>,
    pub constraints: Vec<Constraint>,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

impl LinearModel {
    pub fn new(sense: ObjSense) -> Self {
        LinearModel {
            sense,
            objective: LinearExpr::new(),
            variables: Vec::new(),
            constraints: Vec::new(),
            metadata: BTreeMap::new(),
        }
    }

    pub fn add_variable(&mut self, v: Variable) -> &mut Self {
        self.variables.push(v);
        self
    }

    pub fn add_constraint(&mut self, c: Constraint) -> &mut Self {
        self.constraints.push(c);
        self
    }

    pub fn variable_index(&self) -> HashMap<&str, usize> {
        self.variables.iter().enumerate().map(|(i, v)| (v.name.as_str(), i)).collect()
    }

    pub fn variable(&self, name: &str) -> Option<&Variable> {
        self.variables.iter().find(|v| v.name == name)
    }

    pub fn is_mip(&self) -> bool {
        self.variables.iter().any(|v| v.kind.is_integral())
    }

    /// Largest bound, row, or integrality violation of `values`.
    pub fn max_violation(&self, values: &BTreeMap<String, f64>) -> f64 {
        let mut worst: f64 = 0.0;
        for v in &self.variables {
            let x = values.get(&v.name).copied().unwrap_or(0.0);
            worst = worst.max(v.lower - x).max(x - v.upper);
            if v.kind.is_integral() {
                worst = worst.max((x - x.round()).abs());
            }
        }
        for c in &self.constraints {
            worst = worst.max(c.violation(values));
        }
        worst
    }

    /// Rename variables everywhere; names absent from `map` keep their name.
    pub fn renamed(&self, map: &HashMap<String, String>) -> LinearModel {
        let r = |s: &String| map.get(s).cloned().unwrap_or_else(|| s.clone());
        let re = |e: &LinearExpr| LinearExpr {
            terms: e.terms.iter().map(|(c, v)| (*c, r(v))).collect(),
            constant: e.constant,
        };
        LinearModel {
            sense: self.sense,
            objective: re(&self.objective),
            variables: self
                .variables
                .iter()
                .map(|v| Variable { name: r(&v.name), ..v.clone() })
                .collect(),
            constraints: self
                .constraints
                .iter()
                .map(|c| Constraint { expr: re(&c.expr), ..c.clone() })
                .collect(),
            metadata: self.metadata.clone(),
        }
    }

    /// Copy with every integral variable relaxed to continuous (binary keeps its [0,1] box).
    pub fn relaxed(&self) -> LinearModel {
        let mut m = self.clone();
        for v in &mut m.variables {
            v.kind = VarKind::Continuous;
        }
        m
    }
}

/// A single validation failure.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Defect {
    DuplicateVariable { variable: String },
    InvalidBounds { variable: String },
    BinaryBounds { variable: String },
    UndeclaredVariable { variable: String, location: String },
    NonFiniteCoefficient { variable: String, location: String },
    NonFiniteConstant { location: String },
    NonFiniteRhs { constraint: String },
    EmptyConstraint { constraint: String },
}

impl fmt::Display for Defect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Defect::DuplicateVariable { variable } => {
                write!(f, "variable `{variable}` declared more than once")
            }
            Defect::InvalidBounds { variable } => {
                write!(f, "variable `{variable}` has lower bound above upper bound or NaN bound")
            }
            Defect::BinaryBounds { variable } => {
                write!(f, "binary variable `{variable}` has bounds outside [0, 1]")
            }
            Defect::UndeclaredVariable { variable, location } => {
                write!(f, "{location} references undeclared variable `{variable}`")
            }
            Defect::NonFiniteCoefficient { variable, location } => {
                write!(f, "{location} has a non-finite coefficient on `{variable}`")
            }
            Defect::NonFiniteConstant { location } => {
                write!(f, "{location} has a non-finite constant")
            }
            Defect::NonFiniteRhs { constraint } => {
                write!(f, "constraint `{constraint}` has a non-finite right-hand side")
            }
            Defect::EmptyConstraint { constraint } => {
                write!(f, "constraint `{constraint}` has no terms")
            }
        }
    }
}

/// Check every structural invariant; an empty list means the model is well formed.
pub fn validate(model: &LinearModel) -> Vec<Defect> {
    let mut defects = Vec::new();
    let mut seen = HashSet::new();
    for v in &model.variables {
        if !seen.insert(v.name.as_str()) {
            defects.push(Defect::DuplicateVariable { variable: v.name.clone() });
        }
        if v.lower.is_nan() || v.upper.is_nan() || v.lower > v.upper {
            defects.push(Defect::InvalidBounds { variable: v.name.clone() });
        } else if v.kind == VarKind::Binary && (v.lower < 0.0 || v.upper > 1.0) {
            defects.push(Defect::BinaryBounds { variable: v.name.clone() });
        }
    }
    let check_expr = |e: &LinearExpr, location: String, defects: &mut Vec<Defect>| {
        for (c, v) in &e.terms {
            if !seen.contains(v.as_str()) {
                defects.push(Defect::UndeclaredVariable {
                    variable: v.clone(),
                    location: location.clone(),
                });
            }
            if !c.is_finite() {
                defects.push(Defect::NonFiniteCoefficient {
                    variable: v.clone(),
                    location: location.clone(),
                });
            }
        }
        if !e.constant.is_finite() {
            defects.push(Defect::NonFiniteConstant { location });
        }
    };
    check_expr(&model.objective, "objective".to_string(), &mut defects);
    for c in &model.constraints {
        check_expr(&c.expr, format!("constraint `{}`", c.name), &mut defects);
        if !c.rhs.is_finite() {
            defects.push(Defect::NonFiniteRhs { constraint: c.name.clone() });
        }
        if c.expr.terms.is_empty() {
            defects.push(Defect::EmptyConstraint { constraint: c.name.clone() });
        }
    }
    defects
}

mod bound_serde {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if *v == f64::INFINITY {
            s.serialize_str("inf")
        } else if *v == f64::NEG_INFINITY {
            s.serialize_str("-inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Raw::deserialize(d)? {
            Raw::Num(x) => Ok(x),
            Raw::Text(t) => match t.as_str() {
                "inf" | "+inf" | "infinity" => Ok(f64::INFINITY),
                "-inf" | "-infinity" => Ok(f64::NEG_INFINITY),
                other => Err(de::Error::custom(format!("invalid bound `{other}`"))),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_var() -> LinearModel {
        let mut m = LinearModel::new(ObjSense::Maximize);
        m.objective = LinearExpr::from_terms([(1.0, "x"), (2.0, "y")]);
        m.add_variable(Variable::continuous("x")).add_variable(Variable::continuous("y"));
        m.add_constraint(Constraint::new(
            "cap",
            LinearExpr::from_terms([(1.0, "x"), (1.0, "y")]),
            RowSense::Le,
            4.0,
        ));
        m
    }

    #[test]
    fn well_formed_has_no_defects() {
        assert!(validate(&two_var()).is_empty());
    }

    #[test]
    fn undeclared_variable_is_reported() {
        let mut m = two_var();
        m.constraints[0].expr.terms.push((1.0, "z".into()));
        let d = validate(&m);
        assert_eq!(d.len(), 1);
        assert!(matches!(&d[0], Defect::UndeclaredVariable { variable, .. } if variable == "z"));
    }

    #[test]
    fn nan_coefficient_is_reported() {
        let mut m = two_var();
        m.objective.terms[0].0 = f64::NAN;
        let d = validate(&m);
        assert_eq!(d, vec![Defect::NonFiniteCoefficient {
            variable: "x".into(),
            location: "objective".into()
        }]);
    }

    #[test]
    fn bound_and_binary_defects() {
        let mut m = two_var();
        m.variables[0].lower = 3.0;
        m.variables[0].upper = 1.0;
        m.add_variable(Variable::binary("b").with_bounds(0.0, 2.0));
        m.add_variable(Variable::continuous("b"));
        let d = validate(&m);
        assert!(d.contains(&Defect::InvalidBounds { variable: "x".into() }));
        assert!(d.contains(&Defect::BinaryBounds { variable: "b".into() }));
        assert!(d.contains(&Defect::DuplicateVariable { variable: "b".into() }));
    }

    #[test]
    fn empty_row_and_infinite_rhs() {
        let mut m = two_var();
        m.add_constraint(Constraint::new("e", LinearExpr::new(), RowSense::Le, f64::INFINITY));
        let d = validate(&m);
        assert!(d.contains(&Defect::EmptyConstraint { constraint: "e".into() }));
        assert!(d.contains(&Defect::NonFiniteRhs { constraint: "e".into() }));
    }

    #[test]
    fn normalization_merges_and_drops_zeros() {
        let e = LinearExpr::from_terms([(1.0, "x"), (2.0, "y"), (-1.0, "x"), (3.0, "y")]);
        assert_eq!(e.normalized().terms, vec![(5.0, "y".to_string())]);
    }

    #[test]
    fn infinite_bounds_round_trip_json() {
        let v = Variable::free("f");
        let s = serde_json::to_string(&v).unwrap();
        assert!(s.contains("\"-inf\""));
        let back: Variable = serde_json::from_str(&s).unwrap();
        assert_eq!(back, v);
    }
}
