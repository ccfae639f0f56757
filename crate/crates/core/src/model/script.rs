//! Plain-text solver script rendering (Python / gurobipy flavour).

use super::{LinearExpr, LinearModel, ObjSense, RowSense, VarKind};
use std::fmt::Write as _;

fn py_num(x: f64) -> String {
    if x == f64::INFINITY {
        "GRB.INFINITY".into()
    } else if x == f64::NEG_INFINITY {
        "-GRB.INFINITY".into()
    } else {
        format!("{x:?}")
    }
}

fn py_expr(e: &LinearExpr) -> String {
    let mut parts: Vec<String> = e.terms.iter().map(|(c, v)| format!("{} * v[{v:?}]", py_num(*c))).collect();
    if e.constant != 0.0 || parts.is_empty() {
        parts.push(py_num(e.constant));
    }
    parts.join(" + ")
}

/// Render `model` as a standalone script for an external solver. The text is
/// not executed anywhere in this crate.
pub fn emit_solver_script(model: &LinearModel) -> String {
    let mut s = String::new();
    s.push_str("import gurobipy as gp\nfrom gurobipy import GRB\n\n");
    let name = model.metadata.get("instance").map_or("model", String::as_str);
    let _ = writeln!(s, "m = gp.Model({name:?})");
    s.push_str("m.Params.MIPGap = 1e-4\nv = {}\n");
    for var in &model.variables {
        let vt = match var.kind {
            VarKind::Continuous => "GRB.CONTINUOUS",
            VarKind::Integer => "GRB.INTEGER",
            VarKind::Binary => "GRB.BINARY",
        };
        let _ = writeln!(
            s,
            "v[{n:?}] = m.addVar(lb={}, ub={}, vtype={vt}, name={n:?})",
            py_num(var.lower),
            py_num(var.upper),
            n = var.name
        );
    }
    let sense = match model.sense {
        ObjSense::Maximize => "GRB.MAXIMIZE",
        ObjSense::Minimize => "GRB.MINIMIZE",
    };
    let _ = writeln!(s, "m.setObjective({}, {sense})", py_expr(&model.objective));
    for c in &model.constraints {
        let op = match c.sense {
            RowSense::Le => "<=",
            RowSense::Ge => ">=",
            RowSense::Eq => "==",
        };
        let _ = writeln!(s, "m.addConstr({} {op} {}, name={:?})", py_expr(&c.expr), py_num(c.rhs), c.name);
    }
    s.push_str("m.optimize()\nif m.Status == GRB.OPTIMAL:\n    print(\"Optimal value:\", m.ObjVal)\n");
    s
}
