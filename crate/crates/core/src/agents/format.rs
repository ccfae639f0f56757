//! Type-aware rendering of retrieved CSV rows for the model-generation agent.

use crate::refdata::ProblemType;
use crate::retrieval::{render_tables, CsvTable};
use std::fmt::Write;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FormatError {
    #[error("{ptype} data needs a {what}")]
    Missing { ptype: ProblemType, what: &'static str },
    #[error("{file}: non-numeric cell {value:?} in column `{column}`")]
    NonNumeric { file: String, column: String, value: String },
}

/// Numeric cell value; tolerates a leading currency sign and thousands separators.
pub fn parse_number(cell: &str) -> Option<f64> {
    let t = cell.trim().trim_start_matches('$').replace(',', "");
    if t.is_empty() {
        return None;
    }
    t.parse::<f64>().ok().filter(|x| x.is_finite())
}

/// Columns whose non-empty cells all parse as numbers (and with at least one such cell).
pub fn numeric_columns(t: &CsvTable) -> Vec<usize> {
    (0..t.headers.len())
        .filter(|&c| {
            let mut seen = false;
            for r in &t.rows {
                let cell = r[c].trim();
                if cell.is_empty() {
                    continue;
                }
                if parse_number(cell).is_none() {
                    return false;
                }
                seen = true;
            }
            seen
        })
        .collect()
}

fn header_has(t: &CsvTable, words: &[&str]) -> bool {
    t.headers.iter().any(|h| {
        let h = h.to_lowercase();
        words.iter().any(|w| h.contains(w))
    })
}

const MATRIX_FILE_WORDS: [&str; 5] = ["cost", "distance", "matrix", "shipping", "tariff"];

fn is_matrix_file(t: &CsvTable) -> bool {
    let n = t.name.to_lowercase();
    MATRIX_FILE_WORDS.iter().any(|w| n.contains(w))
}

struct Matrix {
    name: String,
    rows: Vec<String>,
    cols: Vec<String>,
    cells: Vec<Vec<String>>,
}

impl Matrix {
    /// Wide layout: first non-numeric column labels rows, numeric columns are
    /// the matrix. Long layout (two label columns plus one value) is pivoted.
    fn from_table(t: &CsvTable) -> Result<Option<Matrix>, FormatError> {
        let num = numeric_columns(t);
        let labels: Vec<usize> = (0..t.headers.len()).filter(|c| !num.contains(c)).collect();
        if labels.len() == 2 && num.len() == 1 && t.rows.len() > 1 {
            let (a, b, v) = (labels[0], labels[1], num[0]);
            let mut rows: Vec<String> = Vec::new();
            let mut cols: Vec<String> = Vec::new();
            for r in &t.rows {
                if !rows.contains(&r[a]) {
                    rows.push(r[a].clone());
                }
                if !cols.contains(&r[b]) {
                    cols.push(r[b].clone());
                }
            }
            let mut cells = vec![vec![String::new(); cols.len()]; rows.len()];
            for r in &t.rows {
                let i = rows.iter().position(|x| *x == r[a]).unwrap_or(0);
                let j = cols.iter().position(|x| *x == r[b]).unwrap_or(0);
                cells[i][j] = r[v].clone();
            }
            if cells.iter().flatten().any(String::is_empty) {
                return Ok(None);
            }
            return Ok(Some(Matrix { name: t.name.clone(), rows, cols, cells }));
        }
        let label = (!num.contains(&0)).then_some(0);
        let data: Vec<usize> = (0..t.headers.len()).filter(|&c| Some(c) != label).collect();
        if data.is_empty() || t.rows.is_empty() {
            return Ok(None);
        }
        check_numeric(t, &data)?;
        let rows = match label {
            Some(l) => t.rows.iter().map(|r| r[l].clone()).collect(),
            None => (1..=t.rows.len()).map(|i| i.to_string()).collect(),
        };
        Ok(Some(Matrix {
            name: t.name.clone(),
            rows,
            cols: data.iter().map(|&c| t.headers[c].clone()).collect(),
            cells: t.rows.iter().map(|r| data.iter().map(|&c| r[c].clone()).collect()).collect(),
        }))
    }

    fn render(&self, out: &mut String) {
        let _ = writeln!(out, "rows: {}", self.rows.join(", "));
        let _ = writeln!(out, "columns: {}", self.cols.join(", "));
        for r in &self.cells {
            let _ = writeln!(out, "[{}]", r.join(", "));
        }
    }
}

fn render_plain(t: &CsvTable, out: &mut String) {
    let _ = writeln!(out, "{}", t.headers.join(", "));
    for r in &t.rows {
        let _ = writeln!(out, "{}", r.join(", "));
    }
}

fn check_numeric(t: &CsvTable, cols: &[usize]) -> Result<(), FormatError> {
    for &c in cols {
        for r in &t.rows {
            if !r[c].trim().is_empty() && parse_number(&r[c]).is_none() {
                return Err(FormatError::NonNumeric { file: t.name.clone(), column: t.headers[c].clone(), value: r[c].clone() });
            }
        }
    }
    Ok(())
}

fn cost_matrix(ptype: ProblemType, tables: &[CsvTable]) -> Result<(usize, Matrix), FormatError> {
    let missing = FormatError::Missing { ptype, what: "cost matrix table" };
    let idx = tables
        .iter()
        .position(is_matrix_file)
        .or_else(|| (tables.len() == 1 && ptype == ProblemType::Ap).then_some(0))
        .ok_or(missing.clone())?;
    let m = Matrix::from_table(&tables[idx])?.ok_or(missing)?;
    Ok((idx, m))
}

fn pick<'a>(
    ptype: ProblemType,
    tables: &'a [CsvTable],
    skip: usize,
    words: &[&str],
    what: &'static str,
) -> Result<&'a CsvTable, FormatError> {
    tables
        .iter()
        .enumerate()
        .find(|(i, t)| *i != skip && header_has(t, words))
        .map(|(_, t)| t)
        .ok_or(FormatError::Missing { ptype, what })
}

/// Renders retrieved tables in the layout that suits the problem type:
/// one line per row for NRM/RA (and the generic types), separate supply,
/// demand and cost-matrix blocks for TP, only the matrix for AP, and
/// facility, demand and cost-matrix blocks for FLP.
pub fn format_retrieved_data(ptype: ProblemType, tables: &[CsvTable]) -> Result<String, FormatError> {
    let mut out = String::new();
    match ptype {
        ProblemType::Tp => {
            let (ci, m) = cost_matrix(ptype, tables)?;
            let supply = pick(ptype, tables, ci, &["supply", "capacity", "available"], "supply table")?;
            let demand = pick(ptype, tables, ci, &["demand", "requirement"], "demand table")?;
            let _ = writeln!(out, "1. Supply Data - {}", supply.name);
            render_plain(supply, &mut out);
            let _ = writeln!(out, "\n2. Demand Data - {}", demand.name);
            render_plain(demand, &mut out);
            let _ = writeln!(out, "\n3. Full Cost Matrix - {}", m.name);
            m.render(&mut out);
        }
        ProblemType::Ap => {
            let (_, m) = cost_matrix(ptype, tables)?;
            let _ = writeln!(out, "Complete cost matrix from {}:", m.name);
            m.render(&mut out);
        }
        ProblemType::Flp => {
            let (ci, m) = cost_matrix(ptype, tables)?;
            let fac = pick(ptype, tables, ci, &["capacity", "opening", "fixed", "setup"], "facility table")?;
            let demand = pick(ptype, tables, ci, &["demand"], "demand table")?;
            let _ = writeln!(out, "1. Facility Data - {}", fac.name);
            render_plain(fac, &mut out);
            let _ = writeln!(out, "\n2. Demand Data - {}", demand.name);
            render_plain(demand, &mut out);
            let _ = writeln!(out, "\n3. Transportation Cost Matrix - {}", m.name);
            m.render(&mut out);
        }
        ProblemType::Nrm => {
            if !tables.iter().any(|t| header_has(t, &["revenue", "price", "fare", "profit"])) {
                return Err(FormatError::Missing { ptype, what: "revenue or price column" });
            }
            out = render_tables(tables);
        }
        ProblemType::Ra | ProblemType::Sblp | ProblemType::Others | ProblemType::Mixture => {
            if tables.is_empty() {
                return Err(FormatError::Missing { ptype, what: "table" });
            }
            out = render_tables(tables);
        }
    }
    Ok(out.trim_end().to_string())
}
