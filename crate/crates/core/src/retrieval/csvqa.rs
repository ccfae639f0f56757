//! Row-level retrieval over CSV tables with fuzzy entity matching.

use super::{tokens, RetrievalError};
use serde::{Deserialize, Serialize};
use std::fmt::Write;
use std::io::Read;
use std::path::Path;

/// A parsed CSV file; the first record is the header.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsvTable {
    pub name: String,
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn read(path: impl AsRef<Path>) -> Result<Self, RetrievalError> {
        let path = path.as_ref();
        let name = path.file_name().map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned());
        let file = std::fs::File::open(path).map_err(|e| RetrievalError::Csv { file: name.clone(), msg: e.to_string() })?;
        Self::from_reader(name, file)
    }

    pub fn parse(name: impl Into<String>, text: &str) -> Result<Self, RetrievalError> {
        Self::from_reader(name, text.as_bytes())
    }

    pub fn from_reader(name: impl Into<String>, reader: impl Read) -> Result<Self, RetrievalError> {
        let name = name.into();
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let map_err = |e: csv::Error, name: &str| match e.kind() {
            csv::ErrorKind::UnequalLengths { pos, expected_len, len } => RetrievalError::ColumnCount {
                file: name.to_string(),
                line: pos.as_ref().map_or(0, |p| p.line()),
                expected: *expected_len as usize,
                found: *len as usize,
            },
            _ => RetrievalError::Csv { file: name.to_string(), msg: e.to_string() },
        };
        let headers = rdr.headers().map_err(|e| map_err(e, &name))?.iter().map(|h| h.trim().to_string()).collect();
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| map_err(e, &name))?;
            rows.push(rec.iter().map(|c| c.trim().to_string()).collect());
        }
        Ok(CsvTable { name, headers, rows })
    }

    /// Column index by header, ignoring case and surrounding blanks.
    pub fn column(&self, header: &str) -> Option<usize> {
        let want = header.trim().to_lowercase();
        self.headers.iter().position(|h| h.to_lowercase() == want)
    }

    pub fn column_values(&self, header: &str) -> Option<Vec<&str>> {
        let c = self.column(header)?;
        Some(self.rows.iter().map(|r| r[c].as_str()).collect())
    }

    /// `Header: value` pairs joined by commas.
    pub fn render_row(&self, row: &[String]) -> String {
        self.headers.iter().zip(row).map(|(h, v)| format!("{h}: {v}")).collect::<Vec<_>>().join(", ")
    }

    fn subset(&self, rows: &[usize]) -> CsvTable {
        CsvTable { name: self.name.clone(), headers: self.headers.clone(), rows: rows.iter().map(|&r| self.rows[r].clone()).collect() }
    }
}

const GENERIC: &[&str] = &[
    "all", "the", "a", "an", "of", "data", "dataset", "product", "products", "item", "items", "brand", "brands",
    "information", "details", "relevant", "every", "whole",
];

fn clean_keyword(raw: &str) -> Option<String> {
    let words: Vec<&str> = raw
        .split_whitespace()
        .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric()))
        .filter(|w| !w.is_empty())
        .collect();
    let start = words.iter().position(|w| !GENERIC.contains(&w.to_lowercase().as_str()))?;
    let end = words.iter().rposition(|w| !GENERIC.contains(&w.to_lowercase().as_str()))?;
    Some(words[start..=end].join(" "))
}

/// Entity keywords named by a retrieval request.
///
/// A `Keywords:` line wins; otherwise the phrase after "related to" up to
/// "to formulate" or sentence end; otherwise quoted strings. Generic words
/// ("all", "products", "data", ...) are trimmed, so "related to all the data"
/// yields nothing.
pub fn extract_keywords(request: &str) -> Vec<String> {
    let split = |phrase: &str| -> Vec<String> {
        phrase
            .split([',', '/'])
            .flat_map(|p| p.split(" and "))
            .flat_map(|p| p.split(" or "))
            .filter_map(clean_keyword)
            .collect()
    };
    for line in request.lines() {
        let l = line.trim();
        if l.len() >= 9 && l[..9].eq_ignore_ascii_case("keywords:") {
            return split(&l[9..]);
        }
    }
    let lower = request.to_lowercase();
    if let Some(p) = lower.find("related to ") {
        let start = p + "related to ".len();
        let rest = &request[start..];
        let rest_lower = &lower[start..];
        let mut end = rest.len();
        for stop in [" to formulate", ".", ";", "\n"] {
            if let Some(q) = rest_lower.find(stop) {
                end = end.min(q);
            }
        }
        return split(&rest[..end]);
    }
    let mut out = Vec::new();
    for quote in ['"', '\u{201c}', '`'] {
        let close = if quote == '\u{201c}' { '\u{201d}' } else { quote };
        let mut rest = request;
        while let Some(a) = rest.find(quote) {
            let after = &rest[a + quote.len_utf8()..];
            let Some(b) = after.find(close) else { break };
            if let Some(k) = clean_keyword(&after[..b]) {
                out.push(k);
            }
            rest = &after[b + close.len_utf8()..];
        }
    }
    out
}

fn squash(s: &str) -> String {
    s.chars().filter(|c| c.is_alphanumeric()).flat_map(char::to_lowercase).collect()
}

/// Case- and spacing-insensitive substring, or every keyword token within
/// edit distance 1 of some cell token (tokens shorter than 3 must match exactly).
pub fn fuzzy_match(keyword: &str, cell: &str) -> bool {
    let k = squash(keyword);
    if k.is_empty() {
        return false;
    }
    if squash(cell).contains(&k) {
        return true;
    }
    let cell_tokens = tokens(cell);
    tokens(keyword).iter().all(|kt| {
        cell_tokens.iter().any(|ct| {
            if kt.chars().count() < 3 || ct.chars().count() < 3 {
                kt == ct
            } else {
                strsim::levenshtein(kt, ct) <= 1
            }
        })
    })
}

/// Rows of each table matching any keyword, in source order. A table with
/// no matching row (or a request without keywords) is returned whole.
pub fn csv_qa_select(datasets: &[CsvTable], request: &str) -> Vec<CsvTable> {
    let keywords = extract_keywords(request);
    datasets
        .iter()
        .map(|t| {
            if keywords.is_empty() {
                return t.clone();
            }
            let hits: Vec<usize> = (0..t.rows.len())
                .filter(|&r| t.rows[r].iter().any(|cell| keywords.iter().any(|k| fuzzy_match(k, cell))))
                .collect();
            if hits.is_empty() {
                t.clone()
            } else {
                t.subset(&hits)
            }
        })
        .collect()
}

/// Renders selected rows as numbered `Header: value` lines under a banner per file.
pub fn render_tables(tables: &[CsvTable]) -> String {
    let mut out = String::new();
    for (k, t) in tables.iter().enumerate() {
        let _ = writeln!(out, "----------------DataFrame {} - {}:----------------", k + 1, t.name);
        for (i, row) in t.rows.iter().enumerate() {
            let _ = writeln!(out, "{}. {}", i + 1, t.render_row(row));
        }
    }
    out
}

pub fn csv_qa(datasets: &[CsvTable], request: &str) -> String {
    render_tables(&csv_qa_select(datasets, request))
}
