//! Similarity search over problem descriptions and CSV rows.

mod csvqa;
mod fileqa;
mod remote;

pub use csvqa::{csv_qa, csv_qa_select, extract_keywords, fuzzy_match, render_tables, CsvTable};
pub use fileqa::{FileQa, FileQaHit};
pub use remote::RemoteEmbedder;

use crate::hash::hash_bytes;
use crate::par::{self, ExecMode};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashSet};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RetrievalError {
    #[error("empty text")]
    EmptyText,
    #[error("k must be at least 1")]
    ZeroK,
    #[error("duplicate record id `{0}`")]
    DuplicateId(String),
    #[error("embedding dimension {got} does not match index dimension {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("embedding provider unreachable: {0}")]
    ProviderUnreachable(String),
    #[error("cannot read CSV `{file}`: {msg}")]
    Csv { file: String, msg: String },
    #[error("CSV `{file}` line {line}: expected {expected} fields, found {found}")]
    ColumnCount { file: String, line: u64, expected: usize, found: usize },
    #[error("reference store is empty")]
    EmptyStore,
}

/// Unit-normalized sparse vector; `entries` sorted by index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    pub dim: usize,
    pub entries: Vec<(u32, f64)>,
}

impl Embedding {
    /// Normalizes `raw`; an all-zero vector is rejected.
    pub fn from_sparse(dim: usize, raw: BTreeMap<u32, f64>) -> Result<Self, RetrievalError> {
        let norm = raw.values().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(RetrievalError::EmptyText);
        }
        let entries = raw.into_iter().filter(|(_, v)| *v != 0.0).map(|(k, v)| (k, v / norm)).collect();
        Ok(Embedding { dim, entries })
    }

    pub fn from_dense(v: &[f64]) -> Result<Self, RetrievalError> {
        let raw = v.iter().enumerate().map(|(k, x)| (k as u32, *x)).collect();
        Self::from_sparse(v.len(), raw)
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|(_, v)| v * v).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &Embedding) -> f64 {
        let (mut i, mut j, mut acc) = (0, 0, 0.0);
        let (a, b) = (&self.entries, &other.entries);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    acc += a[i].1 * b[j].1;
                    i += 1;
                    j += 1;
                }
            }
        }
        acc
    }
}

/// Text → unit vector.
pub trait Embedder: Send + Sync {
    fn dim(&self) -> usize;
    fn embed(&self, text: &str) -> Result<Embedding, RetrievalError>;
}

/// Lowercased alphanumeric tokens.
pub fn tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()).map(str::to_lowercase).collect()
}

/// Hashed term frequency over [`tokens`]; offline and deterministic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LexicalEmbedder {
    pub dim: usize,
}

impl LexicalEmbedder {
    pub const DEFAULT_DIM: usize = 1 << 15;
}

impl Default for LexicalEmbedder {
    fn default() -> Self {
        LexicalEmbedder { dim: Self::DEFAULT_DIM }
    }
}

impl Embedder for LexicalEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Embedding, RetrievalError> {
        let mut tf: BTreeMap<u32, f64> = BTreeMap::new();
        for t in tokens(text) {
            *tf.entry((hash_bytes(t.as_bytes()) % self.dim as u64) as u32).or_insert(0.0) += 1.0;
        }
        Embedding::from_sparse(self.dim, tf)
    }
}

pub fn cosine(a: &Embedding, b: &Embedding) -> f64 {
    a.dot(b)
}

/// What a record points back to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Payload {
    RefEntry { id: String },
    CsvRow { file: String, row: usize },
    None,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocRecord {
    pub id: String,
    pub text: String,
    pub payload: Payload,
}

impl DocRecord {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        DocRecord { id: id.into(), text: text.into(), payload: Payload::None }
    }

    pub fn with_payload(mut self, payload: Payload) -> Self {
        self.payload = payload;
        self
    }
}

/// Records with their embeddings; searched exhaustively.
#[derive(Debug, Clone)]
pub struct VectorIndex {
    dim: usize,
    records: Vec<DocRecord>,
    vectors: Vec<Embedding>,
}

impl VectorIndex {
    pub fn build(embedder: &dyn Embedder, records: Vec<DocRecord>) -> Result<Self, RetrievalError> {
        let mut seen = HashSet::new();
        for r in &records {
            if !seen.insert(r.id.as_str()) {
                return Err(RetrievalError::DuplicateId(r.id.clone()));
            }
        }
        let vectors = records.iter().map(|r| embedder.embed(&r.text)).collect::<Result<Vec<_>, _>>()?;
        Ok(VectorIndex { dim: embedder.dim(), records, vectors })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[DocRecord] {
        &self.records
    }

    pub fn vectors(&self) -> &[Embedding] {
        &self.vectors
    }

    pub fn top_k(&self, embedder: &dyn Embedder, query: &str, k: usize) -> Result<Vec<(&DocRecord, f64)>, RetrievalError> {
        self.top_k_where(embedder, query, k, ExecMode::default(), |_| true)
    }

    /// Ranked by descending cosine, ties by ascending id, over records
    /// accepted by `keep`.
    pub fn top_k_where(
        &self,
        embedder: &dyn Embedder,
        query: &str,
        k: usize,
        mode: ExecMode,
        keep: impl Fn(&DocRecord) -> bool + Sync,
    ) -> Result<Vec<(&DocRecord, f64)>, RetrievalError> {
        if k == 0 {
            return Err(RetrievalError::ZeroK);
        }
        if self.records.is_empty() {
            return Ok(Vec::new());
        }
        let q = embedder.embed(query)?;
        if q.dim != self.dim {
            return Err(RetrievalError::Dimension { expected: self.dim, got: q.dim });
        }
        let scores = par::map_range(mode, self.records.len(), |i| {
            keep(&self.records[i]).then(|| (i, q.dot(&self.vectors[i])))
        });
        let mut hits: Vec<(usize, f64)> = scores.into_iter().flatten().collect();
        hits.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| self.records[a.0].id.cmp(&self.records[b.0].id)));
        hits.truncate(k);
        Ok(hits.into_iter().map(|(i, s)| (&self.records[i], s)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn self_similarity_is_one() {
        let e = LexicalEmbedder::default();
        let v = e.embed("Sony Bravia XR television").unwrap();
        assert!((v.dot(&v) - 1.0).abs() < 1e-12);
        assert!((v.norm() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn empty_text_is_rejected() {
        let e = LexicalEmbedder::default();
        assert_eq!(e.embed(""), Err(RetrievalError::EmptyText));
        assert_eq!(e.embed(" ,.; "), Err(RetrievalError::EmptyText));
    }

    #[test]
    fn shared_terms_rank_higher() {
        let e = LexicalEmbedder::default();
        let a = e.embed("Sony TV").unwrap();
        let b = e.embed("Sony television set").unwrap();
        let c = e.embed("flight demand").unwrap();
        assert!(cosine(&a, &b) > cosine(&a, &c));
    }

    #[test]
    fn top_k_orders_and_truncates() {
        let e = LexicalEmbedder::default();
        let idx = VectorIndex::build(
            &e,
            vec![
                DocRecord::new("b", "airline seat demand"),
                DocRecord::new("a", "airline seat demand"),
                DocRecord::new("c", "shoe inventory revenue"),
            ],
        )
        .unwrap();
        let hits = idx.top_k(&e, "airline seat demand", 2).unwrap();
        assert_eq!(hits.iter().map(|h| h.0.id.as_str()).collect::<Vec<_>>(), ["a", "b"]);
        assert!((hits[0].1 - 1.0).abs() < 1e-12);
        assert_eq!(idx.top_k(&e, "shoe", 10).unwrap().len(), 3);
        assert_eq!(idx.top_k(&e, "shoe", 0), Err(RetrievalError::ZeroK));
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let e = LexicalEmbedder::default();
        let err = VectorIndex::build(&e, vec![DocRecord::new("a", "x"), DocRecord::new("a", "y")]).unwrap_err();
        assert_eq!(err, RetrievalError::DuplicateId("a".into()));
    }

    #[test]
    fn empty_index_gives_no_hits() {
        let e = LexicalEmbedder::default();
        let idx = VectorIndex::build(&e, vec![]).unwrap();
        assert!(idx.top_k(&e, "anything", 5).unwrap().is_empty());
    }
}
