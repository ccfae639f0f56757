//! Nearest reference problems for a query, with their problem types.

use super::{DocRecord, Embedder, Payload, RetrievalError, VectorIndex};
use crate::par::ExecMode;
use crate::refdata::ProblemType;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fmt::Write;
use std::sync::Arc;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileQaHit {
    pub id: String,
    pub description: String,
    pub problem_type: ProblemType,
    pub score: f64,
}

pub struct FileQa {
    embedder: Arc<dyn Embedder>,
    index: VectorIndex,
    types: HashMap<String, ProblemType>,
}

impl FileQa {
    pub const TOP_K: usize = 5;

    /// Indexes `(id, description, type)` triples.
    pub fn build(
        embedder: Arc<dyn Embedder>,
        entries: impl IntoIterator<Item = (String, String, ProblemType)>,
    ) -> Result<Self, RetrievalError> {
        let mut types = HashMap::new();
        let mut records = Vec::new();
        for (id, q, t) in entries {
            types.insert(id.clone(), t);
            records.push(DocRecord::new(id.clone(), q).with_payload(Payload::RefEntry { id }));
        }
        let index = VectorIndex::build(embedder.as_ref(), records)?;
        Ok(FileQa { embedder, index, types })
    }

    pub fn embedder(&self) -> &Arc<dyn Embedder> {
        &self.embedder
    }

    pub fn index(&self) -> &VectorIndex {
        &self.index
    }

    /// Top five entries by similarity of their descriptions to `query`.
    pub fn query(&self, query: &str) -> Result<Vec<FileQaHit>, RetrievalError> {
        self.ranked(query, Self::TOP_K, None)
    }

    /// Entries of one type, best first.
    pub fn ranked(&self, query: &str, k: usize, only: Option<ProblemType>) -> Result<Vec<FileQaHit>, RetrievalError> {
        if self.index.is_empty() {
            return Err(RetrievalError::EmptyStore);
        }
        let hits = self.index.top_k_where(self.embedder.as_ref(), query, k, ExecMode::default(), |r| {
            only.is_none_or(|t| self.types[&r.id] == t)
        })?;
        Ok(hits
            .into_iter()
            .map(|(r, score)| FileQaHit {
                id: r.id.clone(),
                description: r.text.clone(),
                problem_type: self.types[&r.id],
                score,
            })
            .collect())
    }

    /// Observation text handed back to the agent.
    pub fn render(hits: &[FileQaHit]) -> String {
        let mut out = String::new();
        for (i, h) in hits.iter().enumerate() {
            let _ = writeln!(out, "{}. Problem type: {}\n   Description: {}", i + 1, h.problem_type, h.description.trim());
        }
        out
    }
}
