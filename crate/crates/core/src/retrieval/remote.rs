//! Embeddings from an HTTP endpoint speaking the common `/embeddings` JSON shape.

use super::{Embedder, Embedding, RetrievalError};
use serde_json::json;
use std::time::Duration;

#[derive(Debug, Clone)]
pub struct RemoteEmbedder {
    pub endpoint: String,
    pub model: String,
    pub dim: usize,
    pub api_key: Option<String>,
    pub timeout: Duration,
}

impl RemoteEmbedder {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>, dim: usize) -> Self {
        RemoteEmbedder {
            endpoint: endpoint.into(),
            model: model.into(),
            dim,
            api_key: std::env::var(crate::llm::API_KEY_ENV).ok(),
            timeout: Duration::from_secs(30),
        }
    }
}

impl Embedder for RemoteEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Embedding, RetrievalError> {
        if text.trim().is_empty() {
            return Err(RetrievalError::EmptyText);
        }
        let unreachable = |e: &dyn std::fmt::Display| RetrievalError::ProviderUnreachable(e.to_string());
        let agent: ureq::Agent = ureq::Agent::config_builder().timeout_global(Some(self.timeout)).build().into();
        let mut req = agent.post(&self.endpoint);
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let body: serde_json::Value = req
            .send_json(json!({ "model": self.model, "input": text }))
            .map_err(|e| unreachable(&e))?
            .body_mut()
            .read_json()
            .map_err(|e| unreachable(&e))?;
        let v: Vec<f64> = body["data"][0]["embedding"]
            .as_array()
            .ok_or_else(|| unreachable(&"response has no data[0].embedding"))?
            .iter()
            .map(|x| x.as_f64().unwrap_or(0.0))
            .collect();
        if v.len() != self.dim {
            return Err(RetrievalError::Dimension { expected: self.dim, got: v.len() });
        }
        Embedding::from_dense(&v)
    }
}
