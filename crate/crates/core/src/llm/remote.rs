use super::{ChatBackend, ChatRequest, LlmError, API_KEY_ENV};
use serde_json::json;
use std::time::Duration;

/// Chat-completions over HTTP: POST `{model, messages, temperature, top_p}`,
/// read `choices[0].message.content`.
#[derive(Debug, Clone)]
pub struct RemoteBackend {
    pub endpoint: String,
    pub model: String,
    pub timeout: Duration,
    api_key: String,
}

impl RemoteBackend {
    /// Reads the bearer token from the environment.
    pub fn from_env(endpoint: impl Into<String>, model: impl Into<String>, timeout: Duration) -> Result<Self, LlmError> {
        let key = std::env::var(API_KEY_ENV).map_err(|_| LlmError::MissingKey)?;
        Ok(Self::with_key(endpoint, model, timeout, key))
    }

    pub fn with_key(endpoint: impl Into<String>, model: impl Into<String>, timeout: Duration, key: impl Into<String>) -> Self {
        RemoteBackend { endpoint: endpoint.into(), model: model.into(), timeout, api_key: key.into() }
    }
}

impl ChatBackend for RemoteBackend {
    fn complete(&self, request: &ChatRequest) -> Result<String, LlmError> {
        request.check()?;
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(self.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        let body = json!({
            "model": self.model,
            "messages": request.messages,
            "temperature": request.temperature,
            "top_p": request.top_p,
        });
        let mut resp = agent
            .post(&self.endpoint)
            .header("Authorization", &format!("Bearer {}", self.api_key))
            .send_json(body)
            .map_err(|e| LlmError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp.body_mut().read_to_string().map_err(|e| LlmError::Transport(e.to_string()))?;
        if !(200..300).contains(&status) {
            return Err(LlmError::Status { status, body: text });
        }
        let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| LlmError::Malformed(e.to_string()))?;
        v["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| LlmError::Malformed("no choices[0].message.content".into()))
    }
}
