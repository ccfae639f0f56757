//! TOML configuration with `LEAN_OPT_*` environment overrides. Secrets are
//! only read from the environment.

use leanopt::agents::AgentConfig;
use leanopt::llm::API_KEY_ENV;
use leanopt::par::ExecMode;
use leanopt::solver::SolverConfig;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    #[default]
    Scripted,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendConfig {
    pub kind: BackendKind,
    pub endpoint: Option<String>,
    pub model: Option<String>,
    pub timeout_secs: u64,
    /// JSON array of replies for the scripted backend.
    pub transcript: Option<PathBuf>,
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig { kind: BackendKind::Scripted, endpoint: None, model: None, timeout_secs: 120, transcript: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingProvider {
    #[default]
    Lexical,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingConfig {
    pub provider: EmbeddingProvider,
    pub endpoint: Option<String>,
    pub model: Option<String>,
    pub dim: usize,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        EmbeddingConfig { provider: EmbeddingProvider::Lexical, endpoint: None, model: None, dim: 1536 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub token_edges: Vec<f64>,
    pub variable_edges: Vec<f64>,
    pub exec: ExecMode,
}

impl Default for EvalConfig {
    fn default() -> Self {
        let d = leanopt::eval::EvalOptions::default();
        EvalConfig { token_edges: d.token_edges, variable_edges: d.variable_edges, exec: d.exec }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub refdata: PathBuf,
    pub backend: BackendConfig,
    pub embedding: EmbeddingConfig,
    pub agents: AgentConfig,
    pub solver: SolverConfig,
    pub eval: EvalConfig,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            refdata: PathBuf::from("data/refdata"),
            backend: BackendConfig::default(),
            embedding: EmbeddingConfig::default(),
            agents: AgentConfig::default(),
            solver: SolverConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

fn parse_kind<T: for<'de> Deserialize<'de>>(var: &str, raw: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(raw.to_ascii_lowercase()))
        .map_err(|_| format!("{var}: unsupported value {raw:?}"))
}

impl Config {
    /// File (if any), then environment overrides, then validation. Relative
    /// paths in a file are taken relative to that file.
    pub fn load(path: Option<&Path>, env: &dyn Fn(&str) -> Option<String>) -> Result<Config, String> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?;
                let mut c: Config = toml::from_str(&text).map_err(|e| format!("{}: {e}", p.display()))?;
                let base = p.parent().unwrap_or(Path::new("."));
                c.refdata = base.join(&c.refdata);
                c.backend.transcript = c.backend.transcript.map(|t| base.join(t));
                c
            }
            None => Config::default(),
        };
        if let Some(v) = env("LEAN_OPT_BACKEND") {
            cfg.backend.kind = parse_kind("LEAN_OPT_BACKEND", &v)?;
        }
        if let Some(v) = env("LEAN_OPT_ENDPOINT") {
            cfg.backend.endpoint = Some(v);
        }
        if let Some(v) = env("LEAN_OPT_MODEL") {
            cfg.backend.model = Some(v);
        }
        if let Some(v) = env("LEAN_OPT_TRANSCRIPT") {
            cfg.backend.transcript = Some(v.into());
        }
        if let Some(v) = env("LEAN_OPT_REFDATA") {
            cfg.refdata = v.into();
        }
        if let Some(v) = env("LEAN_OPT_EMBEDDING") {
            cfg.embedding.provider = parse_kind("LEAN_OPT_EMBEDDING", &v)?;
        }
        if let Some(v) = env("LEAN_OPT_EMBEDDING_ENDPOINT") {
            cfg.embedding.endpoint = Some(v);
        }
        cfg.check(env)?;
        Ok(cfg)
    }

    fn check(&self, env: &dyn Fn(&str) -> Option<String>) -> Result<(), String> {
        if self.backend.kind == BackendKind::Remote {
            if self.backend.endpoint.is_none() || self.backend.model.is_none() {
                return Err("remote backend needs backend.endpoint and backend.model".into());
            }
            if env(API_KEY_ENV).is_none() {
                return Err(format!("remote backend needs {API_KEY_ENV} in the environment"));
            }
        }
        if self.embedding.provider == EmbeddingProvider::Remote && self.embedding.endpoint.is_none() {
            return Err("remote embeddings need embedding.endpoint".into());
        }
        Ok(())
    }
}
