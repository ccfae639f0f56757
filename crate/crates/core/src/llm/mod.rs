//! Chat-completion backends and the Thought/Action/Observation loop.

mod react;
mod remote;
mod scripted;

pub use react::{parse_turn, react_loop, FnTool, ReactConfig, ReactError, ReactErrorKind, Tool, Turn};
pub use remote::RemoteBackend;
pub use scripted::ScriptedBackend;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Environment variable holding the bearer token for remote backends.
pub const API_KEY_ENV: &str = "LEAN_OPT_API_KEY";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        ChatMessage { role: Role::System, content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage { role: Role::User, content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        ChatMessage { role: Role::Assistant, content: content.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub top_p: f64,
}

impl ChatRequest {
    pub fn new(messages: Vec<ChatMessage>) -> Self {
        ChatRequest { messages, temperature: 0.0, top_p: 1.0 }
    }

    fn check(&self) -> Result<(), LlmError> {
        match self.messages.iter().position(|m| m.content.trim().is_empty()) {
            Some(i) => Err(LlmError::EmptyMessage(i)),
            None if self.messages.is_empty() => Err(LlmError::EmptyMessage(0)),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LlmError {
    #[error("message {0} has empty content")]
    EmptyMessage(usize),
    #[error("scripted response queue exhausted after {0} responses")]
    Exhausted(usize),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("endpoint returned status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("environment variable {API_KEY_ENV} is not set")]
    MissingKey,
}

/// Anything that turns a chat request into assistant text.
pub trait ChatBackend: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<String, LlmError>;
}

/// One step of an agent run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TraceEvent {
    Prompt { role: Role, content: String },
    Thought { text: String },
    Action { tool: String, input: String },
    Observation { text: String },
    FinalAnswer { text: String },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentTrace {
    pub agent: String,
    pub events: Vec<TraceEvent>,
}

impl AgentTrace {
    pub fn new(agent: impl Into<String>) -> Self {
        AgentTrace { agent: agent.into(), events: Vec::new() }
    }

    pub fn push(&mut self, e: TraceEvent) {
        debug_assert!(self.final_answer().is_none(), "events after the final answer");
        self.events.push(e);
    }

    pub fn final_answer(&self) -> Option<&str> {
        match self.events.last() {
            Some(TraceEvent::FinalAnswer { text }) => Some(text),
            _ => None,
        }
    }

    pub fn actions(&self) -> impl Iterator<Item = (&str, &str)> {
        self.events.iter().filter_map(|e| match e {
            TraceEvent::Action { tool, input } => Some((tool.as_str(), input.as_str())),
            _ => None,
        })
    }

    /// Assistant turns that produced an action or the final answer.
    pub fn steps(&self) -> usize {
        self.events.iter().filter(|e| matches!(e, TraceEvent::Action { .. } | TraceEvent::FinalAnswer { .. })).count()
    }
}
