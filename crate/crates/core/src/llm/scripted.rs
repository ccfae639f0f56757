use super::{ChatBackend, ChatRequest, LlmError};
use std::collections::VecDeque;
use std::path::Path;
use std::sync::Mutex;

/// Replays canned responses in order and records every request.
#[derive(Debug, Default)]
pub struct ScriptedBackend {
    queue: Mutex<VecDeque<String>>,
    served: Mutex<Vec<ChatRequest>>,
}

impl ScriptedBackend {
    pub fn new<S: Into<String>>(responses: impl IntoIterator<Item = S>) -> Self {
        ScriptedBackend { queue: Mutex::new(responses.into_iter().map(Into::into).collect()), served: Mutex::default() }
    }

    /// Loads a JSON array of response strings.
    pub fn from_file(path: impl AsRef<Path>) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let responses: Vec<String> = serde_json::from_str(&text)?;
        Ok(Self::new(responses))
    }

    pub fn push(&self, response: impl Into<String>) {
        self.queue.lock().unwrap().push_back(response.into());
    }

    pub fn remaining(&self) -> usize {
        self.queue.lock().unwrap().len()
    }

    pub fn requests(&self) -> Vec<ChatRequest> {
        self.served.lock().unwrap().clone()
    }
}

impl ChatBackend for ScriptedBackend {
    fn complete(&self, request: &ChatRequest) -> Result<String, LlmError> {
        request.check()?;
        let mut served = self.served.lock().unwrap();
        let next = self.queue.lock().unwrap().pop_front();
        match next {
            Some(r) => {
                served.push(request.clone());
                Ok(r)
            }
            None => Err(LlmError::Exhausted(served.len())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::ChatMessage;

    fn req() -> ChatRequest {
        ChatRequest::new(vec![ChatMessage::user("hi")])
    }

    #[test]
    fn pops_in_order_then_exhausts() {
        let b = ScriptedBackend::new(["42", "43"]);
        assert_eq!(b.complete(&req()).unwrap(), "42");
        assert_eq!(b.complete(&req()).unwrap(), "43");
        assert_eq!(b.complete(&req()), Err(LlmError::Exhausted(2)));
        assert_eq!(b.requests().len(), 2);
    }

    #[test]
    fn defaults_are_greedy() {
        let r = req();
        assert_eq!((r.temperature, r.top_p), (0.0, 1.0));
    }

    #[test]
    fn empty_content_rejected() {
        let b = ScriptedBackend::new(["x"]);
        let r = ChatRequest::new(vec![ChatMessage::user("  ")]);
        assert_eq!(b.complete(&r), Err(LlmError::EmptyMessage(0)));
        assert_eq!(b.remaining(), 1);
    }
}
