use super::{AgentTrace, ChatBackend, ChatMessage, ChatRequest, LlmError, Role, TraceEvent};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A named capability the agent may call with free-text input.
pub trait Tool: Send + Sync {
    fn name(&self) -> &str;
    fn call(&self, input: &str) -> Result<String, String>;
}

/// Wraps a closure as a [`Tool`].
pub struct FnTool<F> {
    name: String,
    f: F,
}

impl<F: Fn(&str) -> Result<String, String> + Send + Sync> FnTool<F> {
    pub fn new(name: impl Into<String>, f: F) -> Self {
        FnTool { name: name.into(), f }
    }
}

impl<F: Fn(&str) -> Result<String, String> + Send + Sync> Tool for FnTool<F> {
    fn name(&self) -> &str {
        &self.name
    }

    fn call(&self, input: &str) -> Result<String, String> {
        (self.f)(input)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReactConfig {
    pub max_steps: usize,
    /// Re-prompts allowed after a turn with neither an action nor an answer.
    pub format_retries: usize,
}

impl Default for ReactConfig {
    fn default() -> Self {
        ReactConfig { max_steps: 6, format_retries: 1 }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReactErrorKind {
    #[error("duplicate tool name `{0}`")]
    DuplicateTool(String),
    #[error("max_steps must be at least 1")]
    ZeroSteps,
    #[error("unknown tool `{0}`")]
    UnknownTool(String),
    #[error("action `{0}` has no Action Input")]
    MissingActionInput(String),
    #[error("no final answer within {0} steps")]
    StepLimit(usize),
    #[error("turn has neither an action nor a final answer: {0:?}")]
    Unparseable(String),
    #[error(transparent)]
    Backend(#[from] LlmError),
}

/// Failure with everything recorded up to that point.
#[derive(Debug, Error, Clone, PartialEq)]
#[error("{kind}")]
pub struct ReactError {
    pub kind: ReactErrorKind,
    pub trace: AgentTrace,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Turn {
    Action { thought: Option<String>, tool: String, input: Option<String> },
    Final { thought: Option<String>, answer: String },
    Unparseable,
}

const LABELS: [&str; 5] = ["Thought:", "Action Input:", "Action:", "Observation:", "Final Answer:"];

fn label_of(line: &str) -> Option<(&'static str, &str)> {
    let t = line.trim_start().trim_start_matches(['*', '#', ' ']);
    LABELS.iter().find_map(|l| {
        let rest = t.strip_prefix(l)?;
        Some((*l, rest.trim_start_matches('*')))
    })
}

fn unquote(s: &str) -> String {
    let t = s.trim();
    for (a, b) in [('"', '"'), ('\u{201c}', '\u{201d}'), ('\'', '\'')] {
        if t.len() >= 2 && t.starts_with(a) && t.ends_with(b) {
            return t[a.len_utf8()..t.len() - b.len_utf8()].trim().to_string();
        }
    }
    t.to_string()
}

/// Splits an assistant turn at line-anchored labels. An action that comes
/// before any final answer wins, and text from a model-written
/// `Observation:` onwards is ignored.
pub fn parse_turn(text: &str) -> Turn {
    let mut sections: Vec<(&str, String)> = Vec::new();
    let mut final_seen = false;
    for line in text.lines() {
        match label_of(line) {
            Some(("Observation:", _)) if !final_seen => break,
            Some((label, rest)) if !final_seen => {
                final_seen = label == "Final Answer:";
                sections.push((label, rest.trim().to_string()));
            }
            _ => match sections.last_mut() {
                Some((_, body)) => {
                    body.push('\n');
                    body.push_str(line);
                }
                None => sections.push(("", line.to_string())),
            },
        }
    }
    let get = |l: &str| sections.iter().find(|(k, _)| *k == l).map(|(_, v)| v.trim().to_string());
    let thought = get("Thought:").filter(|t| !t.is_empty());
    let action_pos = sections.iter().position(|(k, _)| *k == "Action:");
    let final_pos = sections.iter().position(|(k, _)| *k == "Final Answer:");
    match (action_pos, final_pos) {
        (Some(a), f) if f.is_none_or(|f| a < f) => {
            let tool = sections[a].1.trim().trim_end_matches('.').to_string();
            let input = sections[a..].iter().find(|(k, _)| *k == "Action Input:").map(|(_, v)| unquote(v));
            Turn::Action { thought, tool, input }
        }
        (_, Some(f)) => Turn::Final { thought, answer: sections[f].1.trim().to_string() },
        _ => Turn::Unparseable,
    }
}

const FORMAT_REMINDER: &str = "Your last reply could not be parsed. Reply with either\n\
Thought: ...\nAction: <tool name>\nAction Input: <input>\nor\nThought: ...\nFinal Answer: <answer>";

/// Runs the Thought/Action/Observation loop until a final answer.
pub fn react_loop(
    backend: &dyn ChatBackend,
    agent: &str,
    system: &str,
    tools: &[&dyn Tool],
    question: &str,
    cfg: ReactConfig,
) -> Result<(String, AgentTrace), ReactError> {
    let mut trace = AgentTrace::new(agent);
    let fail = |kind: ReactErrorKind, trace: AgentTrace| Err(ReactError { kind, trace });
    for (i, t) in tools.iter().enumerate() {
        if tools[..i].iter().any(|u| u.name() == t.name()) {
            return fail(ReactErrorKind::DuplicateTool(t.name().to_string()), trace);
        }
    }
    if cfg.max_steps == 0 {
        return fail(ReactErrorKind::ZeroSteps, trace);
    }
    let mut messages = vec![ChatMessage::system(system), ChatMessage::user(question)];
    trace.push(TraceEvent::Prompt { role: Role::System, content: system.to_string() });
    trace.push(TraceEvent::Prompt { role: Role::User, content: question.to_string() });
    let mut retries_left = cfg.format_retries;
    for _ in 0..cfg.max_steps {
        let reply = match backend.complete(&ChatRequest::new(messages.clone())) {
            Ok(r) => r,
            Err(e) => return fail(e.into(), trace),
        };
        match parse_turn(&reply) {
            Turn::Final { thought, answer } => {
                if let Some(text) = thought {
                    trace.push(TraceEvent::Thought { text });
                }
                trace.push(TraceEvent::FinalAnswer { text: answer.clone() });
                return Ok((answer, trace));
            }
            Turn::Action { thought, tool, input } => {
                if let Some(text) = thought {
                    trace.push(TraceEvent::Thought { text });
                }
                let Some(input) = input else {
                    return fail(ReactErrorKind::MissingActionInput(tool), trace);
                };
                trace.push(TraceEvent::Action { tool: tool.clone(), input: input.clone() });
                let Some(t) = tools.iter().find(|t| t.name().eq_ignore_ascii_case(&tool)) else {
                    return fail(ReactErrorKind::UnknownTool(tool), trace);
                };
                let observation = t.call(&input).unwrap_or_else(|e| format!("Tool error: {e}"));
                trace.push(TraceEvent::Observation { text: observation.clone() });
                let upto = reply.lines().take_while(|l| label_of(l).is_none_or(|(k, _)| k != "Observation:"));
                messages.push(ChatMessage::assistant(upto.collect::<Vec<_>>().join("\n")));
                messages.push(ChatMessage::user(format!("Observation: {observation}")));
            }
            Turn::Unparseable => {
                if retries_left == 0 {
                    return fail(ReactErrorKind::Unparseable(reply), trace);
                }
                retries_left -= 1;
                messages.push(ChatMessage::assistant(if reply.trim().is_empty() { "(empty)".into() } else { reply }));
                messages.push(ChatMessage::user(FORMAT_REMINDER));
                trace.push(TraceEvent::Prompt { role: Role::User, content: FORMAT_REMINDER.to_string() });
            }
        }
    }
    fail(ReactErrorKind::StepLimit(cfg.max_steps), trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::ScriptedBackend;

    fn echo() -> FnTool<impl Fn(&str) -> Result<String, String> + Send + Sync> {
        FnTool::new("FileQA", |q: &str| Ok(format!("seen: {q}")))
    }

    #[test]
    fn parses_action_with_quoted_input() {
        let t = parse_turn("Thought: look it up\nAction: FileQA\nAction Input: \"what type?\"\nObservation: made up\nFinal Answer: X");
        assert_eq!(
            t,
            Turn::Action { thought: Some("look it up".into()), tool: "FileQA".into(), input: Some("what type?".into()) }
        );
    }

    #[test]
    fn final_answer_takes_the_rest() {
        let t = parse_turn("Thought: done\nFinal Answer: Network Revenue Management.\nmore");
        assert_eq!(
            t,
            Turn::Final { thought: Some("done".into()), answer: "Network Revenue Management.\nmore".into() }
        );
    }

    #[test]
    fn direct_answer_is_one_step() {
        let b = ScriptedBackend::new(["Final Answer: Network Revenue Management."]);
        let tool = echo();
        let (ans, trace) = react_loop(&b, "classify", "sys", &[&tool], "q", ReactConfig::default()).unwrap();
        assert_eq!(ans, "Network Revenue Management.");
        assert_eq!(trace.steps(), 1);
    }

    #[test]
    fn observation_is_verbatim_tool_output() {
        let b = ScriptedBackend::new(["Action: FileQA\nAction Input: abc", "Final Answer: done"]);
        let tool = echo();
        let (_, trace) = react_loop(&b, "a", "sys", &[&tool], "q", ReactConfig::default()).unwrap();
        assert_eq!(trace.steps(), 2);
        assert!(trace.events.contains(&TraceEvent::Observation { text: "seen: abc".into() }));
        let second = &b.requests()[1];
        assert_eq!(second.messages.last().unwrap().content, "Observation: seen: abc");
    }

    #[test]
    fn unknown_tool_keeps_trace() {
        let b = ScriptedBackend::new(["Action: Unknown\nAction Input: x"]);
        let tool = echo();
        let err = react_loop(&b, "a", "sys", &[&tool], "q", ReactConfig::default()).unwrap_err();
        assert_eq!(err.kind, ReactErrorKind::UnknownTool("Unknown".into()));
        assert!(matches!(err.trace.events.last(), Some(TraceEvent::Action { .. })));
    }

    #[test]
    fn one_reprompt_then_failure() {
        let b = ScriptedBackend::new(["hello", "Final Answer: ok"]);
        let (ans, _) = react_loop(&b, "a", "sys", &[], "q", ReactConfig::default()).unwrap();
        assert_eq!(ans, "ok");
        let b = ScriptedBackend::new(["hello", "still nothing"]);
        let err = react_loop(&b, "a", "sys", &[], "q", ReactConfig::default()).unwrap_err();
        assert!(matches!(err.kind, ReactErrorKind::Unparseable(_)));
    }

    #[test]
    fn missing_input_and_step_limit() {
        let b = ScriptedBackend::new(["Action: FileQA"]);
        let tool = echo();
        let err = react_loop(&b, "a", "s", &[&tool], "q", ReactConfig::default()).unwrap_err();
        assert_eq!(err.kind, ReactErrorKind::MissingActionInput("FileQA".into()));
        let b = ScriptedBackend::new(vec!["Action: FileQA\nAction Input: x"; 3]);
        let cfg = ReactConfig { max_steps: 2, ..Default::default() };
        let err = react_loop(&b, "a", "s", &[&tool], "q", cfg).unwrap_err();
        assert_eq!(err.kind, ReactErrorKind::StepLimit(2));
    }

    #[test]
    fn duplicate_tools_rejected() {
        let b = ScriptedBackend::new(["Final Answer: x"]);
        let (t1, t2) = (echo(), echo());
        let err = react_loop(&b, "a", "s", &[&t1, &t2], "q", ReactConfig::default()).unwrap_err();
        assert_eq!(err.kind, ReactErrorKind::DuplicateTool("FileQA".into()));
    }
}
