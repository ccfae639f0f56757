//! Versioned prompt templates with `{slot}` placeholders.

use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PromptAsset {
    pub id: &'static str,
    pub slots: &'static [&'static str],
    pub text: &'static str,
}

macro_rules! asset {
    ($id:literal, [$($slot:literal),*]) => {
        PromptAsset {
            id: $id,
            slots: &[$($slot),*],
            text: include_str!(concat!("../../assets/prompts/", $id, ".txt")),
        }
    };
}

pub const CLASSIFY_SYSTEM: PromptAsset = asset!("classify_system.v1", ["allowed"]);
pub const CLASSIFY_QUESTION: PromptAsset = asset!("classify_question.v1", ["query"]);
pub const TAILORED_WORKFLOW: PromptAsset = asset!("tailored_workflow.v1", ["q_demo", "g_demo", "f_demo", "m_demo"]);
pub const MODEL_GENERATION: PromptAsset = asset!("model_generation.v1", ["workflow"]);
pub const GENERATION_QUESTION: PromptAsset = asset!("generation_question.v1", ["query"]);
pub const PARSE_RETRY: PromptAsset = asset!("parse_retry.v1", ["error"]);
pub const AGNOSTIC_WORKFLOW: PromptAsset = asset!("agnostic_workflow.v1", ["query", "snapshot"]);
pub const PLAN_RETRY: PromptAsset = asset!("plan_retry.v1", ["error"]);

pub const ALL_ASSETS: [PromptAsset; 8] = [
    CLASSIFY_SYSTEM,
    CLASSIFY_QUESTION,
    TAILORED_WORKFLOW,
    MODEL_GENERATION,
    GENERATION_QUESTION,
    PARSE_RETRY,
    AGNOSTIC_WORKFLOW,
    PLAN_RETRY,
];

pub fn asset(id: &str) -> Option<PromptAsset> {
    ALL_ASSETS.iter().copied().find(|a| a.id == id)
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TemplateError {
    #[error("template `{id}` has no value for slot `{slot}`")]
    MissingSlot { id: &'static str, slot: String },
    #[error("template `{id}` does not declare slot `{slot}`")]
    UnknownSlot { id: &'static str, slot: String },
    #[error("template `{id}` contains slot `{slot}` {count} times")]
    SlotCount { id: &'static str, slot: String, count: usize },
    #[error("rendered text does not follow template `{id}`")]
    NoMatch { id: &'static str },
}

enum Piece<'a> {
    Lit(&'a str),
    Slot(&'a str),
}

impl PromptAsset {
    fn pieces(&self) -> Vec<Piece<'static>> {
        let text = self.text;
        let mut out = Vec::new();
        let mut last = 0;
        let mut i = 0;
        while let Some(off) = text[i..].find('{') {
            let open = i + off;
            let Some(len) = text[open + 1..].find('}') else { break };
            let name = &text[open + 1..open + 1 + len];
            if self.slots.contains(&name) {
                out.push(Piece::Lit(&text[last..open]));
                out.push(Piece::Slot(name));
                last = open + len + 2;
                i = last;
            } else {
                i = open + 1;
            }
        }
        out.push(Piece::Lit(&text[last..]));
        out
    }

    /// Declared slots each occur exactly once in the text.
    pub fn check(&self) -> Result<(), TemplateError> {
        for s in self.slots {
            let count = self.text.matches(&format!("{{{s}}}")).count();
            if count != 1 {
                return Err(TemplateError::SlotCount { id: self.id, slot: s.to_string(), count });
            }
        }
        Ok(())
    }

    /// Single-pass substitution: inserted values are never re-scanned, so
    /// braces inside them (LaTeX subscripts) are safe.
    pub fn render(&self, values: &[(&str, &str)]) -> Result<String, TemplateError> {
        self.check()?;
        for (k, _) in values {
            if !self.slots.contains(k) {
                return Err(TemplateError::UnknownSlot { id: self.id, slot: k.to_string() });
            }
        }
        let mut out = String::with_capacity(self.text.len() + values.iter().map(|v| v.1.len()).sum::<usize>());
        for p in self.pieces() {
            match p {
                Piece::Lit(l) => out.push_str(l),
                Piece::Slot(s) => {
                    let v = values
                        .iter()
                        .find(|(k, _)| *k == s)
                        .ok_or_else(|| TemplateError::MissingSlot { id: self.id, slot: s.to_string() })?;
                    out.push_str(v.1);
                }
            }
        }
        Ok(out)
    }

    /// Recovers slot values from text produced by [`render`](Self::render).
    pub fn extract(&self, rendered: &str) -> Result<BTreeMap<String, String>, TemplateError> {
        let pieces = self.pieces();
        let fail = || TemplateError::NoMatch { id: self.id };
        let mut out = BTreeMap::new();
        let mut rest = rendered;
        let mut k = 0;
        while k < pieces.len() {
            match pieces[k] {
                Piece::Lit(l) => rest = rest.strip_prefix(l).ok_or_else(fail)?,
                Piece::Slot(s) => {
                    let next = match pieces.get(k + 1) {
                        Some(Piece::Lit(l)) => *l,
                        _ => "",
                    };
                    let end = if k + 2 >= pieces.len() {
                        rest.len().checked_sub(next.len()).filter(|&e| rest[e..] == *next).ok_or_else(fail)?
                    } else if next.is_empty() {
                        return Err(fail());
                    } else {
                        rest.find(next).ok_or_else(fail)?
                    };
                    out.insert(s.to_string(), rest[..end].to_string());
                    rest = &rest[end..];
                }
            }
            k += 1;
        }
        if rest.is_empty() {
            Ok(out)
        } else {
            Err(fail())
        }
    }
}
