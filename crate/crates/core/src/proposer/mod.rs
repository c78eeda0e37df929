//! The model boundary: prompt construction, pluggable proposal providers,
//! and the parser and linter that turn raw replies into checked diffs.

mod heuristic;
mod lint;
mod parse;
mod prompt;

pub use heuristic::{HeuristicProvider, MutationPolicy, PromptView, ViewRecord};
pub use lint::{lint_proposal, LintResult, LintVerdict};
pub use parse::{extract_json_array, parse_proposals, ParseError, ParseOutcome, Rejection};
pub use prompt::{build_prompt, section_names};

use alloc::collections::VecDeque;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::config::Diff;
use crate::persona::Category;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Llm,
    Scripted,
    Heuristic,
    Human,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Proposal {
    pub explanation: String,
    pub diff: Diff,
    pub category: Category,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProviderError {
    #[error("replay exhausted after {0} responses")]
    Exhausted(usize),
    #[error("provider timed out after {0} attempts")]
    Timeout(u32),
    #[error("provider transport error: {0}")]
    Transport(String),
    #[error("provider returned status {status}: {message}")]
    Status { status: u16, message: String },
    #[error("provider cannot read the prompt: {0}")]
    Prompt(String),
}

/// A source of raw proposal text.
pub trait Provider {
    fn provenance(&self) -> Provenance;

    /// Raw reply for `prompt`, asked to contain `n` proposals.
    fn request(&mut self, prompt: &str, n: usize, seed: u64) -> Result<String, ProviderError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ProviderKind {
    HttpLlm {
        endpoint: String,
        /// Name of the environment variable holding the bearer token.
        token_env: String,
        max_tokens: u32,
    },
    Scripted {
        replay_path: String,
    },
    Heuristic {
        #[serde(default)]
        policy: MutationPolicy,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderConfig {
    #[serde(flatten)]
    pub kind: ProviderKind,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
}

fn default_timeout_ms() -> u64 {
    60_000
}

fn default_retries() -> u32 {
    2
}

impl ProviderConfig {
    pub fn heuristic() -> Self {
        Self {
            kind: ProviderKind::Heuristic {
                policy: MutationPolicy::default(),
            },
            timeout_ms: default_timeout_ms(),
            max_retries: default_retries(),
        }
    }

    pub fn scripted(replay_path: impl Into<String>) -> Self {
        Self {
            kind: ProviderKind::Scripted {
                replay_path: replay_path.into(),
            },
            timeout_ms: default_timeout_ms(),
            max_retries: 0,
        }
    }
}

/// Replays recorded responses in order and ignores the prompt.
#[derive(Debug, Clone, Default)]
pub struct ScriptedProvider {
    entries: VecDeque<String>,
    served: usize,
}

impl ScriptedProvider {
    pub fn new(entries: Vec<String>) -> Self {
        Self {
            entries: entries.into(),
            served: 0,
        }
    }

    pub fn remaining(&self) -> usize {
        self.entries.len()
    }
}

impl Provider for ScriptedProvider {
    fn provenance(&self) -> Provenance {
        Provenance::Scripted
    }

    fn request(&mut self, _prompt: &str, _n: usize, _seed: u64) -> Result<String, ProviderError> {
        let next = self.entries.pop_front().ok_or(ProviderError::Exhausted(self.served))?;
        self.served += 1;
        Ok(next)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    #[test]
    fn replay_contract() {
        let mut p = ScriptedProvider::new(vec!["a".into(), "b".into(), "c".into()]);
        let got: Vec<String> = (0..3).map(|_| p.request("", 1, 0).unwrap()).collect();
        assert_eq!(got, ["a", "b", "c"]);
        assert_eq!(p.request("", 1, 0), Err(ProviderError::Exhausted(3)));
    }

    #[test]
    fn provider_config_wire_form() {
        let c = ProviderConfig::scripted("replay.jsonl");
        let text = serde_json::to_string(&c).unwrap();
        assert!(text.contains(r#""kind":"scripted""#), "{text}");
        assert_eq!(serde_json::from_str::<ProviderConfig>(&text).unwrap(), c);
        let h: ProviderConfig = serde_json::from_str(r#"{"kind": "heuristic"}"#).unwrap();
        assert_eq!(h, ProviderConfig::heuristic());
        assert_eq!(ProviderError::Exhausted(3).to_string(), "replay exhausted after 3 responses");
    }
}
