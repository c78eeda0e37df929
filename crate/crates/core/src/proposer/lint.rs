//! Deterministic linter: sandboxed application plus two repair classes.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::Proposal;
use crate::config::{apply_diff, path_alias, path_type, Config, Literal, OpKind, PathType};
use crate::persona::PersonaKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", content = "detail", rename_all = "snake_case")]
pub enum LintVerdict {
    Clean,
    /// Applied repairs, one line each.
    Fixed(Vec<String>),
    Rejected(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LintResult {
    pub verdict: LintVerdict,
    /// The proposal with repairs applied.
    pub proposal: Proposal,
    /// Baseline with the diff applied; present unless rejected.
    pub config: Option<Config>,
}

impl LintResult {
    pub fn passed(&self) -> bool {
        !matches!(self.verdict, LintVerdict::Rejected(_))
    }
}

fn numeric(text: &str) -> Option<f64> {
    text.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Repairs misspelled paths and numbers sent as strings, checks the diff
/// stays inside the persona's paths, then applies it to `baseline`.
pub fn lint_proposal(p: &Proposal, baseline: &Config, persona: PersonaKind) -> LintResult {
    let mut fixed = p.clone();
    let mut fixes = Vec::new();
    let reject = |reason: String, fixed: Proposal| LintResult {
        verdict: LintVerdict::Rejected(reason),
        proposal: fixed,
        config: None,
    };

    for op in &mut fixed.diff.ops {
        if path_type(&op.path).is_none() {
            match path_alias(&op.path) {
                Some(canonical) => {
                    fixes.push(alloc::format!("path `{}` -> `{canonical}`", op.path));
                    op.path = canonical.to_string();
                }
                None => return reject(alloc::format!("unknown path `{}`", op.path), fixed),
            }
        }
        if !persona.editable_prefixes().iter().any(|pre| op.path.starts_with(pre)) {
            let reason = alloc::format!("path `{}` is outside the {persona} persona's scope", op.path);
            return reject(reason, fixed);
        }
        let ty = path_type(&op.path).expect("resolved above");
        if op.op != OpKind::Set {
            continue;
        }
        let repaired = match (ty, &op.value) {
            (PathType::Float, Some(Literal::Text(t))) => numeric(t).map(Literal::Float),
            (PathType::Int, Some(Literal::Text(t))) => numeric(t)
                .filter(|v| libm::trunc(*v) == *v)
                .map(|v| Literal::Int(v as i64)),
            (PathType::Int, Some(Literal::Float(v))) if libm::trunc(*v) == *v && v.abs() < 9.0e15 => {
                Some(Literal::Int(*v as i64))
            }
            _ => None,
        };
        if let Some(lit) = repaired {
            fixes.push(alloc::format!("`{}` coerced from {} to {lit}", op.path, op.value.as_ref().unwrap()));
            op.value = Some(lit);
        }
    }

    match apply_diff(baseline, &fixed.diff) {
        Ok(c) => LintResult {
            verdict: if fixes.is_empty() {
                LintVerdict::Clean
            } else {
                LintVerdict::Fixed(fixes)
            },
            proposal: fixed,
            config: Some(c),
        },
        Err(e) => reject(e.to_string(), fixed),
    }
}
