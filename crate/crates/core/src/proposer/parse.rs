//! Extraction of proposals from free-form replies.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use serde_json::Value as Json;

use super::{Proposal, Provenance};
use crate::config::Diff;
use crate::persona::{Category, Quota};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("no JSON array found in provider output")]
    NoArray,
}

/// One array element that could not become a proposal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    pub index: usize,
    pub reason: String,
    /// The element as JSON text.
    pub raw: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ParseOutcome {
    pub proposals: Vec<Proposal>,
    pub rejections: Vec<Rejection>,
}

/// The first balanced `[...]` span that parses as a JSON array.
pub fn extract_json_array(text: &str) -> Option<Vec<Json>> {
    let bytes = text.as_bytes();
    for (start, _) in text.match_indices('[') {
        let mut depth = 0usize;
        let mut in_str = false;
        let mut escaped = false;
        for (off, &b) in bytes[start..].iter().enumerate() {
            if in_str {
                match b {
                    _ if escaped => escaped = false,
                    b'\\' => escaped = true,
                    b'"' => in_str = false,
                    _ => {}
                }
                continue;
            }
            match b {
                b'"' => in_str = true,
                b'[' => depth += 1,
                b']' => {
                    depth -= 1;
                    if depth == 0 {
                        if let Ok(v) = serde_json::from_str::<Vec<Json>>(&text[start..=start + off]) {
                            return Some(v);
                        }
                        break;
                    }
                }
                _ => {}
            }
        }
    }
    None
}

/// Category from a leading `[tag]` in the explanation.
fn tagged_category(explanation: &str) -> Option<Category> {
    let rest = explanation.trim_start().strip_prefix('[')?;
    let tag = rest.split(']').next()?.trim().to_ascii_lowercase();
    Category::ALL.into_iter().find(|c| c.as_str() == tag)
}

fn element(v: &Json) -> Result<(String, Diff), String> {
    let obj = v.as_object().ok_or("element is not an object")?;
    for key in obj.keys() {
        if key != "explanation" && key != "diff" {
            return Err(alloc::format!("unexpected field `{key}`"));
        }
    }
    let explanation = obj
        .get("explanation")
        .ok_or("missing field `explanation`")?
        .as_str()
        .ok_or("`explanation` is not a string")?
        .to_string();
    let diff_json = obj.get("diff").ok_or("missing field `diff`")?;
    let diff: Diff = serde_json::from_value(diff_json.clone()).map_err(|e| alloc::format!("bad diff: {e}"))?;
    if diff.is_empty() {
        return Err("diff is empty".into());
    }
    Ok((explanation, diff))
}

/// Reads every proposal in the first JSON array of `raw`. Elements that fail
/// are returned as rejections and do not affect the others. Untagged
/// proposals take the category of their position in `quota`.
pub fn parse_proposals(raw: &str, quota: &Quota, provenance: Provenance) -> Result<ParseOutcome, ParseError> {
    let items = extract_json_array(raw).ok_or(ParseError::NoArray)?;
    let mut out = ParseOutcome::default();
    for (index, v) in items.iter().enumerate() {
        match element(v) {
            Ok((explanation, diff)) => {
                let category = tagged_category(&explanation).unwrap_or_else(|| quota.category_at(index));
                out.proposals.push(Proposal {
                    explanation,
                    diff,
                    category,
                    provenance,
                });
            }
            Err(reason) => out.rejections.push(Rejection {
                index,
                reason,
                raw: v.to_string(),
            }),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const THREE: &str = r#"[
      {"explanation": "[explore] rmsprop", "diff": [{"op": "set", "path": "optimizer.kind", "value": "rmsprop"}]},
      {"explanation": "lower lr", "diff": [{"op": "set", "path": "optimizer.learning_rate", "value": 0.05}]},
      {"explanation": "[Innovate] more epochs", "diff": [{"op": "set", "path": "training.epochs", "value": 8}]}
    ]"#;

    #[test]
    fn clean_array() {
        let out = parse_proposals(THREE, &Quota::default(), Provenance::Llm).unwrap();
        assert_eq!(out.proposals.len(), 3);
        assert!(out.rejections.is_empty());
        let cats: Vec<Category> = out.proposals.iter().map(|p| p.category).collect();
        assert_eq!(cats, [Category::Explore, Category::Explore, Category::Innovate]);
    }

    #[test]
    fn wrapped_in_prose_and_fences() {
        let raw = alloc::format!("Sure! [explore] ideas below.\n```json\n{THREE}\n```\nLet me know [if] that helps.");
        let out = parse_proposals(&raw, &Quota::default(), Provenance::Llm).unwrap();
        assert_eq!(out.proposals.len(), 3);
    }

    #[test]
    fn element_level_rejection() {
        let raw = THREE.replacen(r#", "diff": [{"op": "set", "path": "optimizer.learning_rate", "value": 0.05}]"#, "", 1);
        let out = parse_proposals(&raw, &Quota::default(), Provenance::Llm).unwrap();
        assert_eq!(out.proposals.len(), 2);
        assert_eq!(out.rejections.len(), 1);
        assert_eq!(out.rejections[0].index, 1);
        assert!(out.rejections[0].reason.contains("diff"));
    }

    #[test]
    fn extra_fields_and_empty_diffs_rejected() {
        let raw = r#"[{"explanation": "x", "diff": [], "score": 1},
                      {"explanation": "y", "diff": []},
                      {"explanation": "z", "diff": [{"op": "set", "path": "a.b", "value": 1, "note": 2}]}]"#;
        let out = parse_proposals(raw, &Quota::default(), Provenance::Llm).unwrap();
        assert!(out.proposals.is_empty());
        assert_eq!(out.rejections.len(), 3);
    }

    #[test]
    fn no_array() {
        assert_eq!(
            parse_proposals("I could not think of anything.", &Quota::default(), Provenance::Llm),
            Err(ParseError::NoArray)
        );
    }

    #[test]
    fn brackets_inside_strings() {
        let raw = r#"[{"explanation": "use [glu] ] gate", "diff": [{"op": "set", "path": "architecture.blocks", "value": "[glu_gate(8)]"}]}]"#;
        let out = parse_proposals(raw, &Quota::default(), Provenance::Llm).unwrap();
        assert_eq!(out.proposals.len(), 1);
    }
}
