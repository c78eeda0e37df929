//! Prompt template. Sections appear in a fixed order and the builder is a
//! pure function of its inputs.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write as _;

use crate::config::{serialize_config, Config};
use crate::journal::NO_HISTORY;
use crate::persona::PersonaSpec;

pub fn section_names() -> [&'static str; 7] {
    [
        "PERSONA",
        "TASK",
        "SPECIAL INSTRUCTIONS",
        "GUARDRAILS",
        "CONTEXT",
        "OUTPUT FORMAT",
        "EXAMPLE PROPOSAL",
    ]
}

/// Instantiates the template. An empty `journal_context` renders as the
/// cold-start marker. SPECIAL INSTRUCTIONS is omitted without steering.
pub fn build_prompt(p: &PersonaSpec, baseline: &Config, journal_context: &str) -> String {
    let mut s = String::new();
    let q = &p.quota;

    s.push_str("PERSONA\n");
    if p.framing {
        let _ = writeln!(
            s,
            "You are an accomplished machine learning researcher and a careful engineer. \
             Your specialty is {}.",
            p.specialization
        );
    } else {
        let _ = writeln!(s, "Focus area: {}.", p.specialization);
    }

    s.push_str("\nTASK\n");
    let _ = writeln!(
        s,
        "Study the production recommendation model below and suggest edits to {}.",
        p.task
    );
    let _ = writeln!(
        s,
        "Make {} explore, {} exploit, and {} innovate proposals.",
        q.explore, q.exploit, q.innovate
    );
    s.push_str(
        "explore: move to a method or family the baseline does not use.\n\
         exploit: nudge the strongest configuration seen so far.\n\
         innovate: attempt a large change nobody has tried yet.\n",
    );
    s.push_str("Objectives, most important first:\n");
    for (i, o) in p.objectives.iter().enumerate() {
        let _ = writeln!(s, "{}. {o}", i + 1);
    }
    s.push_str("Work through each idea carefully and verify the syntax of every edit before you answer.\n");

    if !p.steering.is_empty() {
        s.push_str("\nSPECIAL INSTRUCTIONS\n");
        for line in &p.steering {
            let _ = writeln!(s, "- {line}");
        }
    }

    s.push_str("\nGUARDRAILS\n");
    for g in &p.guardrails {
        let _ = writeln!(s, "- {}", g.line());
    }
    let prefixes: Vec<String> = p.kind.editable_prefixes().iter().map(|x| alloc::format!("{x}*")).collect();
    let _ = writeln!(s, "- Edit only these paths: {}", prefixes.join(", "));

    s.push_str("\nCONTEXT\nBaseline configuration:\n<config>\n");
    s.push_str(&serialize_config(baseline));
    s.push_str("</config>\n");
    let _ = writeln!(s, "Schema ({}):", p.schema_name);
    s.push_str(&p.schema_excerpt);
    s.push_str("\nExperiment journal:\n<journal>\n");
    let ctx = journal_context.trim_end();
    s.push_str(if ctx.is_empty() { NO_HISTORY } else { ctx });
    s.push_str("\n</journal>\n");

    s.push_str("\nOUTPUT FORMAT\n");
    s.push_str(
        "Reply with a single JSON array. Every element is an object with exactly two fields:\n\
         \"explanation\": the hypothesis, starting with its category tag such as [exploit];\n\
         \"diff\": a list of edits to the baseline, each {\"op\": \"set\", \"path\": ..., \"value\": ...} \
         or {\"op\": \"remove\", \"path\": ...}.\n",
    );

    s.push_str("\nEXAMPLE PROPOSAL\n[");
    s.push_str(&p.example);
    s.push_str("]\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::presets;
    use crate::persona::{PersonaKind, PersonaSpec};

    fn positions(text: &str) -> Vec<Option<usize>> {
        section_names()
            .iter()
            .map(|n| text.lines().position(|l| l == *n))
            .collect()
    }

    #[test]
    fn sections_in_order_and_steering_optional() {
        let mut p = PersonaSpec::new(PersonaKind::Optimizer);
        let base = presets::adagrad_linear();
        let text = build_prompt(&p, &base, "");
        assert!(text.contains("Keep Metric#3 \u{2264} +1%"));
        assert!(text.contains("<journal>\nno prior experiments\n</journal>"));
        let pos = positions(&text);
        assert_eq!(pos[2], None);
        let present: Vec<usize> = pos.iter().flatten().copied().collect();
        assert!(present.windows(2).all(|w| w[0] < w[1]));

        p.steering.push("Prefer momentum methods.".into());
        let steered = build_prompt(&p, &base, "");
        let pos = positions(&steered);
        assert!(pos.iter().all(Option::is_some));
        assert!(pos.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(build_prompt(&p, &base, "x"), build_prompt(&p, &base, "x"));
    }

    #[test]
    fn framing_toggle() {
        let mut p = PersonaSpec::new(PersonaKind::Architecture);
        let base = presets::dense_baseline();
        let on = build_prompt(&p, &base, "");
        p.framing = false;
        let off = build_prompt(&p, &base, "");
        assert!(on.contains("accomplished"));
        assert!(!off.contains("accomplished"));
    }
}
