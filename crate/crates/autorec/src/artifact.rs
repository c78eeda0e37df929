//! Inner-run artifact directory. Every file is JSON or JSON Lines and holds
//! nothing time- or host-dependent, so identical runs write identical bytes.
//!
//! - `run.json`: run settings, provider settings, baseline score, counts
//! - `prompts.jsonl`: `{round, prompt}` per round
//! - `raw.jsonl`: `{round, raw, error}` per round
//! - `proposals.jsonl`: one audit entry per proposal, with its disposition
//! - `ranking.jsonl`: scored candidates best first, with `rank`
//! - `replay.jsonl`: raw responses as JSON strings, loadable by the scripted provider

use std::fs;
use std::io;
use std::path::Path;

use autorec_core::offline::{Candidate, InnerLoopArtifact, InnerLoopRun};
use autorec_core::proposer::ProviderConfig;
use autorec_core::score::Score;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::providers::replay_lines;

pub const RUN_FILE: &str = "run.json";
pub const PROMPTS_FILE: &str = "prompts.jsonl";
pub const RAW_FILE: &str = "raw.jsonl";
pub const PROPOSALS_FILE: &str = "proposals.jsonl";
pub const RANKING_FILE: &str = "ranking.jsonl";
pub const REPLAY_FILE: &str = "replay.jsonl";

pub const ALL_FILES: [&str; 6] = [RUN_FILE, PROMPTS_FILE, RAW_FILE, PROPOSALS_FILE, RANKING_FILE, REPLAY_FILE];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run: InnerLoopRun,
    pub provider: ProviderConfig,
    pub baseline_score: Score,
    pub noise_margin: f64,
    pub scored_ideas: usize,
    pub rejected: usize,
    pub candidates: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedEntry {
    pub rank: usize,
    #[serde(flatten)]
    pub candidate: Candidate,
}

fn jsonl<T: Serialize>(items: impl IntoIterator<Item = T>) -> String {
    items
        .into_iter()
        .map(|x| serde_json::to_string(&x).expect("serializable") + "\n")
        .collect()
}

pub fn ranking(art: &InnerLoopArtifact) -> Vec<RankedEntry> {
    art.ranked
        .entries
        .iter()
        .enumerate()
        .map(|(i, c)| RankedEntry {
            rank: i + 1,
            candidate: c.clone(),
        })
        .collect()
}

/// Writes the artifact into `dir`, replacing any earlier artifact files.
pub fn write_run(
    dir: &Path,
    run: &InnerLoopRun,
    provider: &ProviderConfig,
    art: &InnerLoopArtifact,
    noise_margin: f64,
) -> io::Result<RunSummary> {
    fs::create_dir_all(dir)?;
    let summary = RunSummary {
        run: run.clone(),
        provider: provider.clone(),
        baseline_score: art.baseline_score.clone(),
        noise_margin,
        scored_ideas: art.scored_ideas(),
        rejected: art.lint_rejects(),
        candidates: art.ranked.entries.len(),
    };
    fs::write(dir.join(RUN_FILE), serde_json::to_string_pretty(&summary).expect("serializable") + "\n")?;
    fs::write(
        dir.join(PROMPTS_FILE),
        jsonl(art.rounds.iter().map(|r| json!({ "round": r.round, "prompt": r.prompt }))),
    )?;
    fs::write(
        dir.join(RAW_FILE),
        jsonl(art.rounds.iter().map(|r| json!({ "round": r.round, "raw": r.raw, "error": r.error }))),
    )?;
    fs::write(dir.join(PROPOSALS_FILE), jsonl(&art.audit))?;
    fs::write(dir.join(RANKING_FILE), jsonl(ranking(art)))?;
    let raws: Vec<String> = art.rounds.iter().filter_map(|r| r.raw.clone()).collect();
    fs::write(dir.join(REPLAY_FILE), replay_lines(&raws))?;
    Ok(summary)
}

pub fn read_ranking(dir: &Path) -> io::Result<Vec<RankedEntry>> {
    fs::read_to_string(dir.join(RANKING_FILE))?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(io::Error::other))
        .collect()
}
