//! Inner loop: prompt, propose, lint, score and rank, round after round,
//! then promote the candidates that clear the noise margin.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::config::{serialize_config, validate_config, Config, Diff};
use crate::journal::{render_context, ContextStrategy, JournalRecord, RecordStatus, DEFAULT_CHAR_BUDGET};
use crate::math::splitmix64;
use crate::persona::{PersonaKind, PersonaSpec, Quota};
use crate::proposer::{build_prompt, lint_proposal, parse_proposals, LintVerdict, Proposal, Provenance, Provider};
use crate::score::{Score, ScoreKind};
use crate::tools::Scorer;

/// Runs scoring jobs. Implementations may fan out; results keep input order.
pub trait Executor: Sync {
    fn score_all(&self, scorer: &dyn Scorer, configs: &[Config]) -> Vec<Score>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SerialExecutor;

impl Executor for SerialExecutor {
    fn score_all(&self, scorer: &dyn Scorer, configs: &[Config]) -> Vec<Score> {
        configs.iter().map(|c| scorer.score(c)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OfflineError {
    #[error("persona {persona} is scored by {expected} but the tool reports {got}")]
    ScoreKindMismatch {
        persona: PersonaKind,
        expected: ScoreKind,
        got: ScoreKind,
    },
    #[error("baseline fails validation: {0}")]
    InvalidBaseline(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InnerLoopRun {
    pub persona: PersonaSpec,
    #[serde(with = "crate::config::as_text")]
    pub baseline: Config,
    pub rounds: u32,
    pub proposals_per_round: u32,
    pub promotion_k: u32,
    pub context_strategy: ContextStrategy,
    pub char_budget: usize,
    pub seed: u64,
    /// Prior journal records shown alongside this run's own results.
    pub history: Vec<JournalRecord>,
}

impl InnerLoopRun {
    pub fn new(persona: PersonaSpec, baseline: Config, seed: u64) -> Self {
        Self {
            persona,
            baseline,
            rounds: 7,
            proposals_per_round: 10,
            promotion_k: 3,
            context_strategy: ContextStrategy::FullSortedByScore,
            char_budget: DEFAULT_CHAR_BUDGET,
            seed,
            history: Vec::new(),
        }
    }
}

/// Terminal outcome of one parsed or attempted proposal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "disposition", content = "reason", rename_all = "snake_case")]
pub enum Disposition {
    Scored,
    ParseRejected(String),
    LintRejected(String),
    ToolFailed(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub round: u32,
    pub index: usize,
    pub trial_id: Option<u64>,
    pub proposal: Option<Proposal>,
    /// Raw element text for parse rejections.
    pub raw: Option<String>,
    pub lint: Option<LintVerdict>,
    pub score: Option<Score>,
    pub disposition: Disposition,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundLog {
    pub round: u32,
    pub prompt: String,
    pub raw: Option<String>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub trial_id: u64,
    pub proposal: Proposal,
    /// Canonical text of the patched configuration.
    pub config: String,
    pub score: Score,
}

impl Candidate {
    pub fn config(&self) -> Config {
        crate::config::parse_config(&self.config).expect("candidates hold canonical text")
    }
}

/// Candidates of a single score kind, best first, failures last.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedCandidates {
    pub kind: ScoreKind,
    pub entries: Vec<Candidate>,
}

impl RankedCandidates {
    pub fn new(kind: ScoreKind) -> Self {
        Self {
            kind,
            entries: Vec::new(),
        }
    }

    /// Inserts in rank order; ties keep arrival order. Panics on a foreign
    /// score kind, which would make the ranking meaningless.
    pub fn insert(&mut self, c: Candidate) {
        assert_eq!(c.score.kind, self.kind, "score kinds never mix in one ranking");
        let at = self
            .entries
            .partition_point(|e| e.score.rank_cmp(&c.score) != Some(core::cmp::Ordering::Greater));
        self.entries.insert(at, c);
    }

    pub fn best(&self) -> Option<&Candidate> {
        self.entries.first().filter(|c| !c.score.is_failed())
    }

    /// Lowest-cost candidate whose loss is at most `ceiling`.
    pub fn cheapest_within(&self, ceiling: f64) -> Option<&Candidate> {
        self.entries
            .iter()
            .filter(|c| !c.score.is_failed() && c.score.value <= ceiling)
            .min_by(|a, b| {
                a.score
                    .cost_units
                    .total_cmp(&b.score.cost_units)
                    .then(a.score.value.total_cmp(&b.score.value))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InnerLoopArtifact {
    pub persona: PersonaKind,
    pub baseline_score: Score,
    pub rounds: Vec<RoundLog>,
    pub audit: Vec<AuditEntry>,
    pub ranked: RankedCandidates,
}

impl InnerLoopArtifact {
    /// Proposals that reached the tool.
    pub fn scored_ideas(&self) -> usize {
        self.audit
            .iter()
            .filter(|a| matches!(a.disposition, Disposition::Scored | Disposition::ToolFailed(_)))
            .count()
    }

    pub fn lint_rejects(&self) -> usize {
        self.audit
            .iter()
            .filter(|a| matches!(a.disposition, Disposition::LintRejected(_) | Disposition::ParseRejected(_)))
            .count()
    }
}

fn round_seed(seed: u64, round: u32) -> u64 {
    splitmix64(seed ^ splitmix64(0xA11CE + round as u64))
}

/// Runs `run.rounds` sequential rounds. Each round sees the history plus
/// everything scored so far, rendered per the context strategy. A provider
/// error skips its round; a tool error fails its candidate only.
pub fn run_inner_loop(
    run: &InnerLoopRun,
    provider: &mut dyn Provider,
    scorer: &dyn Scorer,
    exec: &dyn Executor,
) -> Result<InnerLoopArtifact, OfflineError> {
    let kind = run.persona.kind;
    if scorer.kind() != kind.score_kind() {
        return Err(OfflineError::ScoreKindMismatch {
            persona: kind,
            expected: kind.score_kind(),
            got: scorer.kind(),
        });
    }
    let report = validate_config(&run.baseline);
    if let Some(v) = report.violations.first() {
        return Err(OfflineError::InvalidBaseline(alloc::format!("{}: {}", v.path, v.rule)));
    }
    let baseline_score = scorer.score(&run.baseline);
    let mut persona = run.persona.clone();
    if persona.quota.total() != run.proposals_per_round {
        persona.quota = Quota::scaled(run.proposals_per_round);
    }
    let mut working: Vec<JournalRecord> = run.history.iter().filter(|r| r.persona == kind).cloned().collect();
    let mut next_id = working.iter().map(|r| r.trial_id + 1).max().unwrap_or(1);
    let mut out = InnerLoopArtifact {
        persona: kind,
        baseline_score,
        rounds: Vec::new(),
        audit: Vec::new(),
        ranked: RankedCandidates::new(kind.score_kind()),
    };

    for round in 0..run.rounds {
        let context = render_context(&working, run.context_strategy, kind, run.char_budget);
        let prompt = build_prompt(&persona, &run.baseline, &context);
        let raw = match provider.request(&prompt, run.proposals_per_round as usize, round_seed(run.seed, round)) {
            Ok(raw) => raw,
            Err(e) => {
                out.rounds.push(RoundLog {
                    round,
                    prompt,
                    raw: None,
                    error: Some(e.to_string()),
                });
                continue;
            }
        };
        let parsed = match parse_proposals(&raw, &persona.quota, provider.provenance()) {
            Ok(p) => p,
            Err(e) => {
                out.rounds.push(RoundLog {
                    round,
                    prompt,
                    raw: Some(raw),
                    error: Some(e.to_string()),
                });
                continue;
            }
        };
        out.rounds.push(RoundLog {
            round,
            prompt,
            raw: Some(raw),
            error: None,
        });
        for rej in parsed.rejections {
            out.audit.push(AuditEntry {
                round,
                index: rej.index,
                trial_id: None,
                proposal: None,
                raw: Some(rej.raw),
                lint: None,
                score: None,
                disposition: Disposition::ParseRejected(rej.reason),
            });
        }

        let mut pending: Vec<(usize, Proposal, LintVerdict, Config)> = Vec::new();
        for (index, p) in parsed.proposals.into_iter().enumerate() {
            let lint = lint_proposal(&p, &run.baseline, kind);
            match (lint.verdict, lint.config) {
                (verdict, Some(config)) if !matches!(verdict, LintVerdict::Rejected(_)) => {
                    pending.push((index, lint.proposal, verdict, config));
                }
                (verdict, _) => {
                    let reason = match &verdict {
                        LintVerdict::Rejected(r) => r.clone(),
                        _ => "lint produced no configuration".to_string(),
                    };
                    out.audit.push(AuditEntry {
                        round,
                        index,
                        trial_id: None,
                        proposal: Some(lint.proposal),
                        raw: None,
                        lint: Some(verdict),
                        score: None,
                        disposition: Disposition::LintRejected(reason),
                    });
                }
            }
        }

        let configs: Vec<Config> = pending.iter().map(|p| p.3.clone()).collect();
        let scores = exec.score_all(scorer, &configs);
        for ((index, proposal, verdict, config), score) in pending.into_iter().zip(scores) {
            let trial_id = next_id;
            next_id += 1;
            let disposition = if score.kind != kind.score_kind() {
                Disposition::ToolFailed(alloc::format!("tool returned a {} score", score.kind))
            } else if score.is_failed() {
                Disposition::ToolFailed(score.detail.clone())
            } else {
                Disposition::Scored
            };
            let score = if score.kind == kind.score_kind() {
                score
            } else {
                Score::failed(kind.score_kind(), "score kind mismatch")
            };
            working.push(JournalRecord {
                trial_id,
                persona: kind,
                diff_text: proposal.diff.render(),
                diff: proposal.diff.clone(),
                offline_score: Some(score.clone()),
                online: None,
                status: if score.is_failed() {
                    RecordStatus::Failed
                } else {
                    RecordStatus::Scored
                },
                detail: String::new(),
                submitted_tick: round as u64,
                finished_tick: round as u64,
                cost_units: score.cost_units,
            });
            out.ranked.insert(Candidate {
                trial_id,
                proposal: proposal.clone(),
                config: serialize_config(&config),
                score: score.clone(),
            });
            out.audit.push(AuditEntry {
                round,
                index,
                trial_id: Some(trial_id),
                proposal: Some(proposal),
                raw: None,
                lint: Some(verdict),
                score: Some(score),
                disposition,
            });
        }
    }
    Ok(out)
}

/// Where a trial came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Agent,
    Human,
}

/// What the online queue accepts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialManifest {
    pub diff: Diff,
    pub source: Source,
    pub persona: PersonaKind,
    #[serde(default)]
    pub explanation: String,
    #[serde(default)]
    pub offline_score: Option<Score>,
    #[serde(default)]
    pub provenance: Option<Provenance>,
}

/// Up to `k` best candidates that beat `baseline` by more than `margin`.
pub fn promote_top_k(ranked: &RankedCandidates, k: usize, baseline: &Score, margin: f64, persona: PersonaKind) -> Vec<TrialManifest> {
    ranked
        .entries
        .iter()
        .filter(|c| c.score.improvement_over(baseline.value) > margin)
        .take(k)
        .map(|c| TrialManifest {
            diff: c.proposal.diff.clone(),
            source: Source::Agent,
            persona,
            explanation: c.proposal.explanation.clone(),
            offline_score: Some(c.score.clone()),
            provenance: Some(c.proposal.provenance),
        })
        .collect()
}
