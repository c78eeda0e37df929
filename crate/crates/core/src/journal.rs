//! Experiment journal: append-only outcomes and the context renderings that
//! feed them back into proposal prompts.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::config::Diff;
use crate::persona::PersonaKind;
use crate::score::{rank_values, Score, ScoreKind};
use crate::sim::OnlineMetricsReport;

pub const DEFAULT_CHAR_BUDGET: usize = 40_000;
pub const NO_HISTORY: &str = "no prior experiments";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordStatus {
    /// Evaluated offline only (inner-loop working context).
    Scored,
    Completed,
    Aborted,
    Failed,
}

impl RecordStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Scored => "scored",
            Self::Completed => "completed",
            Self::Aborted => "aborted",
            Self::Failed => "failed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JournalRecord {
    pub trial_id: u64,
    pub persona: PersonaKind,
    pub diff: Diff,
    /// `diff` in its rendered text form.
    pub diff_text: String,
    pub offline_score: Option<Score>,
    pub online: Option<OnlineMetricsReport>,
    pub status: RecordStatus,
    /// Failure or abort reason; empty otherwise.
    pub detail: String,
    pub submitted_tick: u64,
    pub finished_tick: u64,
    pub cost_units: f64,
}

impl JournalRecord {
    /// Reached live traffic with an offline score, then lost online or was
    /// aborted.
    pub fn misaligned(&self) -> bool {
        let Some(m) = &self.online else { return false };
        self.offline_score.as_ref().is_some_and(|s| !s.is_failed())
            && (self.status == RecordStatus::Aborted || m.metric1 + m.confidence_halfwidth < 0.0)
    }

    fn sort_value(&self, kind: ScoreKind) -> f64 {
        match &self.offline_score {
            Some(s) if s.kind == kind => s.value,
            _ => f64::INFINITY,
        }
    }

    /// Text block used in prompts.
    pub fn render(&self) -> String {
        let mut s = alloc::format!("#{} {}", self.trial_id, self.status.as_str());
        match &self.offline_score {
            Some(sc) if sc.is_failed() => s.push_str(&alloc::format!(" | {}=failed", sc.kind)),
            Some(sc) => s.push_str(&alloc::format!(" | {}={:?}", sc.kind, sc.value)),
            None => s.push_str(" | unscored"),
        }
        s.push_str(&alloc::format!(" | cost_units={:?}\n  diff: {}\n", self.cost_units, self.diff_text));
        if let Some(m) = &self.online {
            s.push_str(&alloc::format!(
                "  online: metric1={:+.5} metric2={:+.5} metric3={:+.5} halfwidth={:.5} ticks={}",
                m.metric1, m.metric2, m.metric3, m.confidence_halfwidth, m.ticks_observed
            ));
            if self.misaligned() {
                s.push_str(" MISALIGNED");
            }
            s.push('\n');
        }
        if !self.detail.is_empty() {
            s.push_str(&alloc::format!("  note: {}\n", self.detail));
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ContextStrategy {
    FullSortedByScore,
    FullByTimestamp,
    TopK(usize),
    None,
}

impl fmt::Display for ContextStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::FullSortedByScore => f.write_str("full_sorted_by_score"),
            Self::FullByTimestamp => f.write_str("full_by_timestamp"),
            Self::TopK(k) => write!(f, "top_{k}"),
            Self::None => f.write_str("none"),
        }
    }
}

impl FromStr for ContextStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "full_sorted_by_score" | "full_sorted" => Ok(Self::FullSortedByScore),
            "full_by_timestamp" => Ok(Self::FullByTimestamp),
            "none" => Ok(Self::None),
            _ => s
                .strip_prefix("top_")
                .and_then(|k| k.parse().ok())
                .filter(|k| *k > 0)
                .map(Self::TopK)
                .ok_or_else(|| alloc::format!("unknown context strategy `{s}`")),
        }
    }
}

impl TryFrom<String> for ContextStrategy {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<ContextStrategy> for String {
    fn from(s: ContextStrategy) -> String {
        s.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum JournalError {
    #[error("trial {0} is already journaled")]
    Duplicate(u64),
}

/// In-memory journal. Durable backends wrap this and persist each append.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Journal {
    records: Vec<JournalRecord>,
}

impl Journal {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn append(&mut self, r: JournalRecord) -> Result<(), JournalError> {
        if self.records.iter().any(|x| x.trial_id == r.trial_id) {
            return Err(JournalError::Duplicate(r.trial_id));
        }
        self.records.push(r);
        Ok(())
    }

    pub fn records(&self) -> &[JournalRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn render_context(&self, strategy: ContextStrategy, persona: PersonaKind, budget: usize) -> String {
        render_context(&self.records, strategy, persona, budget)
    }
}

/// Records of `persona` ordered per `strategy`, best first for the sorted
/// variants. Ties keep append order.
pub fn select_records(records: &[JournalRecord], strategy: ContextStrategy, persona: PersonaKind) -> Vec<&JournalRecord> {
    let mut v: Vec<&JournalRecord> = records.iter().filter(|r| r.persona == persona).collect();
    let kind = persona.score_kind();
    match strategy {
        ContextStrategy::None => v.clear(),
        ContextStrategy::FullByTimestamp => {}
        ContextStrategy::FullSortedByScore => v.sort_by(|a, b| rank_values(kind, a.sort_value(kind), b.sort_value(kind))),
        ContextStrategy::TopK(k) => {
            v.sort_by(|a, b| rank_values(kind, a.sort_value(kind), b.sort_value(kind)));
            v.truncate(k);
        }
    }
    v
}

/// Deterministic context block. Whole records are dropped from the tail to
/// respect `budget`, with a notice saying how many.
pub fn render_context(
    records: &[JournalRecord],
    strategy: ContextStrategy,
    persona: PersonaKind,
    budget: usize,
) -> String {
    let chosen = select_records(records, strategy, persona);
    if chosen.is_empty() {
        return NO_HISTORY.to_string();
    }
    let header = alloc::format!(
        "{} past {} experiment(s), ordering: {strategy}\n",
        chosen.len(),
        persona
    );
    let mut out = header;
    let mut kept = 0;
    for r in &chosen {
        let block = r.render();
        let remaining = chosen.len() - kept - 1;
        let notice_room = if remaining > 0 { notice(remaining).len() } else { 0 };
        if out.len() + block.len() + notice_room > budget {
            break;
        }
        out.push_str(&block);
        kept += 1;
    }
    if kept < chosen.len() {
        out.push_str(&notice(chosen.len() - kept));
    }
    out
}

fn notice(dropped: usize) -> String {
    alloc::format!("[{dropped} more record(s) omitted to fit the context budget]\n")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(id: u64, loss: f64) -> JournalRecord {
        JournalRecord {
            trial_id: id,
            persona: PersonaKind::Optimizer,
            diff: Diff::default(),
            diff_text: "(baseline)".into(),
            offline_score: Some(Score::new(ScoreKind::ProxyLoss, loss, 10.0, "")),
            online: None,
            status: RecordStatus::Scored,
            detail: String::new(),
            submitted_tick: id,
            finished_tick: id,
            cost_units: 10.0,
        }
    }

    fn order(text: &str) -> Vec<u64> {
        text.lines()
            .filter_map(|l| l.strip_prefix('#'))
            .map(|l| l.split(' ').next().unwrap().parse().unwrap())
            .collect()
    }

    #[test]
    fn sorted_and_top_k() {
        let rs = [rec(1, 0.7), rec(2, 0.5), rec(3, 0.9)];
        let p = PersonaKind::Optimizer;
        assert_eq!(order(&render_context(&rs, ContextStrategy::FullSortedByScore, p, 10_000)), [2, 1, 3]);
        assert_eq!(order(&render_context(&rs, ContextStrategy::FullByTimestamp, p, 10_000)), [1, 2, 3]);
        assert_eq!(order(&render_context(&rs, ContextStrategy::TopK(1), p, 10_000)), [2]);
        assert_eq!(render_context(&rs, ContextStrategy::None, p, 10_000), NO_HISTORY);
        assert_eq!(render_context(&rs, ContextStrategy::FullByTimestamp, PersonaKind::Reward, 10_000), NO_HISTORY);
    }

    #[test]
    fn budget_drops_whole_records() {
        let rs: Vec<_> = (0..20).map(|i| rec(i, i as f64)).collect();
        let full = render_context(&rs, ContextStrategy::FullSortedByScore, PersonaKind::Optimizer, usize::MAX);
        let cut = render_context(&rs, ContextStrategy::FullSortedByScore, PersonaKind::Optimizer, 600);
        assert!(cut.len() <= 600);
        assert!(cut.contains("omitted to fit the context budget"));
        let kept = order(&cut);
        assert_eq!(kept[..], order(&full)[..kept.len()]);
    }

    #[test]
    fn strategy_names_round_trip() {
        for s in [
            ContextStrategy::FullSortedByScore,
            ContextStrategy::FullByTimestamp,
            ContextStrategy::TopK(5),
            ContextStrategy::None,
        ] {
            assert_eq!(s.to_string().parse::<ContextStrategy>().unwrap(), s);
        }
        assert!("top_0".parse::<ContextStrategy>().is_err());
    }

    #[test]
    fn duplicate_append_rejected() {
        let mut j = Journal::new();
        j.append(rec(1, 0.1)).unwrap();
        assert_eq!(j.append(rec(1, 0.2)), Err(JournalError::Duplicate(1)));
        assert_eq!(j.len(), 1);
    }

    #[test]
    fn misaligned_flag() {
        let mut r = rec(4, 0.1);
        r.status = RecordStatus::Completed;
        r.online = Some(OnlineMetricsReport {
            metric1: -0.01,
            metric2: 0.0,
            metric3: 0.0,
            confidence_halfwidth: 0.002,
            ticks_observed: 14,
        });
        assert!(r.render().contains("MISALIGNED"));
        r.online.as_mut().unwrap().metric1 = 0.01;
        assert!(!r.render().contains("MISALIGNED"));
    }
}
