//! Persona tools: the trainer-backed loss score and the log-query-backed
//! correlation battery.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::config::{Config, RewardSpec, Signal, Transform};
use crate::math;
use crate::query::{run_sql_query, QueryLimits};
use crate::score::{Score, ScoreKind};
use crate::sim::LogTable;
use crate::trainer::{compute_loss, Dataset, TrainStatus};

/// Scores a full configuration with one persona's tool.
pub trait Scorer: Sync {
    fn kind(&self) -> ScoreKind;

    fn score(&self, c: &Config) -> Score;

    /// Seed-to-seed spread of `c`'s score; the margin an improvement must
    /// clear to count.
    fn noise_margin(&self, c: &Config) -> f64;
}

/// Mean held-out loss over a fixed seed set.
#[derive(Debug, Clone)]
pub struct TrainerScorer {
    pub data: Dataset,
    pub seeds: Vec<u64>,
}

impl TrainerScorer {
    pub fn new(data: Dataset, seed: u64) -> Self {
        Self {
            data,
            seeds: alloc::vec![seed],
        }
    }

    pub fn with_seeds(data: Dataset, seeds: Vec<u64>) -> Self {
        assert!(!seeds.is_empty(), "at least one seed");
        Self { data, seeds }
    }

    /// Single-seed losses, `+inf` for diverged or invalid runs.
    pub fn losses(&self, c: &Config, seeds: &[u64]) -> Vec<f64> {
        seeds
            .iter()
            .map(|s| match compute_loss(c, &self.data, *s) {
                Ok(r) if r.status == TrainStatus::Ok => r.final_validation_loss,
                _ => f64::INFINITY,
            })
            .collect()
    }

    /// Three seeds: the scorer's own when it has at least three, otherwise
    /// the first seed and its two successors.
    pub fn margin_seeds(&self) -> Vec<u64> {
        if self.seeds.len() >= 3 {
            self.seeds[..3].to_vec()
        } else {
            (0..3).map(|i| self.seeds[0].wrapping_add(i)).collect()
        }
    }
}

impl Scorer for TrainerScorer {
    fn kind(&self) -> ScoreKind {
        ScoreKind::ProxyLoss
    }

    fn score(&self, c: &Config) -> Score {
        let mut total = 0.0;
        let mut cost = 0.0;
        for s in &self.seeds {
            match compute_loss(c, &self.data, *s) {
                Ok(r) if r.status == TrainStatus::Ok => {
                    total += r.final_validation_loss;
                    cost += r.cost_units;
                }
                Ok(r) => {
                    return Score {
                        cost_units: cost + r.cost_units,
                        ..Score::failed(ScoreKind::ProxyLoss, alloc::format!("diverged on {} seed {s}", self.data.name))
                    }
                }
                Err(e) => return Score::failed(ScoreKind::ProxyLoss, e.to_string()),
            }
        }
        let n = self.seeds.len();
        let loss = total / n as f64;
        Score::new(
            ScoreKind::ProxyLoss,
            loss,
            cost / n as f64,
            alloc::format!("compute_loss on {}: {loss:.6} over {n} seed(s)", self.data.name),
        )
    }

    fn noise_margin(&self, c: &Config) -> f64 {
        let l = self.losses(c, &self.margin_seeds());
        if l.iter().all(|x| x.is_finite()) {
            math::std_sample(&l)
        } else {
            f64::INFINITY
        }
    }
}

/// Observable objectives a reward is judged against, with weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardBattery {
    pub objectives: Vec<(Signal, f64)>,
}

impl Default for RewardBattery {
    fn default() -> Self {
        Self {
            objectives: alloc::vec![(Signal::SurveyScore, 1.0)],
        }
    }
}

impl RewardBattery {
    /// Signals the reward may not use because they are being predicted.
    pub fn leaks(&self, reward: &RewardSpec) -> Option<Signal> {
        reward
            .terms()
            .iter()
            .find(|t| t.weight != 0.0 && self.objectives.iter().any(|(s, _)| *s == t.signal))
            .map(|t| t.signal)
    }

    /// One query computing every objective correlation plus the pair count
    /// of the first objective.
    pub fn sql(&self, reward: &RewardSpec) -> String {
        let expr = reward_sql(reward);
        let mut items: Vec<String> = self
            .objectives
            .iter()
            .map(|(s, _)| alloc::format!("CORR({expr}, {s})"))
            .collect();
        if let Some((s, _)) = self.objectives.first() {
            items.push(alloc::format!("COUNT({s})"));
        }
        alloc::format!("SELECT {} FROM logs", items.join(", "))
    }
}

/// The reward as an SQL expression over log columns.
pub fn reward_sql(reward: &RewardSpec) -> String {
    let terms: Vec<String> = reward
        .terms()
        .iter()
        .filter(|t| t.weight != 0.0)
        .map(|t| {
            let col = t.signal.as_str();
            let x = match t.transform {
                Transform::Identity => col.to_string(),
                Transform::Log1p => alloc::format!("LOG1P({col})"),
                Transform::Indicator => alloc::format!("IF({col} > 0, 1, 0)"),
            };
            alloc::format!("{:?} * {x}", t.weight)
        })
        .collect();
    if terms.is_empty() {
        "0".into()
    } else {
        terms.join(" + ")
    }
}

/// Correlation battery over the observable log table.
#[derive(Debug, Clone)]
pub struct RewardScorer<'a> {
    pub logs: &'a LogTable,
    pub battery: RewardBattery,
    pub limits: QueryLimits,
}

impl<'a> RewardScorer<'a> {
    pub fn new(logs: &'a LogTable) -> Self {
        Self {
            logs,
            battery: RewardBattery::default(),
            limits: QueryLimits::default(),
        }
    }

    /// `(aggregate, pair count)`, or the failure reason.
    fn evaluate(&self, reward: &RewardSpec) -> Result<(f64, f64, f64), String> {
        if let Some(s) = self.battery.leaks(reward) {
            return Err(alloc::format!("leakage: reward uses objective column {s}"));
        }
        let sql = self.battery.sql(reward);
        let resp = run_sql_query(&sql, self.logs.table(), &self.limits).map_err(|e| e.to_string())?;
        let row = resp.result.rows.first().ok_or("empty result")?;
        let (mut acc, mut wsum) = (0.0, 0.0);
        for (i, (_, w)) in self.battery.objectives.iter().enumerate() {
            let r = row[i].ok_or("correlation undefined")?;
            acc += w * libm::fabs(r);
            wsum += w;
        }
        let n = row[self.battery.objectives.len()].unwrap_or(0.0);
        Ok((acc / wsum, n, resp.cells_scanned as f64))
    }
}

impl Scorer for RewardScorer<'_> {
    fn kind(&self) -> ScoreKind {
        ScoreKind::Correlation
    }

    fn score(&self, c: &Config) -> Score {
        match self.evaluate(&c.reward) {
            Ok((v, _, cells)) => Score::new(ScoreKind::Correlation, v, cells, self.battery.sql(&c.reward)),
            Err(e) => Score::failed(ScoreKind::Correlation, e),
        }
    }

    /// Large-sample standard error of a correlation, `(1 - r^2) / sqrt(n - 1)`.
    fn noise_margin(&self, c: &Config) -> f64 {
        match self.evaluate(&c.reward) {
            Ok((r, n, _)) if n > 1.0 => (1.0 - r * r) / libm::sqrt(n - 1.0),
            _ => f64::INFINITY,
        }
    }
}

/// Correlation with the hidden satisfaction column. Oracle-only: never
/// handed to an agent.
#[derive(Debug, Clone)]
pub struct LatentOracleScorer<'a> {
    pub logs: &'a LogTable,
}

impl Scorer for LatentOracleScorer<'_> {
    fn kind(&self) -> ScoreKind {
        ScoreKind::Correlation
    }

    fn score(&self, c: &Config) -> Score {
        Score::new(
            ScoreKind::Correlation,
            self.logs.oracle_reward_correlation(&c.reward),
            0.0,
            "latent correlation",
        )
    }

    fn noise_margin(&self, _c: &Config) -> f64 {
        0.0
    }
}
