//! Offline candidate scores and their ordering.

use alloc::string::String;
use core::cmp::Ordering;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreKind {
    /// Held-out training loss; lower is better.
    ProxyLoss,
    /// Aggregated log correlation; higher is better.
    Correlation,
}

impl ScoreKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::ProxyLoss => "proxy_loss",
            Self::Correlation => "correlation",
        }
    }

    pub fn lower_is_better(self) -> bool {
        self == Self::ProxyLoss
    }
}

impl fmt::Display for ScoreKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScoreKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "proxy_loss" => Ok(Self::ProxyLoss),
            "correlation" => Ok(Self::Correlation),
            _ => Err(alloc::format!("unknown score kind `{s}`")),
        }
    }
}

/// A scalar produced by a persona's tool. A non-finite value marks a failed
/// evaluation (a diverged run or a tool error) and ranks last.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub kind: ScoreKind,
    #[serde(with = "crate::trainer::finite_or_null")]
    pub value: f64,
    pub cost_units: f64,
    /// Short human-readable tool report.
    pub detail: String,
}

impl Score {
    pub fn new(kind: ScoreKind, value: f64, cost_units: f64, detail: impl Into<String>) -> Self {
        Self {
            kind,
            value,
            cost_units,
            detail: detail.into(),
        }
    }

    pub fn failed(kind: ScoreKind, detail: impl Into<String>) -> Self {
        Self::new(kind, f64::INFINITY, 0.0, detail)
    }

    pub fn is_failed(&self) -> bool {
        !self.value.is_finite()
    }

    /// `Less` means `self` ranks ahead. Scores of different kinds are
    /// incomparable and yield `None`.
    pub fn rank_cmp(&self, other: &Self) -> Option<Ordering> {
        if self.kind != other.kind {
            return None;
        }
        Some(rank_values(self.kind, self.value, other.value))
    }

    /// Signed improvement over `baseline` in the better direction.
    pub fn improvement_over(&self, baseline: f64) -> f64 {
        if self.is_failed() {
            return f64::NEG_INFINITY;
        }
        if self.kind.lower_is_better() {
            baseline - self.value
        } else {
            self.value - baseline
        }
    }
}

/// Orders raw values of one kind, failures last.
pub fn rank_values(kind: ScoreKind, a: f64, b: f64) -> Ordering {
    match (a.is_finite(), b.is_finite()) {
        (true, true) if kind.lower_is_better() => a.total_cmp(&b),
        (true, true) => b.total_cmp(&a),
        (true, false) => Ordering::Less,
        (false, true) => Ordering::Greater,
        (false, false) => Ordering::Equal,
    }
}
