//! Persona definitions: what a proposer specializes in, what it may edit,
//! and how it is judged.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::score::ScoreKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PersonaKind {
    Optimizer,
    Architecture,
    Reward,
}

impl PersonaKind {
    pub const ALL: [PersonaKind; 3] = [Self::Optimizer, Self::Architecture, Self::Reward];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Optimizer => "optimizer",
            Self::Architecture => "architecture",
            Self::Reward => "reward",
        }
    }

    /// Optimizer and architecture share the trainer; reward uses log queries.
    pub fn score_kind(self) -> ScoreKind {
        match self {
            Self::Reward => ScoreKind::Correlation,
            _ => ScoreKind::ProxyLoss,
        }
    }

    /// Config path prefixes this persona may touch.
    pub fn editable_prefixes(self) -> &'static [&'static str] {
        match self {
            Self::Optimizer => &["optimizer.", "training."],
            Self::Architecture => &["architecture."],
            Self::Reward => &["reward."],
        }
    }
}

impl fmt::Display for PersonaKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PersonaKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| alloc::format!("unknown persona `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Explore,
    Exploit,
    Innovate,
}

impl Category {
    pub const ALL: [Category; 3] = [Self::Explore, Self::Exploit, Self::Innovate];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Explore => "explore",
            Self::Exploit => "exploit",
            Self::Innovate => "innovate",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Proposal counts per category in one round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Quota {
    pub explore: u32,
    pub exploit: u32,
    pub innovate: u32,
}

impl Default for Quota {
    fn default() -> Self {
        Self {
            explore: 3,
            exploit: 5,
            innovate: 2,
        }
    }
}

impl Quota {
    pub fn total(&self) -> u32 {
        self.explore + self.exploit + self.innovate
    }

    /// Category of the `i`-th proposal when counts are laid out in order.
    pub fn category_at(&self, i: usize) -> Category {
        let i = i as u32 % self.total().max(1);
        if i < self.explore {
            Category::Explore
        } else if i < self.explore + self.exploit {
            Category::Exploit
        } else {
            Category::Innovate
        }
    }

    /// Splits `n` proposals in the default ratio, largest remainder first.
    pub fn scaled(n: u32) -> Self {
        let base = Self::default();
        let t = base.total();
        let mut q = [base.explore * n / t, base.exploit * n / t, base.innovate * n / t];
        let mut rem: Vec<(u32, usize)> = [base.explore, base.exploit, base.innovate]
            .iter()
            .enumerate()
            .map(|(i, c)| (c * n % t, i))
            .collect();
        rem.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
        let short = n - q.iter().sum::<u32>();
        for (_, i) in rem.into_iter().take(short as usize) {
            q[i] += 1;
        }
        Self {
            explore: q[0],
            exploit: q[1],
            innovate: q[2],
        }
    }
}

/// Upper bound on a guardrail metric's relative delta, in percent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Guardrail {
    pub metric: String,
    pub max_delta_pct: f64,
}

impl Guardrail {
    pub fn metric3() -> Self {
        Self {
            metric: "Metric#3".into(),
            max_delta_pct: 1.0,
        }
    }

    pub fn line(&self) -> String {
        alloc::format!("Keep {} \u{2264} {:+}%", self.metric, self.max_delta_pct)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonaSpec {
    pub kind: PersonaKind,
    pub specialization: String,
    pub task: String,
    /// In order of importance.
    pub objectives: Vec<String>,
    pub quota: Quota,
    pub guardrails: Vec<Guardrail>,
    pub steering: Vec<String>,
    pub schema_name: String,
    pub schema_excerpt: String,
    pub example: String,
    /// When false the prompt omits the expert framing sentence.
    pub framing: bool,
}

/// Leading text of the cost objective; the loss ceiling follows it.
pub const COST_OBJECTIVE_PREFIX: &str = "Lower training cost (cost_units) while keeping proxy_loss at or below ";

impl PersonaSpec {
    pub fn new(kind: PersonaKind) -> Self {
        let (specialization, task, schema_name, schema_excerpt, example) = match kind {
            PersonaKind::Optimizer => (
                "optimization algorithms, learning-rate schedules and training dynamics",
                "the optimizer and training settings (paths optimizer.* and training.*)",
                "optimizer and training fields",
                OPTIMIZER_SCHEMA,
                r#"{"explanation": "[explore] Swap the legacy adaptive method for rmsprop so the step size stops shrinking.", "diff": [{"op": "set", "path": "optimizer.kind", "value": "rmsprop"}, {"op": "set", "path": "optimizer.decay", "value": 0.9}, {"op": "set", "path": "optimizer.momentum", "value": 0.0}]}"#,
            ),
            PersonaKind::Architecture => (
                "neural network topology for ranking models",
                "the network architecture (path architecture.blocks)",
                "architecture blocks",
                ARCHITECTURE_SCHEMA,
                r#"{"explanation": "[innovate] Add a multiplicative gate so noisy context features can be suppressed.", "diff": [{"op": "set", "path": "architecture.blocks", "value": "[glu_gate(8)]"}]}"#,
            ),
            PersonaKind::Reward => (
                "reward design and user-satisfaction signals",
                "the reward definition (paths reward.<signal>.weight and reward.<signal>.transform)",
                "interaction log table `logs`",
                REWARD_SCHEMA,
                r#"{"explanation": "[exploit] Blend long dwell into the click label.", "diff": [{"op": "set", "path": "reward.dwell_time.weight", "value": 0.5}, {"op": "set", "path": "reward.dwell_time.transform", "value": "log1p"}]}"#,
            ),
        };
        Self {
            kind,
            specialization: specialization.to_string(),
            task: task.to_string(),
            objectives: vec!["Metric#1 (north star)".into(), "Metric#2".into()],
            quota: Quota::default(),
            guardrails: vec![Guardrail::metric3()],
            steering: Vec::new(),
            schema_name: schema_name.to_string(),
            schema_excerpt: schema_excerpt.to_string(),
            example: example.to_string(),
            framing: true,
        }
    }

    /// Adds training cost as an objective, bounded by `loss_ceiling`
    /// (typically the baseline loss plus its seed noise).
    pub fn cost_aware(mut self, loss_ceiling: f64) -> Self {
        self.objectives.retain(|o| !o.starts_with(COST_OBJECTIVE_PREFIX));
        self.objectives.push(alloc::format!("{COST_OBJECTIVE_PREFIX}{loss_ceiling:?}"));
        self
    }

    /// Loss ceiling of the cost objective, if present.
    pub fn loss_ceiling(&self) -> Option<f64> {
        self.objectives
            .iter()
            .find_map(|o| o.strip_prefix(COST_OBJECTIVE_PREFIX)?.parse().ok())
    }
}

const OPTIMIZER_SCHEMA: &str = "\
optimizer.kind = sgd | adagrad | rmsprop | adam
optimizer.learning_rate = positive number
optimizer.momentum = number in [0, 1) (sgd, rmsprop, adam; adam uses it as beta1)
optimizer.decay = number in (0, 1] (rmsprop only)
optimizer.epsilon = positive number (adagrad, rmsprop, adam)
training.batch_size = positive integer
training.epochs = positive integer
training.seed = integer";

const ARCHITECTURE_SCHEMA: &str = "\
architecture.blocks = [block, ...] followed by an implicit linear head of width 1
block = dense(units, activation) | glu_gate(units) | layer_norm
activation = linear | relu | sigmoid | tanh | swish | gelu
glu_gate(u) computes value(x) * sigmoid(gate(x)) with two u-wide projections";

const REWARD_SCHEMA: &str = "\
columns: user_id, item_id, click (0/1), watch_time (seconds), dwell_time (seconds),
survey_score (1..5, mostly null), channel_affinity (0..1), quality_score (0..1)
reward.<signal>.weight = number
reward.<signal>.transform = identity | log1p | indicator";
