//! The configuration space: optimizer, architecture, reward and training
//! settings, a canonical `path = value` text form, and the structured diff
//! algebra every proposal is expressed in.
//!
//! A [`Config`] flattens into an ordered map of dot-paths to typed values.
//! Parsing, serialization, diffing and patching all go through that map, so
//! the four operations agree on one schema.

mod diff;
mod schema;
mod text;

pub use diff::{apply_diff, diff_configs, Diff, DiffOp, Literal, OpKind};
pub use schema::{validate_config, validate_config_with, Schema, ValidationReport, Violation};
pub(crate) use schema::{path_alias, path_type, PathType};
pub use text::{parse_blocks, parse_config, render_blocks, serialize_config};

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

/// Errors produced while building, parsing or patching a configuration.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}: syntax error: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: unknown path `{path}`")]
    UnknownPathAt { line: usize, path: String },
    #[error("unknown path `{0}`")]
    UnknownPath(String),
    #[error("type mismatch at `{path}`: expected {expected}, got `{got}`")]
    TypeMismatch {
        path: String,
        expected: &'static str,
        got: String,
    },
    #[error("line {line}: duplicate path `{path}`")]
    Duplicate { line: usize, path: String },
    #[error("missing required section: {0}")]
    MissingSection(&'static str),
    #[error("missing required field: {0}")]
    MissingField(String),
    #[error("`{0}` has no default and cannot be removed")]
    NotRemovable(String),
    #[error("malformed diff op at `{path}`: {message}")]
    MalformedOp { path: String, message: &'static str },
    #[error("{path}: {rule}")]
    Invalid { path: String, rule: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    Adagrad,
    Rmsprop,
    Adam,
}

impl OptimizerKind {
    pub const ALL: [OptimizerKind; 4] = [Self::Sgd, Self::Adagrad, Self::Rmsprop, Self::Adam];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Sgd => "sgd",
            Self::Adagrad => "adagrad",
            Self::Rmsprop => "rmsprop",
            Self::Adam => "adam",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }

    /// Which optional fields this kind requires. Everything not listed must be absent.
    pub(crate) fn uses(self, field: OptField) -> bool {
        use OptField::*;
        matches!(
            (self, field),
            (Self::Sgd, Momentum)
                | (Self::Adagrad, Epsilon)
                | (Self::Rmsprop, Momentum | Decay | Epsilon)
                | (Self::Adam, Momentum | Epsilon)
        )
    }
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum OptField {
    Momentum,
    Decay,
    Epsilon,
}

/// Optimizer class and its hyperparameters.
///
/// `momentum` doubles as the first-moment coefficient for adam; the second
/// moment uses a fixed 0.999.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerSpec {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    pub momentum: Option<f64>,
    pub decay: Option<f64>,
    pub epsilon: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Linear,
    Relu,
    Sigmoid,
    Tanh,
    Swish,
    Gelu,
}

impl Activation {
    pub const ALL: [Activation; 6] = [
        Self::Linear,
        Self::Relu,
        Self::Sigmoid,
        Self::Tanh,
        Self::Swish,
        Self::Gelu,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Linear => "linear",
            Self::Relu => "relu",
            Self::Sigmoid => "sigmoid",
            Self::Tanh => "tanh",
            Self::Swish => "swish",
            Self::Gelu => "gelu",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.as_str() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Block {
    Dense { units: u32, activation: Activation },
    /// `value(x) * sigmoid(gate(x))`
    GluGate { units: u32 },
    LayerNorm,
}

impl Block {
    /// Output width given the input width.
    pub fn output_dim(&self, input_dim: usize) -> usize {
        match *self {
            Block::Dense { units, .. } | Block::GluGate { units } => units as usize,
            Block::LayerNorm => input_dim,
        }
    }

    pub fn param_count(&self, input_dim: usize) -> usize {
        match *self {
            Block::Dense { units, .. } => input_dim * units as usize + units as usize,
            Block::GluGate { units } => 2 * (input_dim * units as usize + units as usize),
            Block::LayerNorm => 2 * input_dim,
        }
    }

    pub fn is_gated(&self) -> bool {
        matches!(self, Block::GluGate { .. })
    }
}

/// Ordered block list followed by an implicit linear head of width 1.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ArchSpec {
    pub blocks: Vec<Block>,
}

impl ArchSpec {
    pub fn new(blocks: Vec<Block>) -> Self {
        Self { blocks }
    }

    /// Parameters including the head.
    pub fn param_count(&self, input_dim: usize) -> usize {
        let mut width = input_dim;
        let mut total = 0;
        for b in &self.blocks {
            total += b.param_count(width);
            width = b.output_dim(width);
        }
        total + width + 1
    }

    pub fn has_gate(&self) -> bool {
        self.blocks.iter().any(Block::is_gated)
    }
}

/// Observable columns of the interaction log that a reward may combine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Signal {
    Click,
    WatchTime,
    DwellTime,
    SurveyScore,
    ChannelAffinity,
    QualityScore,
}

impl Signal {
    pub const ALL: [Signal; 6] = [
        Self::Click,
        Self::WatchTime,
        Self::DwellTime,
        Self::SurveyScore,
        Self::ChannelAffinity,
        Self::QualityScore,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Click => "click",
            Self::WatchTime => "watch_time",
            Self::DwellTime => "dwell_time",
            Self::SurveyScore => "survey_score",
            Self::ChannelAffinity => "channel_affinity",
            Self::QualityScore => "quality_score",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|x| x.as_str() == s)
    }
}

impl fmt::Display for Signal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    Identity,
    Log1p,
    Indicator,
}

impl Transform {
    pub const ALL: [Transform; 3] = [Self::Identity, Self::Log1p, Self::Indicator];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Identity => "identity",
            Self::Log1p => "log1p",
            Self::Indicator => "indicator",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|x| x.as_str() == s)
    }

    pub fn apply(self, v: f64) -> f64 {
        match self {
            Transform::Identity => v,
            Transform::Log1p => libm::log1p(v),
            Transform::Indicator => {
                if v > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardTerm {
    pub signal: Signal,
    pub weight: f64,
    pub transform: Transform,
}

/// Weighted linear combination of (optionally transformed) log signals.
/// Terms are kept sorted by signal with at most one term per signal.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RewardSpec {
    terms: Vec<RewardTerm>,
}

impl RewardSpec {
    pub fn new(mut terms: Vec<RewardTerm>) -> Self {
        terms.sort_by_key(|t| t.signal);
        terms.dedup_by_key(|t| t.signal);
        Self { terms }
    }

    pub fn single(signal: Signal) -> Self {
        Self::new(alloc::vec![RewardTerm {
            signal,
            weight: 1.0,
            transform: Transform::Identity,
        }])
    }

    pub fn terms(&self) -> &[RewardTerm] {
        &self.terms
    }

    pub fn weight(&self, signal: Signal) -> f64 {
        self.term(signal).map_or(0.0, |t| t.weight)
    }

    pub fn term(&self, signal: Signal) -> Option<&RewardTerm> {
        self.terms.iter().find(|t| t.signal == signal)
    }

    /// Share of absolute weight placed on `signal`.
    pub fn weight_share(&self, signal: Signal) -> f64 {
        let total: f64 = self.terms.iter().map(|t| t.weight.abs()).sum();
        if total == 0.0 {
            0.0
        } else {
            self.weight(signal).abs() / total
        }
    }

    /// Evaluates the reward on one row of signal values. `None` when a
    /// referenced signal is missing for this row.
    pub fn evaluate(&self, value_of: impl Fn(Signal) -> Option<f64>) -> Option<f64> {
        let mut acc = 0.0;
        for t in &self.terms {
            acc += t.weight * t.transform.apply(value_of(t.signal)?);
        }
        Some(acc)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TrainingSpec {
    pub batch_size: u32,
    pub epochs: u32,
    pub seed: i64,
}

/// The full meta-configuration under search.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub optimizer: OptimizerSpec,
    pub architecture: ArchSpec,
    pub reward: RewardSpec,
    pub training: TrainingSpec,
}

/// Typed value stored at a config path.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Int(i64),
    Float(f64),
    Word(String),
    Blocks(Vec<Block>),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(i) => write!(f, "{i}"),
            Value::Float(x) => write!(f, "{x:?}"),
            Value::Word(w) => f.write_str(w),
            Value::Blocks(b) => f.write_str(&render_blocks(b)),
        }
    }
}

pub(crate) type Entries = BTreeMap<String, Value>;

impl Config {
    /// Flattens into path → value pairs. Sorted by path.
    pub fn entries(&self) -> BTreeMap<String, Value> {
        use alloc::borrow::ToOwned;
        use alloc::format;
        let mut m = Entries::new();
        let o = &self.optimizer;
        m.insert("optimizer.kind".to_owned(), Value::Word(o.kind.as_str().to_owned()));
        m.insert("optimizer.learning_rate".to_owned(), Value::Float(o.learning_rate));
        if let Some(v) = o.momentum {
            m.insert("optimizer.momentum".to_owned(), Value::Float(v));
        }
        if let Some(v) = o.decay {
            m.insert("optimizer.decay".to_owned(), Value::Float(v));
        }
        if let Some(v) = o.epsilon {
            m.insert("optimizer.epsilon".to_owned(), Value::Float(v));
        }
        m.insert(
            "architecture.blocks".to_owned(),
            Value::Blocks(self.architecture.blocks.clone()),
        );
        for t in self.reward.terms() {
            m.insert(format!("reward.{}.weight", t.signal), Value::Float(t.weight));
            m.insert(
                format!("reward.{}.transform", t.signal),
                Value::Word(t.transform.as_str().to_owned()),
            );
        }
        m.insert(
            "training.batch_size".to_owned(),
            Value::Int(self.training.batch_size as i64),
        );
        m.insert("training.epochs".to_owned(), Value::Int(self.training.epochs as i64));
        m.insert("training.seed".to_owned(), Value::Int(self.training.seed));
        m
    }

    /// Rebuilds a config from flattened entries. Checks presence and types
    /// only; semantic rules live in [`validate_config`].
    pub fn from_entries(entries: &BTreeMap<String, Value>) -> Result<Self, ConfigError> {
        for section in ["optimizer", "architecture", "reward", "training"] {
            let prefix_len = section.len();
            let present = entries.keys().any(|k| {
                k.starts_with(section) && k.as_bytes().get(prefix_len) == Some(&b'.')
            });
            if !present {
                return Err(ConfigError::MissingSection(section));
            }
        }
        let kind_word = word(entries, "optimizer.kind")?;
        let kind = OptimizerKind::from_name(kind_word).ok_or_else(|| mismatch(
            "optimizer.kind",
            "one of sgd|adagrad|rmsprop|adam",
            kind_word,
        ))?;
        let optimizer = OptimizerSpec {
            kind,
            learning_rate: float(entries, "optimizer.learning_rate")?,
            momentum: opt_float(entries, "optimizer.momentum")?,
            decay: opt_float(entries, "optimizer.decay")?,
            epsilon: opt_float(entries, "optimizer.epsilon")?,
        };
        let blocks = match entries.get("architecture.blocks") {
            Some(Value::Blocks(b)) => b.clone(),
            Some(other) => return Err(mismatch("architecture.blocks", "block list", other)),
            None => return Err(ConfigError::MissingField("architecture.blocks".into())),
        };
        let mut terms = Vec::new();
        for signal in Signal::ALL {
            let wpath = alloc::format!("reward.{signal}.weight");
            let tpath = alloc::format!("reward.{signal}.transform");
            let weight = opt_float(entries, &wpath)?;
            let transform = match entries.get(&tpath) {
                None => None,
                Some(Value::Word(w)) => Some(
                    Transform::from_name(w)
                        .ok_or_else(|| mismatch(&tpath, "identity|log1p|indicator", w))?,
                ),
                Some(other) => return Err(mismatch(&tpath, "transform name", other)),
            };
            match (weight, transform) {
                (Some(weight), t) => terms.push(RewardTerm {
                    signal,
                    weight,
                    transform: t.unwrap_or(Transform::Identity),
                }),
                (None, Some(_)) => return Err(ConfigError::MissingField(wpath)),
                (None, None) => {}
            }
        }
        let training = TrainingSpec {
            batch_size: positive_int(entries, "training.batch_size")?,
            epochs: positive_int(entries, "training.epochs")?,
            seed: match entries.get("training.seed") {
                None => 0,
                Some(Value::Int(i)) => *i,
                Some(other) => return Err(mismatch("training.seed", "integer", other)),
            },
        };
        Ok(Config {
            optimizer,
            architecture: ArchSpec { blocks },
            reward: RewardSpec::new(terms),
            training,
        })
    }
}

fn mismatch(path: &str, expected: &'static str, got: impl fmt::Display) -> ConfigError {
    ConfigError::TypeMismatch {
        path: path.into(),
        expected,
        got: alloc::format!("{got}"),
    }
}

fn word<'a>(e: &'a Entries, path: &str) -> Result<&'a str, ConfigError> {
    match e.get(path) {
        Some(Value::Word(w)) => Ok(w),
        Some(other) => Err(mismatch(path, "identifier", other)),
        None => Err(ConfigError::MissingField(path.into())),
    }
}

fn float(e: &Entries, path: &str) -> Result<f64, ConfigError> {
    opt_float(e, path)?.ok_or_else(|| ConfigError::MissingField(path.into()))
}

fn opt_float(e: &Entries, path: &str) -> Result<Option<f64>, ConfigError> {
    match e.get(path) {
        None => Ok(None),
        Some(Value::Float(x)) => Ok(Some(*x)),
        Some(Value::Int(i)) => Ok(Some(*i as f64)),
        Some(other) => Err(mismatch(path, "number", other)),
    }
}

fn positive_int(e: &Entries, path: &str) -> Result<u32, ConfigError> {
    match e.get(path) {
        Some(Value::Int(i)) if *i >= 1 && *i <= u32::MAX as i64 => Ok(*i as u32),
        Some(Value::Int(_)) => Err(ConfigError::Invalid {
            path: path.into(),
            rule: alloc::format!("{} must be a positive integer", leaf(path)),
        }),
        Some(other) => Err(mismatch(path, "integer", other)),
        None => Err(ConfigError::MissingField(path.into())),
    }
}

pub(crate) fn leaf(path: &str) -> &str {
    path.rsplit('.').next().unwrap_or(path)
}

/// Serde adapter carrying a [`Config`] as its canonical text.
pub mod as_text {
    use super::{parse_config, serialize_config, Config};
    use alloc::string::String;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(c: &Config, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&serialize_config(c))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Config, D::Error> {
        let text = String::deserialize(d)?;
        parse_config(&text).map_err(serde::de::Error::custom)
    }
}

/// Reference configurations used by the benchmarks and tests.
pub mod presets {
    use super::*;
    use alloc::vec;

    /// Legacy Adagrad optimizer on a single linear block.
    pub fn adagrad_linear() -> Config {
        Config {
            optimizer: OptimizerSpec {
                kind: OptimizerKind::Adagrad,
                learning_rate: 0.1,
                momentum: None,
                decay: None,
                epsilon: Some(1e-7),
            },
            architecture: ArchSpec::new(vec![Block::Dense {
                units: 1,
                activation: Activation::Linear,
            }]),
            reward: RewardSpec::single(Signal::Click),
            training: TrainingSpec {
                batch_size: 64,
                epochs: 2,
                seed: 0,
            },
        }
    }

    /// Plain momentum SGD trained far past convergence; the cost-reduction
    /// starting point.
    pub fn sgd_long() -> Config {
        Config {
            optimizer: OptimizerSpec {
                kind: OptimizerKind::Sgd,
                learning_rate: 0.001,
                momentum: Some(0.9),
                decay: None,
                epsilon: None,
            },
            architecture: ArchSpec::new(vec![Block::Dense {
                units: 1,
                activation: Activation::Linear,
            }]),
            reward: RewardSpec::single(Signal::Click),
            training: TrainingSpec {
                batch_size: 64,
                epochs: 32,
                seed: 0,
            },
        }
    }

    /// Gate-free baseline for the architecture persona.
    pub fn dense_baseline() -> Config {
        Config {
            optimizer: OptimizerSpec {
                kind: OptimizerKind::Adam,
                learning_rate: 0.01,
                momentum: Some(0.9),
                decay: None,
                epsilon: Some(1e-8),
            },
            architecture: ArchSpec::new(vec![Block::Dense {
                units: 8,
                activation: Activation::Linear,
            }]),
            reward: RewardSpec::single(Signal::Click),
            training: TrainingSpec {
                batch_size: 64,
                epochs: 12,
                seed: 0,
            },
        }
    }
}
