use alloc::borrow::ToOwned;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{leaf, Block, Config, OptField, Signal, Value};

/// Limits a configuration is validated against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Schema {
    /// Feature width assumed when counting parameters.
    pub input_dim: usize,
    pub param_cap: usize,
}

impl Default for Schema {
    fn default() -> Self {
        Self {
            input_dim: 20,
            param_cap: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub path: String,
    pub rule: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, path: &str, rule: impl Into<String>) {
        self.violations.push(Violation {
            path: path.to_owned(),
            rule: rule.into(),
        });
    }
}

pub fn validate_config(c: &Config) -> ValidationReport {
    validate_config_with(c, &Schema::default())
}

pub fn validate_config_with(c: &Config, schema: &Schema) -> ValidationReport {
    let mut r = ValidationReport::default();
    let o = &c.optimizer;
    if !(o.learning_rate.is_finite() && o.learning_rate > 0.0) {
        r.push("optimizer.learning_rate", "learning_rate must be positive");
    }
    for (field, value) in [
        (OptField::Momentum, o.momentum),
        (OptField::Decay, o.decay),
        (OptField::Epsilon, o.epsilon),
    ] {
        let path = match field {
            OptField::Momentum => "optimizer.momentum",
            OptField::Decay => "optimizer.decay",
            OptField::Epsilon => "optimizer.epsilon",
        };
        match (o.kind.uses(field), value) {
            (true, None) => r.push(path, format!("{} is required for {}", leaf(path), o.kind)),
            (false, Some(_)) => r.push(path, format!("{} is not allowed for {}", leaf(path), o.kind)),
            (true, Some(v)) => {
                let ok = match field {
                    OptField::Momentum => (0.0..1.0).contains(&v),
                    OptField::Decay => v > 0.0 && v <= 1.0,
                    OptField::Epsilon => v.is_finite() && v > 0.0,
                };
                if !ok {
                    let rule = match field {
                        OptField::Momentum => "momentum must be in [0, 1)",
                        OptField::Decay => "decay must be in (0, 1]",
                        OptField::Epsilon => "epsilon must be positive",
                    };
                    r.push(path, rule);
                }
            }
            (false, None) => {}
        }
    }

    let arch = &c.architecture;
    if arch.blocks.is_empty() {
        r.push("architecture.blocks", "architecture must not be empty");
    }
    for b in &arch.blocks {
        if let Block::Dense { units: 0, .. } | Block::GluGate { units: 0 } = b {
            r.push("architecture.blocks", "units must be positive");
            break;
        }
    }
    let params = arch.param_count(schema.input_dim);
    if params > schema.param_cap {
        r.push(
            "architecture.blocks",
            format!("parameter budget exceeded: {params} > {}", schema.param_cap),
        );
    }

    let terms = c.reward.terms();
    for t in terms {
        if !t.weight.is_finite() {
            r.push(&format!("reward.{}.weight", t.signal), "weight must be finite");
        }
    }
    if !terms.iter().any(|t| t.weight != 0.0) {
        r.push("reward", "reward needs at least one nonzero weight");
    }

    if c.training.batch_size == 0 {
        r.push("training.batch_size", "batch_size must be a positive integer");
    }
    if c.training.epochs == 0 {
        r.push("training.epochs", "epochs must be a positive integer");
    }
    r
}

/// Storage type of a config path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum PathType {
    Float,
    Int,
    Word(&'static [&'static str]),
    Blocks,
}

impl PathType {
    pub(crate) fn describe(self) -> &'static str {
        match self {
            PathType::Float => "number",
            PathType::Int => "integer",
            PathType::Word(_) => "identifier",
            PathType::Blocks => "block list",
        }
    }
}

const OPTIMIZER_KINDS: &[&str] = &["sgd", "adagrad", "rmsprop", "adam"];
const TRANSFORMS: &[&str] = &["identity", "log1p", "indicator"];

pub(crate) fn path_type(path: &str) -> Option<PathType> {
    Some(match path {
        "optimizer.kind" => PathType::Word(OPTIMIZER_KINDS),
        "optimizer.learning_rate" | "optimizer.momentum" | "optimizer.decay"
        | "optimizer.epsilon" => PathType::Float,
        "architecture.blocks" => PathType::Blocks,
        "training.batch_size" | "training.epochs" | "training.seed" => PathType::Int,
        _ => {
            let rest = path.strip_prefix("reward.")?;
            let (signal, field) = rest.split_once('.')?;
            Signal::from_name(signal)?;
            match field {
                "weight" => PathType::Float,
                "transform" => PathType::Word(TRANSFORMS),
                _ => return None,
            }
        }
    })
}

/// What `remove` resets a path to: `Some(None)` clears it, `Some(Some(v))`
/// restores a default, `None` means the path cannot be removed.
pub(crate) fn removal_default(path: &str) -> Option<Option<Value>> {
    match path {
        "optimizer.momentum" | "optimizer.decay" | "optimizer.epsilon" => Some(None),
        "training.seed" => Some(Some(Value::Int(0))),
        p if p.starts_with("reward.") => Some(None),
        _ => None,
    }
}

/// Well-known misspellings accepted by the linter.
pub(crate) fn path_alias(path: &str) -> Option<&'static str> {
    Some(match path {
        "optimizer.lr" | "optimizer.learning-rate" | "optimizer.learningrate" => {
            "optimizer.learning_rate"
        }
        "optimizer.eps" => "optimizer.epsilon",
        "optimizer.rho" | "optimizer.decay_rate" => "optimizer.decay",
        "optimizer.beta1" => "optimizer.momentum",
        "optimizer.type" | "optimizer.name" => "optimizer.kind",
        "training.batch" | "training.batchsize" => "training.batch_size",
        "training.num_epochs" => "training.epochs",
        "architecture.layers" => "architecture.blocks",
        _ => return None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{presets, ArchSpec, OptimizerKind};
    use alloc::vec;

    #[test]
    fn baseline_passes() {
        assert!(validate_config(&presets::adagrad_linear()).passed());
        assert!(validate_config(&presets::dense_baseline()).passed());
    }

    #[test]
    fn rmsprop_missing_decay_is_one_violation() {
        let mut c = presets::adagrad_linear();
        c.optimizer.kind = OptimizerKind::Rmsprop;
        c.optimizer.momentum = Some(0.0);
        let r = validate_config(&c);
        assert_eq!(r.violations.len(), 1);
        assert_eq!(r.violations[0].path, "optimizer.decay");
    }

    #[test]
    fn parameter_budget() {
        // input 20 -> dense(1000): 21_000; -> dense(1000): 1_001_000; head 1001
        let mut c = presets::adagrad_linear();
        c.architecture = ArchSpec::new(vec![
            Block::Dense { units: 1000, activation: crate::config::Activation::Relu },
            Block::Dense { units: 1000, activation: crate::config::Activation::Relu },
        ]);
        assert_eq!(c.architecture.param_count(20), 21_000 + 1_001_000 + 1_001);
        let r = validate_config(&c);
        assert!(!r.passed());
        assert!(r.violations[0].rule.starts_with("parameter budget"));

        // 20*500+500 + 500*500+500 + 501 = 261_501: fits
        c.architecture = ArchSpec::new(vec![
            Block::Dense { units: 500, activation: crate::config::Activation::Relu },
            Block::Dense { units: 500, activation: crate::config::Activation::Relu },
        ]);
        assert!(validate_config(&c).passed());
    }

    #[test]
    fn irrelevant_fields_rejected() {
        let mut c = presets::adagrad_linear();
        c.optimizer.decay = Some(0.9);
        let r = validate_config(&c);
        assert_eq!(r.violations[0].rule, "decay is not allowed for adagrad");
    }

    #[test]
    fn path_schema() {
        assert_eq!(path_type("reward.click.weight"), Some(PathType::Float));
        assert_eq!(path_type("reward.latent_satisfaction.weight"), None);
        assert_eq!(path_type("optimzer.lr"), None);
        assert!(removal_default("optimizer.kind").is_none());
    }
}
