//! Finite mutation grids. Each point is a diff against the grid's base so
//! exhaustive oracles and agents speak the same language.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::config::{
    apply_diff, diff_configs, presets, serialize_config, Activation, ArchSpec, Block, Config, Diff,
    OptimizerKind, OptimizerSpec, RewardSpec, RewardTerm, Signal, Transform,
};

pub const LEARNING_RATES: [f64; 7] = [0.001, 0.003, 0.01, 0.03, 0.1, 0.3, 1.0];
pub const MOMENTA: [f64; 3] = [0.0, 0.5, 0.9];
pub const DECAYS: [f64; 2] = [0.9, 0.99];
pub const ADAPTIVE_EPSILON: f64 = 1e-7;
pub const EPOCHS: [u32; 10] = [1, 2, 3, 4, 6, 8, 12, 16, 24, 32];
pub const BATCH_SIZES: [u32; 5] = [16, 32, 64, 128, 256];
pub const REWARD_WEIGHTS: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];
pub const REWARD_STEP: f64 = 0.25;

/// Signals a reward grid may weight, with the transform each one uses.
/// The survey column is the evaluation target and never a reward input.
pub const REWARD_INPUTS: [(Signal, Transform); 5] = [
    (Signal::Click, Transform::Identity),
    (Signal::WatchTime, Transform::Log1p),
    (Signal::DwellTime, Transform::Log1p),
    (Signal::ChannelAffinity, Transform::Identity),
    (Signal::QualityScore, Transform::Identity),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub name: String,
    /// Canonical text of the base configuration.
    pub base: String,
    pub points: Vec<Diff>,
}

impl Grid {
    fn from_configs(name: &str, base: &Config, configs: impl IntoIterator<Item = Config>) -> Self {
        Self {
            name: name.to_string(),
            base: serialize_config(base),
            points: configs.into_iter().map(|c| diff_configs(base, &c)).collect(),
        }
    }

    pub fn single(name: &str, base: &Config, point: Diff) -> Self {
        Self {
            name: name.to_string(),
            base: serialize_config(base),
            points: vec![point],
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn base_config(&self) -> Config {
        crate::config::parse_config(&self.base).expect("grid bases are canonical")
    }

    /// Every point applied to the base, in grid order.
    pub fn configs(&self) -> Vec<Config> {
        let base = self.base_config();
        self.points
            .iter()
            .map(|d| apply_diff(&base, d).expect("grid points are valid by construction"))
            .collect()
    }

    /// Stable text identifying the grid, for cache keys.
    pub fn describe(&self) -> String {
        let mut s = alloc::format!("grid {}\n{}", self.name, self.base);
        for p in &self.points {
            s.push_str(&p.render());
            s.push('\n');
        }
        s
    }
}

fn optimizer(kind: OptimizerKind, lr: f64, momentum: Option<f64>, decay: Option<f64>) -> OptimizerSpec {
    OptimizerSpec {
        kind,
        learning_rate: lr,
        momentum,
        decay,
        epsilon: (kind != OptimizerKind::Sgd).then_some(ADAPTIVE_EPSILON),
    }
}

/// Every optimizer class over the learning-rate ladder with its
/// class-specific knobs; 91 points.
pub fn optimizer_grid(base: &Config) -> Grid {
    let mut specs = Vec::new();
    for lr in LEARNING_RATES {
        for m in MOMENTA {
            specs.push(optimizer(OptimizerKind::Sgd, lr, Some(m), None));
        }
        specs.push(optimizer(OptimizerKind::Adagrad, lr, None, None));
        for m in MOMENTA {
            for d in DECAYS {
                specs.push(optimizer(OptimizerKind::Rmsprop, lr, Some(m), Some(d)));
            }
        }
        for m in MOMENTA {
            specs.push(optimizer(OptimizerKind::Adam, lr, Some(m), None));
        }
    }
    let configs = specs.into_iter().map(|o| Config {
        optimizer: o,
        ..base.clone()
    });
    Grid::from_configs("optimizer", base, configs)
}

/// Epochs by batch size; 50 points.
pub fn efficiency_grid(base: &Config) -> Grid {
    let mut configs = Vec::new();
    for e in EPOCHS {
        for b in BATCH_SIZES {
            let mut c = base.clone();
            c.training.epochs = e;
            c.training.batch_size = b;
            configs.push(c);
        }
    }
    Grid::from_configs("efficiency", base, configs)
}

/// Gated and gate-free block stacks; 41 points including the base stack.
pub fn architecture_grid(base: &Config) -> Grid {
    let mut firsts = Vec::new();
    for units in [16, 32] {
        for act in [Activation::Relu, Activation::Gelu, Activation::Swish, Activation::Tanh] {
            firsts.push(Block::Dense { units, activation: act });
        }
    }
    firsts.push(Block::GluGate { units: 8 });
    firsts.push(Block::GluGate { units: 16 });
    let mut stacks = vec![vec![Block::Dense {
        units: 8,
        activation: Activation::Linear,
    }]];
    for first in firsts {
        let act = match first {
            Block::Dense { activation, .. } => activation,
            _ => Activation::Gelu,
        };
        for second in [
            None,
            Some(Block::Dense { units: 8, activation: act }),
            Some(Block::GluGate { units: 8 }),
            Some(Block::LayerNorm),
        ] {
            stacks.push(core::iter::once(first).chain(second).collect());
        }
    }
    let configs = stacks.into_iter().map(|b| Config {
        architecture: ArchSpec::new(b),
        ..base.clone()
    });
    Grid::from_configs("architecture", base, configs)
}

/// Reward with the given weights over [`REWARD_INPUTS`]; zero weights are
/// left out. `None` when every weight is zero.
pub fn reward_from_weights(weights: &[f64; 5]) -> Option<RewardSpec> {
    let terms: Vec<RewardTerm> = REWARD_INPUTS
        .iter()
        .zip(weights)
        .filter(|(_, w)| **w != 0.0)
        .map(|((signal, transform), w)| RewardTerm {
            signal: *signal,
            weight: *w,
            transform: *transform,
        })
        .collect();
    (!terms.is_empty()).then(|| RewardSpec::new(terms))
}

/// All weight vectors on the 5-level ladder except all-zero; 3124 points.
pub fn reward_grid(base: &Config) -> Grid {
    let levels = REWARD_WEIGHTS.len();
    let total = levels.pow(REWARD_INPUTS.len() as u32);
    let configs = (1..total).filter_map(|mut code| {
        let mut w = [0.0; 5];
        for slot in w.iter_mut() {
            *slot = REWARD_WEIGHTS[code % levels];
            code /= levels;
        }
        reward_from_weights(&w).map(|r| Config {
            reward: r,
            ..base.clone()
        })
    });
    Grid::from_configs("reward", base, configs)
}

/// Named grids and their bases.
pub fn named_grid(name: &str) -> Option<Grid> {
    Some(match name {
        "optimizer" => optimizer_grid(&presets::adagrad_linear()),
        "efficiency" => efficiency_grid(&presets::sgd_long()),
        "architecture" => architecture_grid(&presets::dense_baseline()),
        "reward" => reward_grid(&presets::adagrad_linear()),
        _ => return None,
    })
}

pub const GRID_NAMES: [&str; 4] = ["optimizer", "efficiency", "architecture", "reward"];
