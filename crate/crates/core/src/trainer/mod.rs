//! Lower-level trainer: fits a small feed-forward model under a [`Config`]
//! and reports held-out loss. This is the `compute_loss` tool.

mod model;
mod optim;

pub use model::{activate, build_model, ModelParams, TensorShape};
pub use optim::{OptimizerState, UpdateRule};

use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::config::{validate_config_with, Config, Schema, ValidationReport};
use crate::math::{self, splitmix64};

/// Training loss above this (or non-finite) marks a run as diverged.
pub const DIVERGENCE_THRESHOLD: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrainError {
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("non-finite loss")]
    NonFinite,
    #[error("config failed validation: {}", .0.violations.first().map(|v| v.rule.as_str()).unwrap_or("?"))]
    Invalid(ValidationReport),
    #[error("dataset `{0}` has no training rows")]
    EmptyDataset(String),
}

/// A supervised regression dataset with row-major features.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub input_dim: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl Dataset {
    pub fn rows(&self) -> usize {
        self.y.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.input_dim..(i + 1) * self.input_dim]
    }

    /// Deterministic 80/20 split keyed on a hash of the row index.
    pub fn is_validation(i: usize) -> bool {
        splitmix64(i as u64).is_multiple_of(5)
    }

    pub fn split(&self) -> (Vec<usize>, Vec<usize>) {
        (0..self.rows()).partition(|i| !Self::is_validation(*i))
    }

    /// Gathers rows into contiguous `(x, y)`.
    pub fn gather(&self, idx: &[usize]) -> (Vec<f64>, Vec<f64>) {
        let mut x = Vec::with_capacity(idx.len() * self.input_dim);
        let mut y = Vec::with_capacity(idx.len());
        for &i in idx {
            x.extend_from_slice(self.row(i));
            y.push(self.y[i]);
        }
        (x, y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainStatus {
    Ok,
    Diverged,
}

/// Outcome of one training job.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainResult {
    pub status: TrainStatus,
    /// `+inf` when diverged; serialized as `null`.
    #[serde(with = "finite_or_null")]
    pub final_validation_loss: f64,
    /// `(step, mean train loss over the epoch ending at step)`.
    pub loss_curve: Vec<(u64, f64)>,
    /// Example passes charged: `batch_size * steps`.
    pub cost_units: f64,
    pub wall_steps: u64,
}

impl TrainResult {
    /// Ordering used to rank candidates: lower loss first, diverged last.
    pub fn rank_cmp(&self, other: &Self) -> Ordering {
        rank_losses(self.final_validation_loss, other.final_validation_loss)
    }
}

/// Total order on losses with non-finite values last.
pub fn rank_losses(a: f64, b: f64) -> Ordering {
    match (a.is_finite(), b.is_finite()) {
        (true, true) => a.total_cmp(&b),
        (true, false) => Ordering::Less,
        (false, true) => Ordering::Greater,
        (false, false) => Ordering::Equal,
    }
}

pub(crate) mod finite_or_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

/// Trains per `config` and returns the held-out loss.
pub fn compute_loss(config: &Config, data: &Dataset, seed: u64) -> Result<TrainResult, TrainError> {
    train(config, data, seed).map(|(r, _)| r)
}

/// Example passes a full run is charged, before any divergence cut-off.
pub fn estimated_cost(config: &Config, train_rows: usize) -> f64 {
    let bs = config.training.batch_size.max(1) as usize;
    let steps = config.training.epochs as usize * train_rows.div_ceil(bs);
    (steps * bs) as f64
}

/// Like [`compute_loss`] but also returns the trained weights.
pub fn train(
    config: &Config,
    data: &Dataset,
    seed: u64,
) -> Result<(TrainResult, ModelParams), TrainError> {
    let schema = Schema {
        input_dim: data.input_dim,
        ..Schema::default()
    };
    let report = validate_config_with(config, &schema);
    if !report.passed() {
        return Err(TrainError::Invalid(report));
    }
    let run_seed = splitmix64(seed) ^ (config.training.seed as u64);
    let mut params = build_model(&config.architecture, data.input_dim, run_seed);
    let (mut train_idx, val_idx) = data.split();
    if train_idx.is_empty() {
        return Err(TrainError::EmptyDataset(data.name.clone()));
    }
    let (val_x, val_y) = data.gather(&val_idx);
    let mut opt = OptimizerState::new(UpdateRule::from(&config.optimizer), params.len());
    let mut rng = math::rng(run_seed, SHUFFLE_STREAM);
    let bs = config.training.batch_size as usize;
    let mut ws = model::Workspace::default();
    let mut grad = alloc::vec![0.0; params.len()];
    let mut bx = Vec::with_capacity(bs * data.input_dim);
    let mut by = Vec::with_capacity(bs);
    let mut curve = Vec::with_capacity(config.training.epochs as usize);
    let mut steps = 0u64;
    let mut diverged = false;

    'epochs: for _ in 0..config.training.epochs {
        train_idx.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for chunk in train_idx.chunks(bs) {
            bx.clear();
            by.clear();
            for &i in chunk {
                bx.extend_from_slice(data.row(i));
                by.push(data.y[i]);
            }
            let loss = match params.loss_and_grad(&bx, &by, &mut ws, &mut grad) {
                Ok(l) => l,
                Err(TrainError::NonFinite) => {
                    diverged = true;
                    break 'epochs;
                }
                Err(e) => return Err(e),
            };
            steps += 1;
            if loss > DIVERGENCE_THRESHOLD {
                diverged = true;
                break 'epochs;
            }
            opt.step(params.values_mut(), &grad);
            epoch_loss += loss;
            batches += 1;
        }
        curve.push((steps, epoch_loss / batches.max(1) as f64));
    }

    let final_loss = if diverged || !params.is_finite() {
        diverged = true;
        f64::INFINITY
    } else if val_y.is_empty() {
        curve.last().map_or(f64::INFINITY, |c| c.1)
    } else {
        let l = params.mse(&val_x, &val_y)?;
        if !l.is_finite() || l > DIVERGENCE_THRESHOLD {
            diverged = true;
            f64::INFINITY
        } else {
            l
        }
    };
    let result = TrainResult {
        status: if diverged { TrainStatus::Diverged } else { TrainStatus::Ok },
        final_validation_loss: final_loss,
        loss_curve: curve,
        cost_units: (steps as usize * bs) as f64,
        wall_steps: steps,
    };
    Ok((result, params))
}

const SHUFFLE_STREAM: u64 = 0x5_0f;
