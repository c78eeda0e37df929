//! Compute behind the outer loop: data volumes, cost estimates, drift
//! probes, training and the ground-truth effects a live arm will show.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::config::{presets, Config};
use crate::persona::PersonaKind;
use crate::sim::datasets::{gen_supervised_dataset, DatasetName};
use crate::sim::logs::{gen_interaction_logs, LogTable, SimSpec};
use crate::sim::online::{true_effects, Arm, TrueEffects};
use crate::trainer::{self, Dataset, TrainStatus};

/// Probe rows used by the drift check.
pub const PROBE_ROWS: usize = 256;
/// Seeds whose one-epoch baseline predictions define probe noise.
pub const PROBE_NOISE_SEEDS: [u64; 2] = [1, 2];
pub const DEFAULT_DRIFT_FACTOR: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftCheck {
    /// Mean absolute prediction delta against the baseline on the probe set.
    #[serde(with = "crate::trainer::finite_or_null")]
    pub delta: f64,
    pub bound: f64,
    pub cost_units: f64,
}

impl DriftCheck {
    pub fn passed(&self) -> bool {
        self.delta.is_finite() && self.delta <= self.bound
    }
}

/// Result of the full training launched for a trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingOutcome {
    pub ok: bool,
    #[serde(with = "crate::trainer::finite_or_null")]
    pub loss: f64,
    pub param_count: usize,
    pub cost_units: f64,
    /// Deltas the live experiment will measure noisily.
    pub truth: TrueEffects,
    pub detail: String,
}

/// Everything the orchestrator needs from the outside world.
pub trait TrialEnv: Sync {
    fn baseline(&self, persona: PersonaKind) -> &Config;
    /// Rows available to train the persona's model.
    fn data_rows(&self, persona: PersonaKind) -> usize;
    fn estimated_cost(&self, persona: PersonaKind, c: &Config) -> f64;
    /// `None` when the persona's arms do not change predictions.
    fn drift(&self, persona: PersonaKind, c: &Config) -> Option<DriftCheck>;
    fn train(&self, persona: PersonaKind, c: &Config) -> TrainingOutcome;

    /// Trains a batch; results keep input order.
    fn train_batch(&self, jobs: &[(PersonaKind, Config)]) -> Vec<TrainingOutcome> {
        jobs.iter().map(|(p, c)| self.train(*p, c)).collect()
    }
}

/// A supervised benchmark with its cached control arm and probe noise.
#[derive(Debug, Clone)]
pub struct ModelBench {
    pub data: Dataset,
    pub baseline: Config,
    control_loss: f64,
    control_params: usize,
    probe_x: Vec<f64>,
    probe_base: Vec<f64>,
    probe_noise: f64,
}

fn probe_predictions(c: &Config, data: &Dataset, probe_x: &[f64], seed: u64) -> Result<(Vec<f64>, f64), String> {
    let mut short = c.clone();
    short.training.epochs = 1;
    let (r, params) = trainer::train(&short, data, seed).map_err(|e| e.to_string())?;
    let preds = params.forward(probe_x).map_err(|e| e.to_string())?;
    Ok((preds, r.cost_units))
}

fn mean_abs_delta(a: &[f64], b: &[f64]) -> f64 {
    let s: f64 = a.iter().zip(b).map(|(a, b)| (a - b).abs()).sum();
    let m = s / a.len().max(1) as f64;
    if m.is_finite() {
        m
    } else {
        f64::INFINITY
    }
}

impl ModelBench {
    pub fn new(data: Dataset, baseline: Config) -> Self {
        let (_, val) = data.split();
        let (probe_x, _) = data.gather(&val[..PROBE_ROWS.min(val.len())]);
        let control = trainer::compute_loss(&baseline, &data, 0).expect("baseline trains");
        let (probe_base, _) = probe_predictions(&baseline, &data, &probe_x, 0).expect("baseline trains");
        let noise: f64 = PROBE_NOISE_SEEDS
            .iter()
            .map(|&s| {
                let (p, _) = probe_predictions(&baseline, &data, &probe_x, s).expect("baseline trains");
                mean_abs_delta(&p, &probe_base)
            })
            .sum::<f64>()
            / PROBE_NOISE_SEEDS.len() as f64;
        Self {
            control_params: baseline.architecture.param_count(data.input_dim),
            control_loss: control.final_validation_loss,
            data,
            baseline,
            probe_x,
            probe_base,
            probe_noise: noise,
        }
    }

    pub fn probe_noise(&self) -> f64 {
        self.probe_noise
    }

    pub fn control_loss(&self) -> f64 {
        self.control_loss
    }
}

/// The simulated production environment: one benchmark per model persona
/// plus the interaction logs behind reward arms.
#[derive(Debug, Clone)]
pub struct SimEnv {
    pub optimizer: ModelBench,
    pub architecture: ModelBench,
    pub logs: LogTable,
    pub reward_baseline: Config,
    pub drift_factor: f64,
}

impl SimEnv {
    pub fn new(optimizer: ModelBench, architecture: ModelBench, logs: LogTable, reward_baseline: Config) -> Self {
        Self {
            optimizer,
            architecture,
            logs,
            reward_baseline,
            drift_factor: DEFAULT_DRIFT_FACTOR,
        }
    }

    /// The default benchmarks generated from `seed`.
    pub fn standard(seed: u64, log_rows: usize) -> Self {
        Self::new(
            ModelBench::new(gen_supervised_dataset(DatasetName::Illcond100, seed), presets::adagrad_linear()),
            ModelBench::new(gen_supervised_dataset(DatasetName::GatedNoise, seed), presets::dense_baseline()),
            gen_interaction_logs(&SimSpec {
                rows: log_rows,
                seed,
                ..SimSpec::default()
            }),
            presets::adagrad_linear(),
        )
    }

    fn bench(&self, persona: PersonaKind) -> Option<&ModelBench> {
        match persona {
            PersonaKind::Optimizer => Some(&self.optimizer),
            PersonaKind::Architecture => Some(&self.architecture),
            PersonaKind::Reward => None,
        }
    }
}

impl TrialEnv for SimEnv {
    fn baseline(&self, persona: PersonaKind) -> &Config {
        match self.bench(persona) {
            Some(b) => &b.baseline,
            None => &self.reward_baseline,
        }
    }

    fn data_rows(&self, persona: PersonaKind) -> usize {
        match self.bench(persona) {
            Some(b) => b.data.rows(),
            None => self.logs.rows(),
        }
    }

    fn estimated_cost(&self, persona: PersonaKind, c: &Config) -> f64 {
        match self.bench(persona) {
            Some(b) => trainer::estimated_cost(c, b.data.split().0.len()),
            None => 0.0,
        }
    }

    fn drift(&self, persona: PersonaKind, c: &Config) -> Option<DriftCheck> {
        let b = self.bench(persona)?;
        let bound = self.drift_factor * b.probe_noise;
        Some(match probe_predictions(c, &b.data, &b.probe_x, 0) {
            Ok((p, cost)) => DriftCheck {
                delta: mean_abs_delta(&p, &b.probe_base),
                bound,
                cost_units: cost,
            },
            Err(_) => DriftCheck {
                delta: f64::INFINITY,
                bound,
                cost_units: 0.0,
            },
        })
    }

    fn train(&self, persona: PersonaKind, c: &Config) -> TrainingOutcome {
        let Some(b) = self.bench(persona) else {
            let truth = true_effects(
                &Arm::Reward(c.reward.clone()),
                &Arm::Reward(self.reward_baseline.reward.clone()),
                &self.logs,
            );
            return TrainingOutcome {
                ok: true,
                loss: f64::INFINITY,
                param_count: 0,
                cost_units: 0.0,
                truth,
                detail: "reward arm serves the control model".into(),
            };
        };
        let param_count = c.architecture.param_count(b.data.input_dim);
        match trainer::compute_loss(c, &b.data, 0) {
            Ok(r) if r.status == TrainStatus::Ok => {
                let arm = Arm::Model {
                    long_horizon_loss: r.final_validation_loss,
                    param_count,
                };
                let control = Arm::Model {
                    long_horizon_loss: b.control_loss,
                    param_count: b.control_params,
                };
                TrainingOutcome {
                    ok: true,
                    loss: r.final_validation_loss,
                    param_count,
                    cost_units: r.cost_units,
                    truth: true_effects(&arm, &control, &self.logs),
                    detail: String::new(),
                }
            }
            Ok(r) => TrainingOutcome {
                ok: false,
                loss: f64::INFINITY,
                param_count,
                cost_units: r.cost_units,
                truth: TrueEffects::default(),
                detail: "diverged".into(),
            },
            Err(e) => TrainingOutcome {
                ok: false,
                loss: f64::INFINITY,
                param_count,
                cost_units: 0.0,
                truth: TrueEffects::default(),
                detail: e.to_string(),
            },
        }
    }
}
