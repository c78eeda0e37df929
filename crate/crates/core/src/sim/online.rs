//! Delayed, noisy online metrics for a live experiment arm.
//!
//! The metric family is a construct of this simulator:
//!
//! * `metric1` (north star): for reward arms, proportional to the gain in
//!   correlation between the reward and hidden satisfaction over control; for
//!   model arms, proportional to the relative reduction in long-horizon loss.
//! * `metric2` (secondary): click engagement for reward arms, half of
//!   `metric1` for model arms.
//! * `metric3` (guardrail, positive is a regression): rises once a reward puts
//!   more than [`WATCH_SHARE_THRESHOLD`] of its weight on watch time alone, or
//!   as a model grows past the control's parameter count.
//!
//! Each tick adds one independent daily observation per metric with standard
//! deviation `noise_sigma / sqrt(traffic_fraction)`; reports carry the running
//! mean and only appear once `delay_ticks` have elapsed.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::logs::{normal, LogTable, SimSpec};
use crate::config::{RewardSpec, Signal};
use crate::math;

pub const REWARD_METRIC1_SCALE: f64 = 0.05;
pub const REWARD_METRIC2_SCALE: f64 = 0.02;
pub const MODEL_METRIC1_SCALE: f64 = 0.02;
pub const WATCH_SHARE_THRESHOLD: f64 = 0.6;
pub const WATCH_SHARE_SLOPE: f64 = 0.1;
pub const MODEL_SIZE_SLOPE: f64 = 0.0025;
/// Two-sided 95% normal quantile used for confidence halfwidths.
pub const Z95: f64 = 1.959_963_984_540_054;
pub const DEFAULT_DURATION_TICKS: u32 = 14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OnlineMetricsReport {
    pub metric1: f64,
    pub metric2: f64,
    pub metric3: f64,
    pub confidence_halfwidth: f64,
    pub ticks_observed: u32,
}

/// Expected relative deltas of the treatment arm against control.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TrueEffects {
    pub metric1: f64,
    pub metric2: f64,
    pub metric3: f64,
}

/// What a live arm serves.
#[derive(Debug, Clone, PartialEq)]
pub enum Arm {
    Reward(RewardSpec),
    Model { long_horizon_loss: f64, param_count: usize },
}

fn reward_guardrail(r: &RewardSpec) -> f64 {
    WATCH_SHARE_SLOPE * (r.weight_share(Signal::WatchTime) - WATCH_SHARE_THRESHOLD).max(0.0)
}

/// Ground-truth deltas of `arm` against `control`. Reward arms read the hidden
/// satisfaction column through `logs`.
pub fn true_effects(arm: &Arm, control: &Arm, logs: &LogTable) -> TrueEffects {
    match (arm, control) {
        (Arm::Reward(r), Arm::Reward(c)) => TrueEffects {
            metric1: REWARD_METRIC1_SCALE
                * (logs.oracle_reward_correlation(r) - logs.oracle_reward_correlation(c)),
            metric2: REWARD_METRIC2_SCALE
                * (logs.reward_signal_correlation(r, Signal::Click)
                    - logs.reward_signal_correlation(c, Signal::Click)),
            metric3: reward_guardrail(r) - reward_guardrail(c),
        },
        (
            Arm::Model { long_horizon_loss: l, param_count: p },
            Arm::Model { long_horizon_loss: l0, param_count: p0 },
        ) => {
            let m1 = if l.is_finite() && *l0 > 0.0 {
                MODEL_METRIC1_SCALE * (l0 - l) / l0
            } else {
                -MODEL_METRIC1_SCALE
            };
            TrueEffects {
                metric1: m1,
                metric2: 0.5 * m1,
                metric3: MODEL_SIZE_SLOPE * (*p as f64 / (*p0).max(1) as f64 - 1.0).max(0.0),
            }
        }
        _ => TrueEffects::default(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OnlineParams {
    pub delay_ticks: u32,
    pub noise_sigma: f64,
    pub traffic_fraction: f64,
}

impl From<&SimSpec> for OnlineParams {
    fn from(s: &SimSpec) -> Self {
        Self {
            delay_ticks: s.delay_ticks,
            noise_sigma: s.noise_sigma,
            traffic_fraction: s.traffic_fraction,
        }
    }
}

impl Default for OnlineParams {
    fn default() -> Self {
        Self::from(&SimSpec::default())
    }
}

impl OnlineParams {
    pub fn halfwidth(&self, ticks: u32) -> f64 {
        Z95 * self.noise_sigma / libm::sqrt(self.traffic_fraction * ticks.max(1) as f64)
    }
}

/// One experiment's metric stream. State is a pure function of
/// `(truth, params, seed, tick)`, so a restarted orchestrator can rebuild it
/// by replaying ticks.
#[derive(Debug, Clone)]
pub struct OnlineSimulator {
    params: OnlineParams,
    truth: TrueEffects,
    rng: math::Rng,
    tick: u32,
    sums: [f64; 3],
}

impl OnlineSimulator {
    pub fn new(truth: TrueEffects, params: OnlineParams, seed: u64) -> Self {
        Self {
            params,
            truth,
            rng: math::rng(seed, 0x0417),
            tick: 0,
            sums: [0.0; 3],
        }
    }

    pub fn tick(&self) -> u32 {
        self.tick
    }

    pub fn truth(&self) -> TrueEffects {
        self.truth
    }

    /// Advances one tick and returns the report visible afterwards, if any.
    pub fn advance(&mut self) -> Option<OnlineMetricsReport> {
        self.tick += 1;
        let daily_sigma = self.params.noise_sigma / libm::sqrt(self.params.traffic_fraction);
        for s in &mut self.sums {
            *s += daily_sigma * normal(&mut self.rng);
        }
        self.report()
    }

    pub fn report(&self) -> Option<OnlineMetricsReport> {
        if self.tick < self.params.delay_ticks || self.tick == 0 {
            return None;
        }
        let t = self.tick as f64;
        Some(OnlineMetricsReport {
            metric1: self.truth.metric1 + self.sums[0] / t,
            metric2: self.truth.metric2 + self.sums[1] / t,
            metric3: self.truth.metric3 + self.sums[2] / t,
            confidence_halfwidth: self.params.halfwidth(self.tick),
            ticks_observed: self.tick,
        })
    }
}

/// Runs an arm for `ticks` and returns what was visible after each tick.
pub fn simulate_online(
    truth: TrueEffects,
    params: OnlineParams,
    ticks: u32,
    seed: u64,
) -> Vec<Option<OnlineMetricsReport>> {
    let mut sim = OnlineSimulator::new(truth, params, seed);
    (0..ticks).map(|_| sim.advance()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{RewardTerm, Transform};

    #[test]
    fn delay_contract() {
        let p = OnlineParams::default();
        let stream = simulate_online(TrueEffects::default(), p, 14, 1);
        for (i, r) in stream.iter().enumerate() {
            let tick = i as u32 + 1;
            assert_eq!(r.is_some(), tick >= p.delay_ticks, "tick {tick}");
        }
        assert_eq!(stream[6].unwrap().ticks_observed, 7);
    }

    #[test]
    fn halfwidth_scaling() {
        let p = OnlineParams { delay_ticks: 1, noise_sigma: 0.01, traffic_fraction: 0.25 };
        assert!((p.halfwidth(4) - Z95 * 0.01).abs() < 1e-15);
        assert!((p.halfwidth(16) * 2.0 - p.halfwidth(4)).abs() < 1e-15);
    }

    #[test]
    fn guardrail_trap() {
        let watch_only = RewardSpec::new(alloc::vec![RewardTerm {
            signal: Signal::WatchTime,
            weight: 1.0,
            transform: Transform::Identity,
        }]);
        assert!((reward_guardrail(&watch_only) - 0.04).abs() < 1e-12);
        assert_eq!(reward_guardrail(&RewardSpec::single(Signal::Click)), 0.0);
    }

    #[test]
    fn model_effects() {
        let control = Arm::Model { long_horizon_loss: 1.0, param_count: 100 };
        let arm = Arm::Model { long_horizon_loss: 0.5, param_count: 100 };
        let logs = super::super::logs::gen_interaction_logs(&SimSpec { rows: 10, ..SimSpec::default() });
        let t = true_effects(&arm, &control, &logs);
        assert!((t.metric1 - 0.01).abs() < 1e-15);
        assert_eq!(t.metric3, 0.0);
        let t = true_effects(&control, &control, &logs);
        assert_eq!(t, TrueEffects::default());
    }
}
