//! Synthetic interaction logs driven by a hidden per-row satisfaction value.

use alloc::vec::Vec;

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::config::{RewardSpec, Signal};
use crate::math::{self, sigmoid};
use crate::table::{Column, Table};

/// Probability that a row carries a survey response.
pub const SURVEY_RATE: f64 = 0.02;

/// Link coefficients, noise scales and online-metric parameters of the
/// simulated environment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimSpec {
    pub a_click: f64,
    pub a_watch: f64,
    pub a_dwell: f64,
    pub a_survey: f64,
    pub a_affinity: f64,
    pub a_quality: f64,
    pub watch_noise: f64,
    pub dwell_noise: f64,
    pub survey_noise: f64,
    pub affinity_noise: f64,
    pub quality_noise: f64,
    pub rows: usize,
    pub seed: u64,
    pub users: u32,
    pub items: u32,
    pub delay_ticks: u32,
    pub noise_sigma: f64,
    pub traffic_fraction: f64,
}

impl Default for SimSpec {
    fn default() -> Self {
        Self {
            a_click: 1.0,
            a_watch: 0.5,
            a_dwell: 0.8,
            a_survey: 1.0,
            a_affinity: 0.6,
            a_quality: 0.5,
            watch_noise: 1.0,
            dwell_noise: 1.0,
            survey_noise: 0.5,
            affinity_noise: 1.0,
            quality_noise: 1.0,
            rows: 100_000,
            seed: 0,
            users: 5_000,
            items: 2_000,
            delay_ticks: 7,
            noise_sigma: 0.002,
            traffic_fraction: 0.1,
        }
    }
}

impl SimSpec {
    pub fn link(&self, s: Signal) -> f64 {
        match s {
            Signal::Click => self.a_click,
            Signal::WatchTime => self.a_watch,
            Signal::DwellTime => self.a_dwell,
            Signal::SurveyScore => self.a_survey,
            Signal::ChannelAffinity => self.a_affinity,
            Signal::QualityScore => self.a_quality,
        }
    }
}

/// Name of the hidden column. Only simulator and oracle code reads it.
pub const LATENT_COLUMN: &str = "latent_satisfaction";

/// Observable log columns plus the hidden satisfaction vector, kept apart so
/// the query engine can only ever see [`LogTable::table`].
#[derive(Debug, Clone, PartialEq)]
pub struct LogTable {
    table: Table,
    latent: Vec<f64>,
}

impl LogTable {
    /// Observable columns.
    pub fn table(&self) -> &Table {
        &self.table
    }

    /// Hidden satisfaction values. Oracle-only.
    pub fn oracle_latent(&self) -> &[f64] {
        &self.latent
    }

    pub fn rows(&self) -> usize {
        self.latent.len()
    }

    pub fn from_parts(table: Table, latent: Vec<f64>) -> Self {
        debug_assert_eq!(table.rows(), latent.len());
        Self { table, latent }
    }

    pub fn signal(&self, s: Signal) -> &Column {
        self.table
            .column(s.as_str())
            .expect("log tables always carry every signal column")
    }

    /// Reward values per row; `None` where a referenced signal is null.
    pub fn reward_values(&self, reward: &RewardSpec) -> Vec<Option<f64>> {
        let cols: Vec<(Signal, &Column)> = Signal::ALL.iter().map(|s| (*s, self.signal(*s))).collect();
        (0..self.rows())
            .map(|r| {
                reward.evaluate(|s| cols.iter().find(|(x, _)| *x == s).and_then(|(_, c)| c.values[r]))
            })
            .collect()
    }

    /// Pearson correlation between a reward and the hidden satisfaction. Oracle-only.
    pub fn oracle_reward_correlation(&self, reward: &RewardSpec) -> f64 {
        self.correlation_with(reward, |r| Some(self.latent[r]))
    }

    /// Pearson correlation between a reward and an observable signal over rows where both exist.
    pub fn reward_signal_correlation(&self, reward: &RewardSpec, signal: Signal) -> f64 {
        let col = self.signal(signal);
        self.correlation_with(reward, |r| col.values[r])
    }

    fn correlation_with(&self, reward: &RewardSpec, other: impl Fn(usize) -> Option<f64>) -> f64 {
        let values = self.reward_values(reward);
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for (r, v) in values.into_iter().enumerate() {
            if let (Some(a), Some(b)) = (v, other(r)) {
                xs.push(a);
                ys.push(b);
            }
        }
        math::pearson(&xs, &ys).unwrap_or(0.0)
    }
}

pub const LOG_COLUMNS: [&str; 8] = [
    "user_id",
    "item_id",
    "click",
    "watch_time",
    "dwell_time",
    "survey_score",
    "channel_affinity",
    "quality_score",
];

pub fn normal(rng: &mut math::Rng) -> f64 {
    StandardNormal.sample(rng)
}

pub fn gen_interaction_logs(spec: &SimSpec) -> LogTable {
    let mut rng = math::rng(spec.seed, 0x106);
    let n = spec.rows;
    let mut cols: Vec<Vec<Option<f64>>> = (0..LOG_COLUMNS.len()).map(|_| Vec::with_capacity(n)).collect();
    let mut latent = Vec::with_capacity(n);
    for _ in 0..n {
        let s = normal(&mut rng);
        latent.push(s);
        cols[0].push(Some(rng.random_range(0..spec.users.max(1)) as f64));
        cols[1].push(Some(rng.random_range(0..spec.items.max(1)) as f64));
        let click = rng.random_bool(sigmoid(spec.a_click * s));
        let watch = spec.a_watch * s + spec.watch_noise * normal(&mut rng);
        let dwell = spec.a_dwell * s + spec.dwell_noise * normal(&mut rng);
        let survey = 3.0 + spec.a_survey * s + spec.survey_noise * normal(&mut rng);
        let survey_observed = rng.random_bool(SURVEY_RATE);
        let affinity = spec.a_affinity * s + spec.affinity_noise * normal(&mut rng);
        let quality = spec.a_quality * s + spec.quality_noise * normal(&mut rng);
        cols[2].push(Some(if click { 1.0 } else { 0.0 }));
        cols[3].push(Some(libm::exp(watch)));
        cols[4].push(Some(libm::exp(dwell)));
        cols[5].push(survey_observed.then(|| survey.clamp(1.0, 5.0)));
        cols[6].push(Some(sigmoid(affinity)));
        cols[7].push(Some(sigmoid(quality)));
    }
    let columns = LOG_COLUMNS
        .iter()
        .zip(cols)
        .map(|(name, values)| Column::new(*name, values))
        .collect();
    LogTable {
        table: Table::new("logs", columns),
        latent,
    }
}
