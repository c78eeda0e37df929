//! Synthetic stand-in for production: supervised benchmarks, interaction logs
//! with a hidden satisfaction variable, and delayed noisy online metrics.

pub mod datasets;
pub mod logs;
pub mod online;

pub use datasets::{gen_supervised_dataset, DatasetName, DatasetRef};
pub use logs::{gen_interaction_logs, LogTable, SimSpec, LATENT_COLUMN, LOG_COLUMNS};
pub use online::{
    simulate_online, true_effects, Arm, OnlineMetricsReport, OnlineParams, OnlineSimulator,
    TrueEffects,
};
