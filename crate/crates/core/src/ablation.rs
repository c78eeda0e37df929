//! Search-variant comparison and the exhaustive grid oracle.
//!
//! Variants share run seeds, so run `r` of every variant starts from the
//! same random stream and differs only in what the prompt shows. Within run
//! index `r`, every finite loss explored by any variant forms one pool; a
//! variant's cell is the z-score of its best loss against that pool.

use alloc::boxed::Box;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{parse_config, serialize_config, Config};
use crate::journal::ContextStrategy;
use crate::math::{mean, splitmix64, std_pop};
use crate::offline::{run_inner_loop, Disposition, Executor, InnerLoopRun};
use crate::persona::PersonaSpec;
use crate::proposer::{HeuristicProvider, Provider, ProviderConfig, ProviderError, ProviderKind};
use crate::score::{rank_values, Score, ScoreKind};
use crate::space::Grid;
use crate::tools::Scorer;

pub const DEFAULT_RUNS: u32 = 6;
pub const DEFAULT_IDEAS_PER_RUN: u32 = 70;
pub const DEFAULT_PER_ROUND: u32 = 10;
pub const POOLING_NOTE: &str =
    "z-scores pool every finite explored loss of a run index across all variants; each cell is the z of that variant's best loss";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZScores {
    pub values: Vec<f64>,
    pub warning: Option<String>,
}

/// `(x - mean) / std` with the population std. Fewer than two distinct
/// values yields zeros and a warning.
pub fn zscore_normalize(xs: &[f64]) -> ZScores {
    let m = mean(xs);
    let s = std_pop(xs);
    if xs.len() < 2 || s.is_nan() || s <= 0.0 || !s.is_finite() {
        return ZScores {
            values: alloc::vec![0.0; xs.len()],
            warning: Some(alloc::format!("zero variance over {} value(s); z-scores set to 0", xs.len())),
        };
    }
    ZScores {
        values: xs.iter().map(|x| (x - m) / s).collect(),
        warning: None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationVariant {
    pub name: String,
    pub provider: ProviderConfig,
    pub context: ContextStrategy,
    pub framing: bool,
    pub runs: u32,
    pub ideas_per_run: u32,
}

impl AblationVariant {
    pub fn new(name: &str, context: ContextStrategy) -> Self {
        Self {
            name: name.into(),
            provider: ProviderConfig::heuristic(),
            context,
            framing: true,
            runs: DEFAULT_RUNS,
            ideas_per_run: DEFAULT_IDEAS_PER_RUN,
        }
    }
}

/// Full context, no expert framing, timestamp order, top 1, top 5, no context.
pub fn standard_variants() -> Vec<AblationVariant> {
    let mut no_role = AblationVariant::new("opt_no_role", ContextStrategy::FullSortedByScore);
    no_role.framing = false;
    alloc::vec![
        AblationVariant::new("opt_full_sorted", ContextStrategy::FullSortedByScore),
        no_role,
        AblationVariant::new("opt_no_sort", ContextStrategy::FullByTimestamp),
        AblationVariant::new("opt_top_1", ContextStrategy::TopK(1)),
        AblationVariant::new("opt_top_5", ContextStrategy::TopK(5)),
        AblationVariant::new("opt_no_context", ContextStrategy::None),
    ]
}

/// Providers that need no I/O. Other kinds come from the caller's factory.
pub fn builtin_provider(cfg: &ProviderConfig) -> Option<Box<dyn Provider>> {
    match &cfg.kind {
        ProviderKind::Heuristic { policy } => Some(Box::new(HeuristicProvider::new(policy.clone()))),
        _ => None,
    }
}

pub type ProviderFactory<'a> = &'a (dyn Fn(&AblationVariant, u32) -> Result<Box<dyn Provider>, ProviderError> + Sync);

pub struct AblationBenchmark<'a> {
    /// Identifies data, tool and baseline in reports and cache keys.
    pub id: String,
    pub persona: PersonaSpec,
    pub baseline: Config,
    pub scorer: &'a dyn Scorer,
}

/// Scored losses of one run, in exploration order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub run: u32,
    pub explored: Vec<f64>,
    pub error: Option<String>,
}

impl RunOutcome {
    pub fn best(&self) -> Option<f64> {
        self.explored.iter().copied().filter(|v| v.is_finite()).reduce(f64::min)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantRuns {
    pub variant: String,
    pub runs: Vec<RunOutcome>,
}

pub fn run_seed(seed: u64, run: u32) -> u64 {
    splitmix64(seed ^ splitmix64(0xAB1A + run as u64))
}

/// Runs every run of one variant. Ideas count only proposals that reached
/// the tool, truncated to `ideas_per_run`.
pub fn run_variant(
    v: &AblationVariant,
    bench: &AblationBenchmark<'_>,
    seed: u64,
    factory: ProviderFactory<'_>,
    exec: &dyn Executor,
) -> VariantRuns {
    let mut out = VariantRuns {
        variant: v.name.clone(),
        runs: Vec::new(),
    };
    for run in 0..v.runs {
        let mut persona = bench.persona.clone();
        persona.framing = v.framing;
        let mut spec = InnerLoopRun::new(persona, bench.baseline.clone(), run_seed(seed, run));
        spec.proposals_per_round = DEFAULT_PER_ROUND;
        spec.rounds = v.ideas_per_run.div_ceil(DEFAULT_PER_ROUND);
        spec.context_strategy = v.context;
        let outcome = factory(v, run)
            .map_err(|e| e.to_string())
            .and_then(|mut p| run_inner_loop(&spec, p.as_mut(), bench.scorer, exec).map_err(|e| e.to_string()));
        out.runs.push(match outcome {
            Ok(art) => {
                let round_errors: Vec<String> = art.rounds.iter().filter_map(|r| r.error.clone()).collect();
                RunOutcome {
                    run,
                    explored: art
                        .audit
                        .iter()
                        .filter(|a| matches!(a.disposition, Disposition::Scored | Disposition::ToolFailed(_)))
                        .filter_map(|a| a.score.as_ref().map(|s| s.value))
                        .take(v.ideas_per_run as usize)
                        .collect(),
                    error: if round_errors.len() == art.rounds.len() && !round_errors.is_empty() {
                        Some(round_errors.join("; "))
                    } else {
                        None
                    },
                }
            }
            Err(e) => RunOutcome {
                run,
                explored: Vec::new(),
                error: Some(e),
            },
        });
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationCell {
    pub variant: String,
    pub run: u32,
    #[serde(with = "crate::trainer::finite_or_null")]
    pub best_loss: f64,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantSummary {
    pub variant: String,
    pub mean_z: f64,
    pub std_z: f64,
    pub best_losses: Vec<f64>,
    pub ideas: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub benchmark: String,
    pub seed: u64,
    pub pooling: String,
    pub rows: Vec<VariantSummary>,
    pub cells: Vec<AblationCell>,
    pub notices: Vec<String>,
}

/// Pools per run index and computes every cell's z-score. Runs that failed
/// are excluded with a notice.
pub fn assemble_report(benchmark: &str, seed: u64, all: &[VariantRuns]) -> AblationReport {
    let mut notices = Vec::new();
    let mut cells = Vec::new();
    let max_runs = all.iter().map(|v| v.runs.len()).max().unwrap_or(0);
    for v in all {
        for r in &v.runs {
            if let Some(e) = &r.error {
                notices.push(alloc::format!("{} run {} excluded: {e}", v.variant, r.run));
            }
        }
    }
    for run in 0..max_runs as u32 {
        let ok = |r: &&RunOutcome| r.run == run && r.error.is_none() && r.best().is_some();
        let pool: Vec<f64> = all
            .iter()
            .flat_map(|v| v.runs.iter().filter(ok))
            .flat_map(|r| r.explored.iter().copied().filter(|x| x.is_finite()))
            .collect();
        let m = mean(&pool);
        let s = std_pop(&pool);
        if !pool.is_empty() && (s.is_nan() || s <= 0.0) {
            notices.push(alloc::format!("run {run}: zero variance in pooled losses; z set to 0"));
        }
        for v in all {
            if let Some(r) = v.runs.iter().find(ok) {
                let best = r.best().expect("filtered");
                cells.push(AblationCell {
                    variant: v.variant.clone(),
                    run,
                    best_loss: best,
                    z: if s > 0.0 { (best - m) / s } else { 0.0 },
                });
            }
        }
    }
    let rows = all
        .iter()
        .map(|v| {
            let zs: Vec<f64> = cells.iter().filter(|c| c.variant == v.variant).map(|c| c.z).collect();
            VariantSummary {
                variant: v.variant.clone(),
                mean_z: if zs.is_empty() { f64::NAN } else { mean(&zs) },
                std_z: if zs.is_empty() { f64::NAN } else { std_pop(&zs) },
                best_losses: cells
                    .iter()
                    .filter(|c| c.variant == v.variant)
                    .map(|c| c.best_loss)
                    .collect(),
                ideas: v.runs.iter().map(|r| r.explored.len()).sum(),
            }
        })
        .collect();
    AblationReport {
        benchmark: benchmark.into(),
        seed,
        pooling: POOLING_NOTE.into(),
        rows,
        cells,
        notices,
    }
}

pub fn run_ablation(
    variants: &[AblationVariant],
    bench: &AblationBenchmark<'_>,
    seed: u64,
    factory: ProviderFactory<'_>,
    exec: &dyn Executor,
) -> AblationReport {
    let all: Vec<VariantRuns> = variants.iter().map(|v| run_variant(v, bench, seed, factory, exec)).collect();
    assemble_report(&bench.id, seed, &all)
}

impl AblationReport {
    pub fn row(&self, variant: &str) -> Option<&VariantSummary> {
        self.rows.iter().find(|r| r.variant == variant)
    }

    /// `variant,run,best_loss,z`, one line per cell.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("variant,run,best_loss,z\n");
        for c in &self.cells {
            let _ = writeln!(s, "{},{},{:?},{:?}", c.variant, c.run, c.best_loss, c.z);
        }
        s
    }

    pub fn summary_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "benchmark: {}  seed: {}", self.benchmark, self.seed);
        let _ = writeln!(s, "pooling: {}", self.pooling);
        let _ = writeln!(s, "{:<18} {:>9} {:>8} {:>6}  best losses", "variant", "mean_z", "std_z", "ideas");
        for r in &self.rows {
            let bests: Vec<String> = r.best_losses.iter().map(|b| alloc::format!("{b:.5}")).collect();
            let _ = writeln!(
                s,
                "{:<18} {:>9.4} {:>8.4} {:>6}  {}",
                r.variant,
                r.mean_z,
                r.std_z,
                r.ideas,
                bests.join(" ")
            );
        }
        for n in &self.notices {
            let _ = writeln!(s, "notice: {n}");
        }
        s
    }
}

/// Exhaustive evaluation of a grid with the agent's own tool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub key: String,
    pub grid: String,
    pub benchmark: String,
    pub seed: u64,
    pub kind: ScoreKind,
    pub best_index: usize,
    pub best_config: String,
    pub best_score: Score,
    pub scores: Vec<Score>,
    /// The grid points exactly as evaluated.
    pub grid_text: String,
}

/// Content hash of everything that determines an oracle result.
pub fn oracle_key(grid: &Grid, benchmark: &str, seed: u64) -> String {
    let mut h = Sha256::new();
    h.update(grid.describe().as_bytes());
    h.update([0u8]);
    h.update(benchmark.as_bytes());
    h.update([0u8]);
    h.update(seed.to_le_bytes());
    let mut out = String::with_capacity(64);
    for b in h.finalize() {
        let _ = write!(out, "{b:02x}");
    }
    out
}

pub fn oracle_grid_search(grid: &Grid, benchmark: &str, seed: u64, scorer: &dyn Scorer, exec: &dyn Executor) -> OracleResult {
    let configs = grid.configs();
    let scores = exec.score_all(scorer, &configs);
    let kind = scorer.kind();
    let mut best = 0;
    for i in 1..scores.len() {
        if rank_values(kind, scores[i].value, scores[best].value) == core::cmp::Ordering::Less {
            best = i;
        }
    }
    OracleResult {
        key: oracle_key(grid, benchmark, seed),
        grid: grid.name.clone(),
        benchmark: benchmark.into(),
        seed,
        kind,
        best_index: best,
        best_config: serialize_config(&configs[best]),
        best_score: scores[best].clone(),
        scores,
        grid_text: grid.describe(),
    }
}

impl OracleResult {
    /// True when the result was computed for exactly this grid, benchmark and seed.
    pub fn is_fresh(&self, grid: &Grid, benchmark: &str, seed: u64) -> bool {
        self.key == oracle_key(grid, benchmark, seed) && self.scores.len() == grid.len()
    }

    pub fn best(&self) -> Config {
        parse_config(&self.best_config).expect("oracle stores canonical text")
    }

    /// Best score among points accepted by `keep`.
    pub fn best_where(&self, grid: &Grid, keep: impl Fn(&Config) -> bool) -> Option<(usize, &Score)> {
        let configs = grid.configs();
        let mut best: Option<(usize, &Score)> = None;
        for (i, (c, s)) in configs.iter().zip(&self.scores).enumerate() {
            if !keep(c) || s.is_failed() {
                continue;
            }
            if best.is_none_or(|(_, b)| rank_values(self.kind, s.value, b.value) == core::cmp::Ordering::Less) {
                best = Some((i, s));
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::presets;
    use crate::persona::{PersonaKind, PersonaSpec};
    use crate::proposer::ScriptedProvider;
    use crate::sim::datasets::{gen_supervised_dataset, DatasetName};
    use crate::tools::TrainerScorer;
    use crate::offline::SerialExecutor;

    #[test]
    fn zscore_analytic() {
        let z = zscore_normalize(&[1.0, 2.0, 3.0]);
        let e = libm::sqrt(1.5);
        for (a, b) in z.values.iter().zip([-e, 0.0, e]) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((z.values[2] - 1.2247).abs() < 1e-4);
        assert!(z.warning.is_none());
        let c = zscore_normalize(&[4.0, 4.0, 4.0]);
        assert_eq!(c.values, [0.0; 3]);
        assert!(c.warning.is_some());
    }

    #[test]
    fn one_point_grid() {
        let data = gen_supervised_dataset(DatasetName::LinregEasy, 0);
        let s = TrainerScorer::new(data, 0);
        let g = Grid::single("one", &presets::adagrad_linear(), crate::config::Diff::default());
        let r = oracle_grid_search(&g, "linreg-easy", 0, &s, &SerialExecutor);
        assert_eq!(r.best_index, 0);
        assert_eq!(r.best(), presets::adagrad_linear());
        assert!(r.is_fresh(&g, "linreg-easy", 0));
        assert!(!r.is_fresh(&g, "linreg-easy", 1));
        assert!(!r.is_fresh(&g, "illcond-100", 0));
    }

    #[test]
    fn scripted_runs_ignore_framing_and_reproduce() {
        let data = gen_supervised_dataset(DatasetName::LinregEasy, 0);
        let s = TrainerScorer::new(data, 0);
        let bench = AblationBenchmark {
            id: "linreg-easy".into(),
            persona: PersonaSpec::new(PersonaKind::Optimizer),
            baseline: presets::adagrad_linear(),
            scorer: &s,
        };
        let reply = r#"[{"explanation": "[exploit] lr", "diff": [{"op": "set", "path": "optimizer.learning_rate", "value": 0.3}]},
                        {"explanation": "[explore] lr", "diff": [{"op": "set", "path": "optimizer.learning_rate", "value": 0.01}]}]"#;
        let factory = |_: &AblationVariant, run: u32| -> Result<Box<dyn Provider>, ProviderError> {
            if run == 1 {
                return Err(ProviderError::Transport("down".into()));
            }
            Ok(Box::new(ScriptedProvider::new(alloc::vec![reply.into(); 2])))
        };
        let mut on = AblationVariant::new("on", ContextStrategy::FullSortedByScore);
        on.runs = 3;
        on.ideas_per_run = 4;
        let mut off = on.clone();
        off.name = "off".into();
        off.framing = false;
        let a = run_ablation(&[on.clone(), off.clone()], &bench, 5, &factory, &SerialExecutor);
        let b = run_ablation(&[on, off], &bench, 5, &factory, &SerialExecutor);
        assert_eq!(a, b);
        assert_eq!(a.rows.len(), 2);
        assert_eq!(a.rows[0].best_losses, a.rows[1].best_losses);
        assert_eq!(a.rows[0].mean_z, a.rows[1].mean_z);
        assert_eq!(a.notices.len(), 2);
        assert_eq!(a.cells.len(), 4);
        assert!(a.to_csv().starts_with("variant,run,best_loss,z\n"));
        assert_eq!(a.to_csv().lines().count(), 5);
    }
}
