//! Command-line interface. Every flag has an `AUTOREC_*` environment
//! override. Read commands print JSON with `--json`. Commands on the outer
//! loop open the state directory directly, or go to a running service when
//! `--server` is given.

use std::io::Read as _;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};
use autorec_core::ablation::{
    oracle_grid_search, run_ablation, standard_variants, AblationBenchmark, AblationVariant, OracleResult,
};
use autorec_core::config::{parse_config, presets, Config};
use autorec_core::journal::{ContextStrategy, JournalRecord};
use autorec_core::offline::{promote_top_k, run_inner_loop, InnerLoopRun, TrialManifest};
use autorec_core::online::{OuterLoopConfig, SimEnv};
use autorec_core::persona::{PersonaKind, PersonaSpec};
use autorec_core::proposer::{MutationPolicy, Provider, ProviderConfig, ProviderError, ProviderKind};
use autorec_core::sim::{gen_interaction_logs, gen_supervised_dataset, DatasetName, LogTable, SimSpec};
use autorec_core::space::{self, GRID_NAMES};
use autorec_core::tools::{LatentOracleScorer, RewardScorer, Scorer, TrainerScorer};
use autorec_core::trainer::Dataset;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::api::{trial_view, ApiError, Command, CommandKind, RemoteClient, Service};
use crate::exec::{ParallelEnv, RayonExecutor};
use crate::providers::{make_provider, TOKEN_ENV};
use crate::registry::{self, Registry};
use crate::server::{self, Ticker};
use crate::{artifact, providers};

/// Default state directory of the outer loop.
pub const DEFAULT_STATE_DIR: &str = "autorec-state";
/// Default name of the variable holding the service bearer token.
pub const DEFAULT_AUTH_TOKEN_ENV: &str = "AUTOREC_API_TOKEN";
pub const DEFAULT_LOG_ROWS: usize = 20_000;

/// Every CLI command that maps onto a service command.
pub const CLI_COMMANDS: [(&str, CommandKind); 9] = [
    ("trials list", CommandKind::ListTrials),
    ("trials show", CommandKind::GetTrial),
    ("trials submit", CommandKind::SubmitTrial),
    ("trials abort", CommandKind::AbortTrial),
    ("queue reorder", CommandKind::ReorderQueue),
    ("journal show", CommandKind::ShowJournal),
    ("steering add", CommandKind::AddSteering),
    ("steering show", CommandKind::ShowSteering),
    ("experiments metrics", CommandKind::ExperimentMetrics),
];

#[derive(Debug, Parser)]
#[command(name = "autorec", version, about = "Agent-driven optimization loop for recommendation models")]
pub struct Cli {
    /// Print machine-readable JSON.
    #[arg(long, global = true, env = "AUTOREC_JSON")]
    pub json: bool,
    #[command(subcommand)]
    pub command: Top,
}

#[derive(Debug, Subcommand)]
pub enum Top {
    /// Simulated datasets and interaction logs.
    #[command(subcommand)]
    Env(EnvCmd),
    /// Offline proposal loop.
    #[command(subcommand)]
    Inner(InnerCmd),
    /// Online trial loop and its HTTP service.
    #[command(subcommand)]
    Outer(OuterCmd),
    #[command(subcommand)]
    Trials(TrialsCmd),
    #[command(subcommand)]
    Queue(QueueCmd),
    #[command(subcommand)]
    Steering(SteeringCmd),
    #[command(subcommand)]
    Experiments(ExperimentsCmd),
    #[command(subcommand)]
    Journal(JournalCmd),
    /// Context-strategy ablation benchmark.
    #[command(subcommand)]
    Ablation(AblationCmd),
    /// Exhaustive grid search used as ground truth.
    #[command(subcommand)]
    Oracle(OracleCmd),
}

/// Where outer-loop commands go.
#[derive(Debug, Clone, Args)]
pub struct Target {
    /// State directory of the outer loop [default: autorec-state].
    #[arg(long, env = "AUTOREC_STATE")]
    pub state: Option<PathBuf>,
    /// Base URL of a running `outer serve`; used instead of --state.
    #[arg(long, env = "AUTOREC_SERVER")]
    pub server: Option<String>,
    /// Variable holding the service bearer token.
    #[arg(long, env = "AUTOREC_AUTH_TOKEN_ENV", default_value = DEFAULT_AUTH_TOKEN_ENV)]
    pub auth_token_env: String,
}

impl Target {
    pub fn state_dir(&self) -> PathBuf {
        self.state.clone().unwrap_or_else(|| DEFAULT_STATE_DIR.into())
    }

    pub fn is_explicit(&self) -> bool {
        self.state.is_some() || self.server.is_some()
    }

    pub fn execute(&self, cmd: Command) -> Result<Value, ApiError> {
        match &self.server {
            Some(url) => RemoteClient::new(url, std::env::var(&self.auth_token_env).ok()).execute(&cmd),
            None => Service::open(&self.state_dir(), None)?.execute(cmd),
        }
    }
}

/// Where datasets and logs come from.
#[derive(Debug, Clone, Args)]
pub struct EnvSource {
    /// Registry directory written by `env gen`; without it data is generated from the seed.
    #[arg(long = "env", env = "AUTOREC_ENV")]
    pub env_dir: Option<PathBuf>,
    /// Log rows when generating logs from the seed.
    #[arg(long, env = "AUTOREC_LOG_ROWS", default_value_t = DEFAULT_LOG_ROWS)]
    pub log_rows: usize,
}

impl EnvSource {
    fn registry(&self) -> Result<Option<Registry>> {
        self.env_dir
            .as_deref()
            .map(|d| Registry::open(d).with_context(|| format!("opening registry {}", d.display())))
            .transpose()
    }

    /// The dataset and the benchmark id naming it in reports and cache keys.
    pub fn dataset(&self, name: DatasetName, seed: u64) -> Result<(Dataset, String)> {
        match self.registry()? {
            Some(r) => {
                let sha = r
                    .manifest
                    .datasets
                    .iter()
                    .find(|d| d.name == name.as_str())
                    .map(|d| d.sha256[..12].to_string())
                    .unwrap_or_default();
                Ok((r.dataset(name.as_str())?, format!("{name}@{sha}")))
            }
            None => Ok((gen_supervised_dataset(name, seed), name.to_string())),
        }
    }

    pub fn logs(&self, seed: u64) -> Result<(LogTable, String)> {
        match self.registry()? {
            Some(r) => {
                let sha = r.manifest.logs.sha256[..12].to_string();
                Ok((r.logs()?, format!("logs@{sha}")))
            }
            None => Ok((
                gen_interaction_logs(&SimSpec {
                    rows: self.log_rows,
                    seed,
                    ..SimSpec::default()
                }),
                format!("logs-{}", self.log_rows),
            )),
        }
    }

    pub fn sim_env(&self, seed: u64) -> Result<SimEnv> {
        match self.registry()? {
            Some(r) => Ok(r.sim_env()?),
            None => Ok(SimEnv::standard(seed, self.log_rows)),
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum EnvCmd {
    /// Writes every dataset, the logs and a hashed manifest.
    Gen {
        #[arg(long, env = "AUTOREC_ENV", default_value = "autorec-env")]
        dir: PathBuf,
        #[arg(long, env = "AUTOREC_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long, env = "AUTOREC_LOG_ROWS", default_value_t = DEFAULT_LOG_ROWS)]
        log_rows: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProviderArg {
    Heuristic,
    Scripted,
    HttpLlm,
}

#[derive(Debug, Args)]
pub struct InnerRunArgs {
    #[arg(long, env = "AUTOREC_PERSONA", value_parser = parse_persona)]
    pub persona: PersonaKind,
    #[arg(long, env = "AUTOREC_PROVIDER", value_enum, default_value_t = ProviderArg::Heuristic)]
    pub provider: ProviderArg,
    /// Replay file for the scripted provider: one JSON string per line.
    #[arg(long, env = "AUTOREC_REPLAY")]
    pub replay: Option<PathBuf>,
    /// Model endpoint for the http-llm provider.
    #[arg(long, env = "AUTOREC_LLM_ENDPOINT", default_value = "")]
    pub endpoint: String,
    /// Variable holding the model endpoint's bearer token.
    #[arg(long, env = "AUTOREC_LLM_TOKEN_ENV", default_value = TOKEN_ENV)]
    pub token_env: String,
    #[arg(long, env = "AUTOREC_LLM_MAX_TOKENS", default_value_t = 8192)]
    pub max_tokens: u32,
    #[arg(long, env = "AUTOREC_LLM_TIMEOUT_MS", default_value_t = 60_000)]
    pub timeout_ms: u64,
    #[arg(long, env = "AUTOREC_LLM_RETRIES", default_value_t = 2)]
    pub retries: u32,
    #[arg(long, env = "AUTOREC_ROUNDS", default_value_t = 7)]
    pub rounds: u32,
    #[arg(long, env = "AUTOREC_PER_ROUND", default_value_t = 10)]
    pub per_round: u32,
    /// full_sorted_by_score, full_by_timestamp, top_<k> or none.
    #[arg(long, env = "AUTOREC_CONTEXT", default_value = "full_sorted_by_score", value_parser = parse_context)]
    pub context: ContextStrategy,
    #[arg(long, env = "AUTOREC_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Artifact directory [default: runs/<persona>-<seed>].
    #[arg(long, env = "AUTOREC_OUT")]
    pub out: Option<PathBuf>,
    /// Baseline config file in text form [default: the persona's preset].
    #[arg(long, env = "AUTOREC_BASELINE")]
    pub baseline: Option<PathBuf>,
    /// Rank by cost among candidates within the baseline's noise margin.
    #[arg(long, env = "AUTOREC_COST_AWARE")]
    pub cost_aware: bool,
    /// Trainer seeds averaged per score.
    #[arg(long, env = "AUTOREC_SCORER_SEEDS", default_value_t = 1)]
    pub scorer_seeds: u64,
    /// Submit the best k candidates that clear the noise margin.
    #[arg(long, env = "AUTOREC_SUBMIT")]
    pub submit: Option<usize>,
    /// Worker threads for scoring; 0 uses every core.
    #[arg(long, env = "AUTOREC_WORKERS", default_value_t = 0)]
    pub workers: usize,
    #[command(flatten)]
    pub source: EnvSource,
    /// Journal and steering come from here when given; submissions go here.
    #[command(flatten)]
    pub target: Target,
}

#[derive(Debug, Subcommand)]
pub enum InnerCmd {
    /// Runs the offline loop and writes a run artifact directory.
    Run(Box<InnerRunArgs>),
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, env = "AUTOREC_STATE", default_value = DEFAULT_STATE_DIR)]
    pub state: PathBuf,
    #[arg(long, env = "AUTOREC_BIND", default_value = "127.0.0.1")]
    pub bind: String,
    #[arg(long, env = "AUTOREC_PORT", default_value_t = 8080)]
    pub port: u16,
    #[arg(long, env = "AUTOREC_TICK_INTERVAL_MS", default_value_t = 1000)]
    pub tick_interval_ms: u64,
    /// Variable holding the bearer token; unset leaves the API open.
    #[arg(long, env = "AUTOREC_AUTH_TOKEN_ENV", default_value = DEFAULT_AUTH_TOKEN_ENV)]
    pub auth_token_env: String,
    /// Seed of a new state directory's orchestrator and of generated data.
    #[arg(long, env = "AUTOREC_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, env = "AUTOREC_WORKERS", default_value_t = 0)]
    pub workers: usize,
    #[command(flatten)]
    pub source: EnvSource,
}

#[derive(Debug, Subcommand)]
pub enum OuterCmd {
    /// Hosts the orchestrator and its HTTP API, ticking on an interval.
    Serve(ServeArgs),
    /// Ticks a state directory until nothing is in flight.
    Run {
        #[arg(long, env = "AUTOREC_STATE", default_value = DEFAULT_STATE_DIR)]
        state: PathBuf,
        #[arg(long, env = "AUTOREC_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long, env = "AUTOREC_MAX_TICKS", default_value_t = 1000)]
        max_ticks: u64,
        #[arg(long, env = "AUTOREC_WORKERS", default_value_t = 0)]
        workers: usize,
        #[command(flatten)]
        source: EnvSource,
    },
}

#[derive(Debug, Subcommand)]
pub enum TrialsCmd {
    List {
        #[command(flatten)]
        target: Target,
    },
    Show {
        id: u64,
        #[command(flatten)]
        target: Target,
    },
    /// Submits a trial manifest from a JSON file, or stdin for `-`.
    Submit {
        manifest: PathBuf,
        #[command(flatten)]
        target: Target,
    },
    Abort {
        id: u64,
        #[arg(long, default_value = "")]
        reason: String,
        #[command(flatten)]
        target: Target,
    },
}

#[derive(Debug, Subcommand)]
pub enum QueueCmd {
    /// Replaces the queue order; the ids must be a permutation of it.
    Reorder {
        #[arg(required = true, num_args = 1..)]
        ids: Vec<u64>,
        #[command(flatten)]
        target: Target,
    },
}

#[derive(Debug, Subcommand)]
pub enum SteeringCmd {
    /// Queues an instruction for the persona's next prompt.
    Add {
        #[arg(long, value_parser = parse_persona)]
        persona: PersonaKind,
        #[arg(long)]
        text: String,
        #[command(flatten)]
        target: Target,
    },
    Show {
        #[arg(long, value_parser = parse_persona)]
        persona: PersonaKind,
        #[command(flatten)]
        target: Target,
    },
}

#[derive(Debug, Subcommand)]
pub enum ExperimentsCmd {
    Metrics {
        id: u64,
        #[command(flatten)]
        target: Target,
    },
}

#[derive(Debug, Subcommand)]
pub enum JournalCmd {
    Show {
        #[command(flatten)]
        target: Target,
    },
}

#[derive(Debug, Subcommand)]
pub enum AblationCmd {
    /// Runs the standard variants on the optimizer benchmark.
    Run {
        #[arg(long, env = "AUTOREC_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long, env = "AUTOREC_OUT", default_value = "ablation")]
        out: PathBuf,
        /// Runs per variant [default: each variant's own].
        #[arg(long, env = "AUTOREC_ABLATION_RUNS")]
        runs: Option<u32>,
        /// Scored ideas per run [default: each variant's own].
        #[arg(long, env = "AUTOREC_ABLATION_IDEAS")]
        ideas: Option<u32>,
        #[arg(long, env = "AUTOREC_WORKERS", default_value_t = 0)]
        workers: usize,
        #[command(flatten)]
        source: EnvSource,
    },
}

#[derive(Debug, Subcommand)]
pub enum OracleCmd {
    /// Scores every point of a named grid, caching by content hash.
    Grid {
        #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(GRID_NAMES))]
        grid: String,
        #[arg(long, env = "AUTOREC_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long, env = "AUTOREC_ORACLE_CACHE", default_value = "oracle-cache")]
        cache: PathBuf,
        /// Recompute even when a cached result exists.
        #[arg(long)]
        refresh: bool,
        /// Score reward grids against the hidden satisfaction column.
        #[arg(long)]
        latent: bool,
        #[arg(long, env = "AUTOREC_WORKERS", default_value_t = 0)]
        workers: usize,
        #[command(flatten)]
        source: EnvSource,
    },
}

fn parse_persona(s: &str) -> Result<PersonaKind, String> {
    s.parse()
}

fn parse_context(s: &str) -> Result<ContextStrategy, String> {
    s.parse()
}

fn read_manifest(path: &Path) -> Result<TrialManifest> {
    let text = if path == Path::new("-") {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s)?;
        s
    } else {
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?
    };
    serde_json::from_str(&text).with_context(|| format!("{} is not a trial manifest", path.display()))
}

/// The service command a parsed CLI invocation stands for, if any.
pub fn service_command(top: &Top) -> Result<Option<(&Target, Command)>> {
    Ok(Some(match top {
        Top::Trials(TrialsCmd::List { target }) => (target, Command::ListTrials),
        Top::Trials(TrialsCmd::Show { id, target }) => (target, Command::GetTrial(*id)),
        Top::Trials(TrialsCmd::Submit { manifest, target }) => (target, Command::SubmitTrial(read_manifest(manifest)?)),
        Top::Trials(TrialsCmd::Abort { id, reason, target }) => (
            target,
            Command::AbortTrial {
                id: *id,
                reason: reason.clone(),
            },
        ),
        Top::Queue(QueueCmd::Reorder { ids, target }) => (target, Command::ReorderQueue(ids.clone())),
        Top::Journal(JournalCmd::Show { target }) => (target, Command::ShowJournal),
        Top::Steering(SteeringCmd::Add { persona, text, target }) => (
            target,
            Command::AddSteering {
                persona: *persona,
                text: text.clone(),
            },
        ),
        Top::Steering(SteeringCmd::Show { persona, target }) => (target, Command::ShowSteering(*persona)),
        Top::Experiments(ExperimentsCmd::Metrics { id, target }) => (target, Command::ExperimentMetrics(*id)),
        _ => return Ok(None),
    }))
}

/// A closed stdout (say, piped into `head`) is not an error.
fn print_json(v: &impl serde::Serialize) {
    use std::io::Write;
    let _ = writeln!(std::io::stdout().lock(), "{}", serde_json::to_string_pretty(v).expect("serializable"));
}

fn str_at<'a>(v: &'a Value, ptr: &str) -> &'a str {
    v.pointer(ptr).and_then(Value::as_str).unwrap_or("-")
}

fn print_trial_line(t: &Value) {
    let pos = t["queue_position"].as_u64().map_or("-".to_string(), |p| p.to_string());
    println!(
        "{:>5}  {:<10} {:<12} {:<6} queue {:<4} {}",
        t["id"],
        str_at(t, "/phase"),
        str_at(t, "/manifest/persona"),
        str_at(t, "/manifest/source"),
        pos,
        str_at(t, "/detail")
    );
}

fn print_human(kind: CommandKind, v: &Value) {
    match kind {
        CommandKind::ListTrials => {
            let trials = v.as_array().map(Vec::as_slice).unwrap_or_default();
            if trials.is_empty() {
                println!("no trials");
            }
            trials.iter().for_each(print_trial_line);
        }
        CommandKind::GetTrial => {
            print_trial_line(v);
            if let Some(d) = v.pointer("/manifest/explanation").and_then(Value::as_str) {
                println!("  {d}");
            }
            for h in v["history"].as_array().into_iter().flatten() {
                println!("  tick {:>4}  {}", h["tick"], h["phase"].as_str().unwrap_or("-"));
            }
            if let Some(m) = v["metrics"].as_array().and_then(|m| m.last()) {
                println!("  latest metrics: {m}");
            }
        }
        CommandKind::ShowJournal => match serde_json::from_value::<Vec<JournalRecord>>(v.clone()) {
            Ok(records) if records.is_empty() => println!("journal is empty"),
            Ok(records) => records.iter().for_each(|r| println!("{}", r.render())),
            Err(_) => print_json(v),
        },
        CommandKind::ShowSteering | CommandKind::AddSteering => {
            println!("{}:", str_at(v, "/persona"));
            for s in v["steering"].as_array().into_iter().flatten() {
                println!("  - {}", s.as_str().unwrap_or_default());
            }
        }
        CommandKind::ExperimentMetrics => {
            println!("experiment {} (trial {})", v["experiment_id"], v["trial_id"]);
            for r in v["reports"].as_array().into_iter().flatten() {
                println!(
                    "  ticks {:>4}  metric1 {:+.5}  metric2 {:+.5}  metric3 {:+.5}  ± {:.5}",
                    r["ticks_observed"],
                    r["metric1"].as_f64().unwrap_or(f64::NAN),
                    r["metric2"].as_f64().unwrap_or(f64::NAN),
                    r["metric3"].as_f64().unwrap_or(f64::NAN),
                    r["confidence_halfwidth"].as_f64().unwrap_or(f64::NAN)
                );
            }
        }
        CommandKind::SubmitTrial | CommandKind::AbortTrial => {
            println!("trial {} is {}", v["id"], str_at(v, "/phase"))
        }
        CommandKind::ReorderQueue => println!("queue: {}", v["queue"]),
    }
}

pub fn run(cli: Cli) -> Result<()> {
    if let Some((target, cmd)) = service_command(&cli.command)? {
        let kind = cmd.kind();
        let v = target.execute(cmd).map_err(|e| anyhow!(e))?;
        if cli.json {
            print_json(&v);
        } else {
            print_human(kind, &v);
        }
        return Ok(());
    }
    match cli.command {
        Top::Env(EnvCmd::Gen { dir, seed, log_rows }) => {
            let m = registry::generate(&dir, seed, log_rows)?;
            if cli.json {
                print_json(&m);
            } else {
                for d in &m.datasets {
                    println!("{:<12} {:>6} rows  {}", d.name, d.rows, d.file);
                }
                println!("{:<12} {:>6} rows  {}", "logs", log_rows, m.logs.file);
                println!("manifest written to {}", dir.join(registry::MANIFEST_FILE).display());
            }
        }
        Top::Inner(InnerCmd::Run(args)) => inner_run(*args, cli.json)?,
        Top::Outer(OuterCmd::Serve(args)) => serve(args)?,
        Top::Outer(OuterCmd::Run {
            state,
            seed,
            max_ticks,
            workers,
            source,
        }) => {
            let env = ParallelEnv::new(source.sim_env(seed)?, workers);
            let mut svc = Service::open(
                &state,
                Some(OuterLoopConfig {
                    seed,
                    ..OuterLoopConfig::default()
                }),
            )?;
            let ticks = svc.run_until_quiescent(&env, max_ticks)?;
            let counts = svc.orch.phase_counts();
            if cli.json {
                print_json(&json!({ "ticks": ticks, "tick": svc.orch.tick_count(), "phases": counts }));
            } else {
                println!("ran {ticks} ticks, now at tick {}; phases {counts:?}", svc.orch.tick_count());
            }
        }
        Top::Ablation(AblationCmd::Run {
            seed,
            out,
            runs,
            ideas,
            workers,
            source,
        }) => ablation(seed, &out, runs, ideas, workers, &source, cli.json)?,
        Top::Oracle(OracleCmd::Grid {
            grid,
            seed,
            cache,
            refresh,
            latent,
            workers,
            source,
        }) => oracle(&grid, seed, &cache, refresh, latent, workers, &source, cli.json)?,
        _ => unreachable!("service commands are handled above"),
    }
    Ok(())
}

/// Scorer data for one persona; borrowed by the scorer it builds.
enum Bench {
    Trainer(TrainerScorer),
    Reward(LogTable),
}

impl Bench {
    fn scorer(&self) -> Box<dyn Scorer + '_> {
        match self {
            Bench::Trainer(s) => Box::new(s.clone()),
            Bench::Reward(logs) => Box::new(RewardScorer::new(logs)),
        }
    }
}

fn persona_bench(persona: PersonaKind, seed: u64, scorer_seeds: u64, source: &EnvSource) -> Result<(Bench, Config)> {
    let trainer = |name| -> Result<Bench> {
        let (data, _) = source.dataset(name, seed)?;
        Ok(Bench::Trainer(TrainerScorer::with_seeds(data, (0..scorer_seeds.max(1)).collect())))
    };
    Ok(match persona {
        PersonaKind::Optimizer => (trainer(DatasetName::Illcond100)?, presets::adagrad_linear()),
        PersonaKind::Architecture => (trainer(DatasetName::GatedNoise)?, presets::dense_baseline()),
        PersonaKind::Reward => (Bench::Reward(source.logs(seed)?.0), presets::adagrad_linear()),
    })
}

fn provider_config(a: &InnerRunArgs) -> Result<ProviderConfig> {
    let kind = match a.provider {
        ProviderArg::Heuristic => ProviderKind::Heuristic {
            policy: MutationPolicy::default(),
        },
        ProviderArg::Scripted => ProviderKind::Scripted {
            replay_path: a
                .replay
                .as_ref()
                .ok_or_else(|| anyhow!("--provider scripted needs --replay"))?
                .display()
                .to_string(),
        },
        ProviderArg::HttpLlm => ProviderKind::HttpLlm {
            endpoint: a.endpoint.clone(),
            token_env: a.token_env.clone(),
            max_tokens: a.max_tokens,
        },
    };
    Ok(ProviderConfig {
        kind,
        timeout_ms: a.timeout_ms,
        max_retries: a.retries,
    })
}

fn inner_run(a: InnerRunArgs, json_out: bool) -> Result<()> {
    let (bench, preset) = persona_bench(a.persona, a.seed, a.scorer_seeds, &a.source)?;
    let baseline = match &a.baseline {
        Some(p) => parse_config(&std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)
            .map_err(|e| anyhow!("{}: {e}", p.display()))?,
        None => preset,
    };
    let scorer = bench.scorer();
    let margin = scorer.noise_margin(&baseline);
    let mut persona = PersonaSpec::new(a.persona);
    if a.cost_aware {
        persona = persona.cost_aware(scorer.score(&baseline).value + margin);
    }
    let mut history = Vec::new();
    if a.target.is_explicit() {
        let journal = a.target.execute(Command::ShowJournal).map_err(|e| anyhow!(e))?;
        history = serde_json::from_value(journal)?;
        let steering = a.target.execute(Command::ShowSteering(a.persona)).map_err(|e| anyhow!(e))?;
        persona.steering = serde_json::from_value(steering["steering"].clone())?;
    }

    let mut run = InnerLoopRun::new(persona, baseline.clone(), a.seed);
    run.rounds = a.rounds;
    run.proposals_per_round = a.per_round;
    run.context_strategy = a.context;
    run.history = history;
    let provider_cfg = provider_config(&a)?;
    let mut provider = make_provider(&provider_cfg)?;
    let exec = RayonExecutor::new(a.workers);
    let art = run_inner_loop(&run, provider.as_mut(), scorer.as_ref(), &exec)?;

    let out = a
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("runs/{}-{}", a.persona, a.seed)));
    let summary = artifact::write_run(&out, &run, &provider_cfg, &art, margin)
        .with_context(|| format!("writing artifact {}", out.display()))?;

    let mut submitted = Vec::new();
    if let Some(k) = a.submit {
        for m in promote_top_k(&art.ranked, k, &art.baseline_score, margin, a.persona) {
            let v = a.target.execute(Command::SubmitTrial(m)).map_err(|e| anyhow!(e))?;
            submitted.push(v["id"].as_u64().unwrap_or_default());
        }
    }

    let ranking = artifact::ranking(&art);
    if json_out {
        print_json(&json!({
            "artifact": out,
            "baseline_score": summary.baseline_score,
            "noise_margin": margin,
            "scored_ideas": summary.scored_ideas,
            "rejected": summary.rejected,
            "ranking": ranking,
            "submitted": submitted,
        }));
        return Ok(());
    }
    println!("artifact: {}", out.display());
    println!(
        "baseline {:.6} ({} cost units), noise margin {margin:.6}; {} scored, {} rejected",
        art.baseline_score.value, art.baseline_score.cost_units, summary.scored_ideas, summary.rejected
    );
    for e in &ranking {
        let s = &e.candidate.score;
        println!(
            "{:>3}. {:>12.6}  cost {:>9.0}  #{:<4} {}",
            e.rank, s.value, s.cost_units, e.candidate.trial_id, e.candidate.proposal.explanation
        );
    }
    if !submitted.is_empty() {
        println!("submitted trials {submitted:?}");
    }
    Ok(())
}

fn serve(a: ServeArgs) -> Result<()> {
    let env = Arc::new(ParallelEnv::new(a.source.sim_env(a.seed)?, a.workers));
    let service = Service::open(
        &a.state,
        Some(OuterLoopConfig {
            seed: a.seed,
            ..OuterLoopConfig::default()
        }),
    )?;
    let shared = Arc::new(Mutex::new(service));
    let token = std::env::var(&a.auth_token_env).ok().filter(|t| !t.is_empty());
    if token.is_none() {
        tracing::warn!("{} is unset; the API accepts unauthenticated requests", a.auth_token_env);
    }
    let app = server::router(shared.clone(), token);
    let ticker = Ticker::start(shared.clone(), env, Duration::from_millis(a.tick_interval_ms.max(1)));

    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind((a.bind.as_str(), a.port)).await?;
        let addr = listener.local_addr()?;
        println!("listening on http://{addr}");
        tracing::info!("serving {} on {addr}", a.state.display());
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
    })?;
    drop(ticker);
    let mut g = shared.lock().unwrap_or_else(|e| e.into_inner());
    let Service { orch, store } = &mut *g;
    if let Some(store) = store {
        store.persist(orch)?;
        store.snapshot(orch)?;
    }
    Ok(())
}

fn ablation(
    seed: u64,
    out: &Path,
    runs: Option<u32>,
    ideas: Option<u32>,
    workers: usize,
    source: &EnvSource,
    json_out: bool,
) -> Result<()> {
    let (data, id) = source.dataset(DatasetName::Illcond100, seed)?;
    let scorer = TrainerScorer::new(data, 0);
    let bench = AblationBenchmark {
        id,
        persona: PersonaSpec::new(PersonaKind::Optimizer),
        baseline: presets::adagrad_linear(),
        scorer: &scorer,
    };
    let mut variants = standard_variants();
    for v in &mut variants {
        v.runs = runs.unwrap_or(v.runs);
        v.ideas_per_run = ideas.unwrap_or(v.ideas_per_run);
    }
    let factory = |v: &AblationVariant, _run: u32| -> Result<Box<dyn Provider>, ProviderError> { make_provider(&v.provider) };
    let report = run_ablation(&variants, &bench, seed, &factory, &RayonExecutor::new(workers));
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join("ablation_report.csv"), report.to_csv())?;
    std::fs::write(out.join("ablation_summary.txt"), report.summary_text())?;
    std::fs::write(
        out.join("ablation_report.json"),
        serde_json::to_string_pretty(&report)? + "\n",
    )?;
    if json_out {
        print_json(&report);
    } else {
        print!("{}", report.summary_text());
        println!("report written to {}", out.display());
    }
    Ok(())
}

/// Cache file for one grid, benchmark and seed. A file whose content key
/// no longer matches is stale and is only replaced on request.
pub fn oracle_cache_path(cache: &Path, grid: &str, benchmark: &str, seed: u64) -> PathBuf {
    let bench: String = benchmark
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
        .collect();
    cache.join(format!("{grid}-{bench}-seed{seed}.json"))
}

#[allow(clippy::too_many_arguments)]
fn oracle(
    grid_name: &str,
    seed: u64,
    cache: &Path,
    refresh: bool,
    latent: bool,
    workers: usize,
    source: &EnvSource,
    json_out: bool,
) -> Result<()> {
    let grid = space::named_grid(grid_name).ok_or_else(|| anyhow!("unknown grid `{grid_name}`"))?;
    let exec = RayonExecutor::new(workers);
    let (bench, id): (Bench, String) = match grid_name {
        "reward" => {
            let (logs, id) = source.logs(seed)?;
            (Bench::Reward(logs), if latent { format!("{id}-latent") } else { id })
        }
        "architecture" => {
            let (data, id) = source.dataset(DatasetName::GatedNoise, seed)?;
            (Bench::Trainer(TrainerScorer::new(data, 0)), id)
        }
        "efficiency" => {
            let (data, id) = source.dataset(DatasetName::Illcond100, seed)?;
            (Bench::Trainer(TrainerScorer::with_seeds(data, vec![0, 1, 2])), id)
        }
        _ => {
            let (data, id) = source.dataset(DatasetName::Illcond100, seed)?;
            (Bench::Trainer(TrainerScorer::new(data, 0)), id)
        }
    };
    if latent && grid_name != "reward" {
        bail!("--latent applies only to the reward grid");
    }
    let path = oracle_cache_path(cache, grid_name, &id, seed);
    let cached = match std::fs::read_to_string(&path) {
        Ok(text) => Some(serde_json::from_str::<OracleResult>(&text).with_context(|| format!("{}", path.display()))?),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => None,
        Err(e) => return Err(e).with_context(|| format!("{}", path.display())),
    };
    let (result, from_cache) = match cached {
        Some(r) if !refresh && r.is_fresh(&grid, &id, seed) => (r, true),
        Some(_) if !refresh => bail!(
            "{} is stale for this grid, benchmark and seed; rerun with --refresh",
            path.display()
        ),
        _ => {
            let r = match (&bench, latent) {
                (Bench::Reward(logs), true) => {
                    oracle_grid_search(&grid, &id, seed, &LatentOracleScorer { logs }, &exec)
                }
                _ => oracle_grid_search(&grid, &id, seed, bench.scorer().as_ref(), &exec),
            };
            std::fs::create_dir_all(cache)?;
            std::fs::write(&path, serde_json::to_string_pretty(&r)? + "\n")?;
            (r, false)
        }
    };
    if json_out {
        print_json(&json!({ "cache": path, "cached": from_cache, "result": result }));
    } else {
        println!(
            "{} grid, {} points on {id} seed {seed}{}",
            grid_name,
            grid.len(),
            if from_cache { " (cached)" } else { "" }
        );
        println!(
            "best #{}: {:.6} ({})",
            result.best_index, result.best_score.value, result.best_score.detail
        );
        println!("{}", result.best_config);
        println!("cache: {}", path.display());
    }
    Ok(())
}

pub fn trial_json(service: &Service, id: u64) -> Option<Value> {
    service.orch.trial(id).map(|t| trial_view(t, service.orch.queue()))
}

pub fn replay_from_artifact(dir: &Path) -> Result<Vec<String>> {
    Ok(providers::load_replay(&dir.join(artifact::REPLAY_FILE))?)
}
