//! Outer loop: a tick-driven orchestrator that moves trials through
//! validation, training and a live experiment, then journals them.
//!
//! Every state change is an [`Event`]. The orchestrator applies an event and
//! then records it, so replaying the recorded events onto a snapshot
//! rebuilds the exact state, including the live metric streams.

mod env;

pub use env::{DriftCheck, ModelBench, SimEnv, TrainingOutcome, TrialEnv, DEFAULT_DRIFT_FACTOR, PROBE_ROWS};

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::config::{apply_diff, validate_config, Config, OpKind};
use crate::journal::{Journal, JournalRecord, RecordStatus};
use crate::math::splitmix64;
use crate::offline::TrialManifest;
use crate::persona::PersonaKind;
use crate::sim::online::{OnlineMetricsReport, OnlineParams, OnlineSimulator, TrueEffects, DEFAULT_DURATION_TICKS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Phase {
    Proposed,
    Validated,
    Training,
    Live,
    Completed,
    Failed,
    Aborted,
}

impl Phase {
    pub const ALL: [Phase; 7] = [
        Self::Proposed,
        Self::Validated,
        Self::Training,
        Self::Live,
        Self::Completed,
        Self::Failed,
        Self::Aborted,
    ];

    pub fn is_terminal(self) -> bool {
        matches!(self, Self::Completed | Self::Failed | Self::Aborted)
    }

    /// The lifecycle graph. Nothing leaves a terminal phase.
    pub fn can_transition(self, to: Phase) -> bool {
        use Phase::*;
        matches!(
            (self, to),
            (Proposed, Validated)
                | (Validated, Training)
                | (Training, Live)
                | (Live, Completed)
                | (Proposed | Validated | Training, Failed)
                | (Live, Aborted)
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Proposed => "PROPOSED",
            Self::Validated => "VALIDATED",
            Self::Training => "TRAINING",
            Self::Live => "LIVE",
            Self::Completed => "COMPLETED",
            Self::Failed => "FAILED",
            Self::Aborted => "ABORTED",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseChange {
    pub phase: Phase,
    pub tick: u64,
    pub detail: String,
}

/// A trained model as published to the registry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelRef {
    pub name: String,
    pub version: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Experiment {
    pub id: u64,
    pub seed: u64,
    pub started_tick: u64,
    pub truth: TrueEffects,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub id: u64,
    pub manifest: TrialManifest,
    pub phase: Phase,
    pub history: Vec<PhaseChange>,
    pub training: Option<TrainingOutcome>,
    /// Tick from which the registry shows the trained model.
    pub ready_tick: Option<u64>,
    pub model_ref: Option<ModelRef>,
    pub experiment: Option<Experiment>,
    /// Every report that became visible, one per tick.
    pub metrics: Vec<OnlineMetricsReport>,
    pub cost_units: f64,
    pub detail: String,
    pub finalized: bool,
}

impl Trial {
    pub fn final_metrics(&self) -> Option<&OnlineMetricsReport> {
        self.metrics.last()
    }

    pub fn submitted_tick(&self) -> u64 {
        self.history.first().map(|h| h.tick).unwrap_or(0)
    }

    pub fn finished_tick(&self) -> u64 {
        self.history.last().map(|h| h.tick).unwrap_or(0)
    }

    /// The journal entry for a terminal trial.
    pub fn to_record(&self) -> JournalRecord {
        let status = match self.phase {
            Phase::Completed => RecordStatus::Completed,
            Phase::Aborted => RecordStatus::Aborted,
            _ => RecordStatus::Failed,
        };
        JournalRecord {
            trial_id: self.id,
            persona: self.manifest.persona,
            diff: self.manifest.diff.clone(),
            diff_text: self.manifest.diff.render(),
            offline_score: self.manifest.offline_score.clone(),
            online: self.final_metrics().copied(),
            status,
            detail: self.detail.clone(),
            submitted_tick: self.submitted_tick(),
            finished_tick: self.finished_tick(),
            cost_units: self.cost_units,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OuterLoopConfig {
    /// Trials allowed past the queue at once (validated, training or live).
    pub live_limit: usize,
    pub duration_ticks: u32,
    /// Largest tolerated metric3 delta, as a fraction.
    pub guardrail_metric3: f64,
    /// Largest estimated training cost a trial may request.
    pub budget_c: f64,
    pub min_rows: usize,
    /// Ticks between launching training and the model appearing in the registry.
    pub training_ticks: u64,
    pub online: OnlineParams,
    pub seed: u64,
}

impl Default for OuterLoopConfig {
    fn default() -> Self {
        Self {
            live_limit: 3,
            duration_ticks: DEFAULT_DURATION_TICKS,
            guardrail_metric3: 0.01,
            budget_c: 256_000.0,
            min_rows: 1000,
            training_ticks: 1,
            online: OnlineParams::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OnlineError {
    #[error("malformed manifest: {0}")]
    MalformedManifest(String),
    #[error("new order is not a permutation of the queue")]
    NotPermutation,
    #[error("no trial {0}")]
    UnknownTrial(u64),
    #[error("trial {0} is not in a terminal phase")]
    NotTerminal(u64),
    #[error("trial {0} is already journaled")]
    AlreadyFinalized(u64),
    #[error("trial {id} is already {phase}")]
    AlreadyTerminal { id: u64, phase: Phase },
    #[error("illegal transition {from} -> {to} for trial {id}")]
    IllegalTransition { id: u64, from: Phase, to: Phase },
    #[error("event log is inconsistent: {0}")]
    Replay(String),
}

/// One persisted state change.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    Submitted { id: u64, tick: u64, manifest: TrialManifest },
    Reordered { order: Vec<u64> },
    Ticked { tick: u64 },
    Transitioned { id: u64, to: Phase, tick: u64, detail: String, cost_units: f64 },
    TrainingLaunched { id: u64, outcome: TrainingOutcome, ready_tick: u64 },
    ModelRegistered { id: u64, model_ref: ModelRef },
    LiveStarted { id: u64, experiment: Experiment },
    Finalized { id: u64 },
    Steered { persona: PersonaKind, line: String },
}

/// Serializable orchestrator state.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct OuterState {
    pub tick: u64,
    pub trials: BTreeMap<u64, Trial>,
    /// PROPOSED trial ids in processing order.
    pub queue: Vec<u64>,
    pub journal: Journal,
    pub next_id: u64,
    pub next_experiment: u64,
    pub registry_version: u64,
    pub steering: Vec<(PersonaKind, String)>,
    /// Events applied so far, counting those folded into this state.
    pub applied: u64,
}

/// State saved at a point in the event log.
pub type Snapshot = OuterState;

/// Counts per phase, for dashboards and invariants.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseCounts(pub BTreeMap<Phase, usize>);

pub struct Orchestrator {
    pub config: OuterLoopConfig,
    state: OuterState,
    sims: BTreeMap<u64, OnlineSimulator>,
    /// Events not yet taken by a persistence layer.
    pending: Vec<Event>,
}

impl Orchestrator {
    pub fn new(config: OuterLoopConfig) -> Self {
        Self {
            config,
            state: OuterState {
                next_id: 1,
                next_experiment: 1,
                ..OuterState::default()
            },
            sims: BTreeMap::new(),
            pending: Vec::new(),
        }
    }

    /// Rebuilds from a snapshot (or from scratch) plus the events after it.
    pub fn restore(config: OuterLoopConfig, snapshot: Option<Snapshot>, events: &[Event]) -> Result<Self, OnlineError> {
        let mut o = Self::new(config);
        if let Some(s) = snapshot {
            o.state = s;
            let live: Vec<(u64, Experiment)> = o
                .state
                .trials
                .values()
                .filter(|t| t.phase == Phase::Live)
                .filter_map(|t| t.experiment.map(|e| (t.id, e)))
                .collect();
            for (id, e) in live {
                let mut sim = OnlineSimulator::new(e.truth, o.config.online, e.seed);
                for _ in e.started_tick..o.state.tick {
                    sim.advance();
                }
                o.sims.insert(id, sim);
            }
        }
        for e in events {
            o.apply(e.clone())?;
        }
        Ok(o)
    }

    pub fn state(&self) -> &OuterState {
        &self.state
    }

    pub fn snapshot(&self) -> Snapshot {
        self.state.clone()
    }

    pub fn tick_count(&self) -> u64 {
        self.state.tick
    }

    pub fn trial(&self, id: u64) -> Option<&Trial> {
        self.state.trials.get(&id)
    }

    pub fn trials(&self) -> impl Iterator<Item = &Trial> {
        self.state.trials.values()
    }

    pub fn queue(&self) -> &[u64] {
        &self.state.queue
    }

    pub fn journal(&self) -> &Journal {
        &self.state.journal
    }

    pub fn steering(&self, persona: PersonaKind) -> Vec<String> {
        self.state
            .steering
            .iter()
            .filter(|(p, _)| *p == persona)
            .map(|(_, l)| l.clone())
            .collect()
    }

    pub fn phase_counts(&self) -> PhaseCounts {
        let mut m = BTreeMap::new();
        for t in self.state.trials.values() {
            *m.entry(t.phase).or_insert(0) += 1;
        }
        PhaseCounts(m)
    }

    /// Events recorded since the last call.
    pub fn take_events(&mut self) -> Vec<Event> {
        core::mem::take(&mut self.pending)
    }

    /// No trial is waiting or in flight, and every terminal trial is journaled.
    pub fn is_quiescent(&self) -> bool {
        self.state.trials.values().all(|t| t.phase.is_terminal() && t.finalized)
    }

    fn in_flight(&self) -> usize {
        self.state
            .trials
            .values()
            .filter(|t| matches!(t.phase, Phase::Validated | Phase::Training | Phase::Live))
            .count()
    }

    fn live(&self) -> usize {
        self.state.trials.values().filter(|t| t.phase == Phase::Live).count()
    }

    fn emit(&mut self, e: Event) -> Result<(), OnlineError> {
        self.apply(e.clone())?;
        self.pending.push(e);
        Ok(())
    }

    fn trial_mut(&mut self, id: u64) -> Result<&mut Trial, OnlineError> {
        self.state.trials.get_mut(&id).ok_or(OnlineError::UnknownTrial(id))
    }

    /// The single place state changes.
    fn apply(&mut self, e: Event) -> Result<(), OnlineError> {
        match e {
            Event::Submitted { id, tick, manifest } => {
                if self.state.trials.contains_key(&id) {
                    return Err(OnlineError::Replay(alloc::format!("trial {id} submitted twice")));
                }
                self.state.trials.insert(
                    id,
                    Trial {
                        id,
                        manifest,
                        phase: Phase::Proposed,
                        history: alloc::vec![PhaseChange {
                            phase: Phase::Proposed,
                            tick,
                            detail: String::new(),
                        }],
                        training: None,
                        ready_tick: None,
                        model_ref: None,
                        experiment: None,
                        metrics: Vec::new(),
                        cost_units: 0.0,
                        detail: String::new(),
                        finalized: false,
                    },
                );
                self.state.queue.push(id);
                self.state.next_id = self.state.next_id.max(id + 1);
            }
            Event::Reordered { order } => {
                if !is_permutation(&order, &self.state.queue) {
                    return Err(OnlineError::NotPermutation);
                }
                self.state.queue = order;
            }
            Event::Ticked { tick } => {
                self.state.tick = tick;
                for (id, sim) in &mut self.sims {
                    if let Some(r) = sim.advance() {
                        if let Some(t) = self.state.trials.get_mut(id) {
                            t.metrics.push(r);
                        }
                    }
                }
            }
            Event::Transitioned {
                id,
                to,
                tick,
                detail,
                cost_units,
            } => {
                let t = self.state.trials.get_mut(&id).ok_or(OnlineError::UnknownTrial(id))?;
                if !t.phase.can_transition(to) {
                    return Err(OnlineError::IllegalTransition { id, from: t.phase, to });
                }
                if t.phase == Phase::Proposed {
                    self.state.queue.retain(|q| *q != id);
                }
                t.phase = to;
                t.cost_units += cost_units;
                if to.is_terminal() || !detail.is_empty() {
                    t.detail = detail.clone();
                }
                t.history.push(PhaseChange { phase: to, tick, detail });
                if to.is_terminal() {
                    self.sims.remove(&id);
                }
            }
            Event::TrainingLaunched { id, outcome, ready_tick } => {
                let t = self.trial_mut(id)?;
                t.cost_units += outcome.cost_units;
                t.training = Some(outcome);
                t.ready_tick = Some(ready_tick);
            }
            Event::ModelRegistered { id, model_ref } => {
                self.state.registry_version = self.state.registry_version.max(model_ref.version);
                self.trial_mut(id)?.model_ref = Some(model_ref);
            }
            Event::LiveStarted { id, experiment } => {
                self.state.next_experiment = self.state.next_experiment.max(experiment.id + 1);
                self.trial_mut(id)?.experiment = Some(experiment);
                self.sims
                    .insert(id, OnlineSimulator::new(experiment.truth, self.config.online, experiment.seed));
            }
            Event::Finalized { id } => {
                let t = self.state.trials.get_mut(&id).ok_or(OnlineError::UnknownTrial(id))?;
                if t.finalized {
                    return Err(OnlineError::AlreadyFinalized(id));
                }
                if !t.phase.is_terminal() {
                    return Err(OnlineError::NotTerminal(id));
                }
                t.finalized = true;
                let record = t.to_record();
                self.state
                    .journal
                    .append(record)
                    .map_err(|e| OnlineError::Replay(e.to_string()))?;
            }
            Event::Steered { persona, line } => self.state.steering.push((persona, line)),
        }
        self.state.applied += 1;
        Ok(())
    }

    /// Enqueues a trial at the tail. Agent and human manifests are handled
    /// alike and identical diffs are not merged.
    pub fn submit_proposal(&mut self, manifest: TrialManifest) -> Result<u64, OnlineError> {
        for op in &manifest.diff.ops {
            if op.path.trim().is_empty() {
                return Err(OnlineError::MalformedManifest("diff op without a path".into()));
            }
            if op.op == OpKind::Set && op.value.is_none() {
                return Err(OnlineError::MalformedManifest(alloc::format!("set `{}` without a value", op.path)));
            }
        }
        let id = self.state.next_id;
        self.emit(Event::Submitted {
            id,
            tick: self.state.tick,
            manifest,
        })?;
        Ok(id)
    }

    /// Parses a manifest from JSON and submits it.
    pub fn submit_json(&mut self, json: &str) -> Result<u64, OnlineError> {
        let m: TrialManifest =
            serde_json::from_str(json).map_err(|e| OnlineError::MalformedManifest(e.to_string()))?;
        self.submit_proposal(m)
    }

    pub fn reorder_queue(&mut self, new_order: Vec<u64>) -> Result<&[u64], OnlineError> {
        if !is_permutation(&new_order, &self.state.queue) {
            return Err(OnlineError::NotPermutation);
        }
        self.emit(Event::Reordered { order: new_order })?;
        Ok(&self.state.queue)
    }

    pub fn add_steering(&mut self, persona: PersonaKind, line: String) -> Result<(), OnlineError> {
        self.emit(Event::Steered { persona, line })
    }

    /// Operator stop: a live trial is aborted, an earlier one fails.
    pub fn abort(&mut self, id: u64, reason: &str) -> Result<Phase, OnlineError> {
        let t = self.trial(id).ok_or(OnlineError::UnknownTrial(id))?;
        if t.phase.is_terminal() {
            return Err(OnlineError::AlreadyTerminal { id, phase: t.phase });
        }
        let to = if t.phase == Phase::Live { Phase::Aborted } else { Phase::Failed };
        self.transition(id, to, alloc::format!("operator: {reason}"), 0.0)?;
        Ok(to)
    }

    /// Journals a terminal trial. A second call for the same trial errors
    /// and leaves the journal unchanged.
    pub fn finalize(&mut self, id: u64) -> Result<&JournalRecord, OnlineError> {
        let t = self.trial(id).ok_or(OnlineError::UnknownTrial(id))?;
        if t.finalized {
            return Err(OnlineError::AlreadyFinalized(id));
        }
        if !t.phase.is_terminal() {
            return Err(OnlineError::NotTerminal(id));
        }
        self.emit(Event::Finalized { id })?;
        Ok(self.state.journal.records().last().expect("just appended"))
    }

    fn transition(&mut self, id: u64, to: Phase, detail: String, cost_units: f64) -> Result<(), OnlineError> {
        self.emit(Event::Transitioned {
            id,
            to,
            tick: self.state.tick,
            detail,
            cost_units,
        })
    }

    /// Checks a queued trial. Compile, volume and budget run before any
    /// training so their failures cost nothing.
    pub fn validate_trial(&mut self, id: u64, env: &dyn TrialEnv) -> Result<Phase, OnlineError> {
        let t = self.trial(id).ok_or(OnlineError::UnknownTrial(id))?;
        if t.phase != Phase::Proposed {
            return Err(OnlineError::IllegalTransition {
                id,
                from: t.phase,
                to: Phase::Validated,
            });
        }
        let (to, detail, cost) = match self.check(&t.manifest, env) {
            Ok((detail, cost)) => (Phase::Validated, detail, cost),
            Err((detail, cost)) => (Phase::Failed, detail, cost),
        };
        self.transition(id, to, detail, cost)?;
        Ok(to)
    }

    fn check(&self, m: &TrialManifest, env: &dyn TrialEnv) -> Result<(String, f64), (String, f64)> {
        let config: Config = apply_diff(env.baseline(m.persona), &m.diff).map_err(|e| (alloc::format!("compile: {e}"), 0.0))?;
        let report = validate_config(&config);
        if let Some(v) = report.violations.first() {
            return Err((alloc::format!("compile: {}: {}", v.path, v.rule), 0.0));
        }
        let rows = env.data_rows(m.persona);
        if rows < self.config.min_rows {
            return Err((alloc::format!("volume: {rows} rows < {}", self.config.min_rows), 0.0));
        }
        let cost = env.estimated_cost(m.persona, &config);
        if cost > self.config.budget_c {
            return Err((alloc::format!("budget: estimated {cost} cost_units > {}", self.config.budget_c), 0.0));
        }
        match env.drift(m.persona, &config) {
            Some(d) if !d.passed() => Err((
                alloc::format!("drift: probe delta {:.4} > bound {:.4}", d.delta, d.bound),
                d.cost_units,
            )),
            Some(d) => Ok((alloc::format!("drift {:.4} <= {:.4}", d.delta, d.bound), d.cost_units)),
            None => Ok((String::new(), 0.0)),
        }
    }

    fn experiment_seed(&self, id: u64) -> u64 {
        splitmix64(self.config.seed ^ splitmix64(id))
    }

    /// One scheduler step: advance live experiments, publish finished
    /// models, start live experiments, launch training, validate queue
    /// heads while capacity allows, then journal terminal trials.
    pub fn tick(&mut self, env: &dyn TrialEnv) -> Result<(), OnlineError> {
        let now = self.state.tick + 1;
        self.emit(Event::Ticked { tick: now })?;

        let live: Vec<u64> = self.ids_in(Phase::Live);
        for id in live {
            let t = &self.state.trials[&id];
            let started = t.experiment.map(|e| e.started_tick).unwrap_or(now);
            let elapsed = now - started;
            let fresh = t.metrics.last().filter(|r| r.ticks_observed as u64 == elapsed).copied();
            if let Some(r) = fresh {
                if r.metric3 > self.config.guardrail_metric3 {
                    let detail = alloc::format!(
                        "guardrail: metric3 {:+.2}% > {:+.2}% at tick {now}",
                        r.metric3 * 100.0,
                        self.config.guardrail_metric3 * 100.0
                    );
                    self.transition(id, Phase::Aborted, detail, 0.0)?;
                    continue;
                }
            }
            if elapsed >= self.config.duration_ticks as u64 {
                self.transition(id, Phase::Completed, String::new(), 0.0)?;
            }
        }

        for id in self.ids_in(Phase::Training) {
            let t = &self.state.trials[&id];
            if t.model_ref.is_none() && t.ready_tick.is_some_and(|r| now >= r) {
                let version = self.state.registry_version + 1;
                let name = alloc::format!("trial-{id}");
                self.emit(Event::ModelRegistered {
                    id,
                    model_ref: ModelRef { name, version },
                })?;
            }
            let t = &self.state.trials[&id];
            if t.model_ref.is_some() && self.live() < self.config.live_limit {
                let truth = t.training.as_ref().map(|o| o.truth).unwrap_or_default();
                let experiment = Experiment {
                    id: self.state.next_experiment,
                    seed: self.experiment_seed(id),
                    started_tick: now,
                    truth,
                };
                self.transition(id, Phase::Live, String::new(), 0.0)?;
                self.emit(Event::LiveStarted { id, experiment })?;
            }
        }

        let validated = self.ids_in(Phase::Validated);
        if !validated.is_empty() {
            let jobs: Vec<(PersonaKind, Config)> = validated
                .iter()
                .map(|id| {
                    let m = &self.state.trials[id].manifest;
                    let base = env.baseline(m.persona);
                    (m.persona, apply_diff(base, &m.diff).expect("validated diffs apply"))
                })
                .collect();
            let outcomes = env.train_batch(&jobs);
            for (id, outcome) in validated.into_iter().zip(outcomes) {
                self.transition(id, Phase::Training, String::new(), 0.0)?;
                let ok = outcome.ok;
                let detail = alloc::format!("training: {}", outcome.detail);
                let ready_tick = now + self.config.training_ticks;
                self.emit(Event::TrainingLaunched { id, outcome, ready_tick })?;
                if !ok {
                    self.transition(id, Phase::Failed, detail, 0.0)?;
                }
            }
        }

        while self.in_flight() < self.config.live_limit {
            let Some(&head) = self.state.queue.first() else { break };
            self.validate_trial(head, env)?;
        }

        let done: Vec<u64> = self
            .state
            .trials
            .values()
            .filter(|t| t.phase.is_terminal() && !t.finalized)
            .map(|t| t.id)
            .collect();
        for id in done {
            self.finalize(id)?;
        }
        Ok(())
    }

    fn ids_in(&self, phase: Phase) -> Vec<u64> {
        self.state
            .trials
            .values()
            .filter(|t| t.phase == phase)
            .map(|t| t.id)
            .collect()
    }

    /// Ticks until quiescent or `max_ticks` elapse. Returns ticks run.
    pub fn run_until_quiescent(&mut self, env: &dyn TrialEnv, max_ticks: u64) -> Result<u64, OnlineError> {
        let mut n = 0;
        while n < max_ticks && !self.is_quiescent() {
            self.tick(env)?;
            n += 1;
        }
        Ok(n)
    }
}

fn is_permutation(a: &[u64], b: &[u64]) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_unstable();
    y.sort_unstable();
    x == y
}

/// Metric streams of one experiment, for the metrics endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentMetrics {
    pub experiment_id: u64,
    pub trial_id: u64,
    pub reports: Vec<OnlineMetricsReport>,
}

impl Orchestrator {
    pub fn experiment_metrics(&self, experiment_id: u64) -> Option<ExperimentMetrics> {
        self.state
            .trials
            .values()
            .find(|t| t.experiment.is_some_and(|e| e.id == experiment_id))
            .map(|t| ExperimentMetrics {
                experiment_id,
                trial_id: t.id,
                reports: t.metrics.clone(),
            })
    }
}

impl fmt::Debug for Orchestrator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Orchestrator")
            .field("tick", &self.state.tick)
            .field("trials", &self.state.trials.len())
            .field("queue", &self.state.queue)
            .finish()
    }
}
