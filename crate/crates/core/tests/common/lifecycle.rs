//! Randomized schedules against a cheap environment.

use autorec_core::config::{presets, Config, Diff, DiffOp, Literal};
use autorec_core::offline::{Source, TrialManifest};
use autorec_core::online::{DriftCheck, Event, Orchestrator, OuterLoopConfig, TrainingOutcome, TrialEnv};
use autorec_core::persona::PersonaKind;
use autorec_core::sim::online::TrueEffects;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Outcomes are simple functions of the config: high learning rates drift
/// or diverge, long training trips the guardrail.
pub struct ToyEnv {
    base: Config,
}

impl ToyEnv {
    pub fn new() -> Self {
        Self {
            base: presets::adagrad_linear(),
        }
    }
}

impl TrialEnv for ToyEnv {
    fn baseline(&self, _: PersonaKind) -> &Config {
        &self.base
    }

    fn data_rows(&self, _: PersonaKind) -> usize {
        5000
    }

    fn estimated_cost(&self, _: PersonaKind, c: &Config) -> f64 {
        c.training.epochs as f64 * 4000.0
    }

    fn drift(&self, _: PersonaKind, c: &Config) -> Option<DriftCheck> {
        Some(DriftCheck {
            delta: c.optimizer.learning_rate,
            bound: 1.0,
            cost_units: 4000.0,
        })
    }

    fn train(&self, _: PersonaKind, c: &Config) -> TrainingOutcome {
        let ok = c.optimizer.learning_rate <= 0.5;
        TrainingOutcome {
            ok,
            loss: if ok { c.optimizer.learning_rate } else { f64::INFINITY },
            param_count: 1,
            cost_units: self.estimated_cost(PersonaKind::Optimizer, c),
            truth: TrueEffects {
                metric1: 0.01,
                metric2: 0.0,
                metric3: if c.training.epochs > 8 { 0.05 } else { 0.0 },
            },
            detail: if ok { String::new() } else { "diverged".into() },
        }
    }
}

pub fn manifest(persona: PersonaKind, ops: Vec<DiffOp>) -> TrialManifest {
    TrialManifest {
        diff: Diff::new(ops),
        source: Source::Human,
        persona,
        explanation: String::new(),
        offline_score: None,
        provenance: None,
    }
}

fn random_manifest(rng: &mut ChaCha8Rng) -> TrialManifest {
    let ops = match rng.random_range(0..6) {
        0 => vec![],
        1 => vec![DiffOp::set("optimizer.learning_rate", Literal::Float([0.01, 0.3, 0.8, 3.0][rng.random_range(0..4)]))],
        2 => vec![DiffOp::set("training.epochs", Literal::Int([1, 4, 12, 80][rng.random_range(0..4)]))],
        3 => vec![DiffOp::set("optimizer.kind", Literal::Text("rmsprop".into()))],
        4 => vec![DiffOp::set("optimizer.warmup", Literal::Int(3))],
        _ => vec![DiffOp::set("optimizer.epsilon", Literal::Float(1e-6))],
    };
    TrialManifest {
        source: if rng.random_bool(0.5) { Source::Agent } else { Source::Human },
        ..manifest(PersonaKind::Optimizer, ops)
    }
}

/// Applies one random command. Errors from commands are legitimate
/// rejections; only tick errors are failures.
pub fn random_step(o: &mut Orchestrator, env: &ToyEnv, rng: &mut ChaCha8Rng) -> Result<(), String> {
    let ids: Vec<u64> = o.trials().map(|t| t.id).collect();
    match rng.random_range(0..10) {
        0..=2 => {
            o.submit_proposal(random_manifest(rng)).map_err(|e| e.to_string())?;
        }
        3 => {
            let mut order = o.queue().to_vec();
            order.shuffle(rng);
            if rng.random_bool(0.2) {
                order.pop();
            }
            let before = o.queue().to_vec();
            if o.reorder_queue(order).is_err() && o.queue() != &before[..] {
                return Err("rejected reorder mutated the queue".into());
            }
        }
        4 if !ids.is_empty() => {
            let _ = o.abort(*ids.choose(rng).unwrap(), "fuzz");
        }
        5 if !ids.is_empty() => {
            let _ = o.finalize(*ids.choose(rng).unwrap());
        }
        _ => o.tick(env).map_err(|e| e.to_string())?,
    }
    Ok(())
}

/// Every way the trial histories leave the lifecycle graph.
pub fn violations(o: &Orchestrator, live_limit: usize) -> Vec<String> {
    let mut v = Vec::new();
    for t in o.trials() {
        if t.history.first().map(|h| h.phase) != Some(autorec_core::online::Phase::Proposed) {
            v.push(format!("trial {} does not start PROPOSED", t.id));
        }
        for w in t.history.windows(2) {
            if !w[0].phase.can_transition(w[1].phase) {
                v.push(format!("trial {}: {} -> {}", t.id, w[0].phase, w[1].phase));
            }
            if w[0].tick > w[1].tick {
                v.push(format!("trial {}: time runs backwards", t.id));
            }
        }
        if t.history.last().map(|h| h.phase) != Some(t.phase) {
            v.push(format!("trial {}: phase disagrees with history", t.id));
        }
    }
    let live = o.trials().filter(|t| t.phase == autorec_core::online::Phase::Live).count();
    if live > live_limit {
        v.push(format!("{live} live trials over limit {live_limit}"));
    }
    v
}

/// Illegal-transition count and other failures of one random schedule.
pub struct ScheduleOutcome {
    pub illegal: usize,
    pub errors: Vec<String>,
}

pub fn fuzz_schedule(seed: u64) -> ScheduleOutcome {
    let env = ToyEnv::new();
    let cfg = OuterLoopConfig {
        duration_ticks: 9,
        seed,
        ..OuterLoopConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut o = Orchestrator::new(cfg.clone());
    let mut out = ScheduleOutcome { illegal: 0, errors: Vec::new() };
    for _ in 0..rng.random_range(5..40) {
        if let Err(e) = random_step(&mut o, &env, &mut rng) {
            out.errors.push(e);
        }
        out.illegal += violations(&o, cfg.live_limit).len();
    }
    if let Err(e) = o.run_until_quiescent(&env, 1000) {
        out.errors.push(e.to_string());
    }
    out.illegal += violations(&o, cfg.live_limit).len();
    let terminal = o.trials().filter(|t| t.phase.is_terminal()).count();
    if terminal != o.trials().count() {
        out.errors.push("not quiescent".into());
    }
    if o.journal().len() != terminal {
        out.errors.push(format!("journal has {} records for {terminal} terminal trials", o.journal().len()));
    }
    for t in o.trials() {
        if (t.detail.starts_with("compile") || t.detail.starts_with("budget")) && t.cost_units != 0.0 {
            out.errors.push(format!("fast-failed trial {} cost {}", t.id, t.cost_units));
        }
    }
    out
}

fn jsonl(events: &[Event]) -> Vec<Event> {
    let text: String = events.iter().map(|e| serde_json::to_string(e).unwrap() + "\n").collect();
    text.lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

/// Crashes a random schedule part way, restores from a snapshot plus the
/// JSONL event tail, and compares against an uninterrupted run.
pub fn restart_case(seed: u64) -> Result<(), String> {
    let env = ToyEnv::new();
    let cfg = OuterLoopConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let steps: Vec<u64> = (0..60).map(|_| rng.random()).collect();
    let crash_at = rng.random_range(1..60);
    let snap_at = rng.random_range(0..crash_at);

    let mut reference = Orchestrator::new(cfg.clone());
    for s in &steps {
        random_step(&mut reference, &env, &mut ChaCha8Rng::seed_from_u64(*s))?;
    }
    reference.run_until_quiescent(&env, 1000).map_err(|e| e.to_string())?;

    let mut first = Orchestrator::new(cfg.clone());
    let mut log = Vec::new();
    let mut snapshot = None;
    for (i, s) in steps[..crash_at].iter().enumerate() {
        if i == snap_at {
            log.extend(first.take_events());
            snapshot = Some((first.snapshot(), log.len()));
        }
        random_step(&mut first, &env, &mut ChaCha8Rng::seed_from_u64(*s))?;
    }
    log.extend(first.take_events());
    drop(first);

    let log = jsonl(&log);
    let mut resumed = match snapshot {
        Some((snap, n)) => {
            let snap = serde_json::from_str(&serde_json::to_string(&snap).unwrap()).unwrap();
            Orchestrator::restore(cfg.clone(), Some(snap), &log[n..])
        }
        None => Orchestrator::restore(cfg.clone(), None, &log),
    }
    .map_err(|e| e.to_string())?;
    for s in &steps[crash_at..] {
        random_step(&mut resumed, &env, &mut ChaCha8Rng::seed_from_u64(*s))?;
    }
    resumed.run_until_quiescent(&env, 1000).map_err(|e| e.to_string())?;
    if resumed.state() != reference.state() {
        return Err(format!("seed {seed}: resumed state differs"));
    }
    let mut ids: Vec<u64> = resumed.journal().records().iter().map(|r| r.trial_id).collect();
    let n = ids.len();
    ids.sort_unstable();
    ids.dedup();
    if ids.len() != n {
        return Err(format!("seed {seed}: duplicate journal records"));
    }
    Ok(())
}
