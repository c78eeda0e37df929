//! Lifecycle behavior of the orchestrator against the simulated environment.

use std::sync::OnceLock;

use autorec_core::config::{Diff, DiffOp, Literal};
use autorec_core::journal::RecordStatus;
use autorec_core::offline::{Source, TrialManifest};
use autorec_core::online::{OnlineError, Orchestrator, OuterLoopConfig, Phase, SimEnv, TrialEnv};
use autorec_core::persona::PersonaKind;
use autorec_core::sim::online::OnlineSimulator;

fn env() -> &'static SimEnv {
    static ENV: OnceLock<SimEnv> = OnceLock::new();
    ENV.get_or_init(|| SimEnv::standard(0, 20_000))
}

fn manifest(persona: PersonaKind, source: Source, ops: Vec<DiffOp>) -> TrialManifest {
    TrialManifest {
        diff: Diff::new(ops),
        source,
        persona,
        explanation: String::new(),
        offline_score: None,
        provenance: None,
    }
}

fn set(path: &str, v: Literal) -> DiffOp {
    DiffOp::set(path, v)
}

fn rmsprop() -> Vec<DiffOp> {
    vec![
        set("optimizer.kind", Literal::Text("rmsprop".into())),
        set("optimizer.decay", Literal::Float(0.9)),
        set("optimizer.momentum", Literal::Float(0.0)),
    ]
}

fn watch_only_reward() -> Vec<DiffOp> {
    vec![
        DiffOp::remove("reward.click.weight"),
        set("reward.watch_time.weight", Literal::Float(1.0)),
        set("reward.watch_time.transform", Literal::Text("identity".into())),
    ]
}

fn click_dwell_reward() -> Vec<DiffOp> {
    vec![
        set("reward.dwell_time.weight", Literal::Float(0.5)),
        set("reward.dwell_time.transform", Literal::Text("log1p".into())),
    ]
}

#[test]
fn submissions_are_source_agnostic() {
    let mut o = Orchestrator::new(OuterLoopConfig::default());
    let a = o.submit_proposal(manifest(PersonaKind::Optimizer, Source::Agent, rmsprop())).unwrap();
    let h = o.submit_proposal(manifest(PersonaKind::Optimizer, Source::Human, rmsprop())).unwrap();
    assert_ne!(a, h);
    assert_eq!(o.queue(), &[a, h]);
    assert_eq!(o.trial(h).unwrap().phase, Phase::Proposed);

    let err = o.submit_json(r#"{"source": "human", "persona": "optimizer"}"#).unwrap_err();
    assert!(matches!(err, OnlineError::MalformedManifest(_)));
    assert_eq!(o.queue().len(), 2);
}

#[test]
fn reorder_changes_processing_order() {
    let cfg = OuterLoopConfig {
        live_limit: 1,
        ..OuterLoopConfig::default()
    };
    let mut o = Orchestrator::new(cfg);
    let a = o.submit_proposal(manifest(PersonaKind::Optimizer, Source::Agent, rmsprop())).unwrap();
    let b = o
        .submit_proposal(manifest(PersonaKind::Optimizer, Source::Human, vec![set("optimizer.learning_rate", Literal::Float(0.3))]))
        .unwrap();
    let c = o.submit_proposal(manifest(PersonaKind::Optimizer, Source::Human, vec![])).unwrap();

    assert_eq!(o.reorder_queue(vec![a, c]).unwrap_err(), OnlineError::NotPermutation);
    assert_eq!(o.queue(), &[a, b, c]);
    o.reorder_queue(vec![b, a, c]).unwrap();
    o.tick(env()).unwrap();
    assert_eq!(o.trial(b).unwrap().phase, Phase::Validated);
    assert_eq!(o.trial(a).unwrap().phase, Phase::Proposed);
    assert_eq!(o.queue(), &[a, c]);
}

#[test]
fn validation_gates() {
    let cfg = OuterLoopConfig::default();
    let mut o = Orchestrator::new(cfg.clone());
    let bad = o
        .submit_proposal(manifest(PersonaKind::Optimizer, Source::Agent, vec![set("optimizer.kind", Literal::Text("rmsprop".into()))]))
        .unwrap();
    let pricey = o
        .submit_proposal(manifest(PersonaKind::Optimizer, Source::Agent, vec![
            set("training.epochs", Literal::Int(100)),
            set("training.batch_size", Literal::Int(256)),
        ]))
        .unwrap();
    let same = o.submit_proposal(manifest(PersonaKind::Optimizer, Source::Human, vec![])).unwrap();
    let wild = o
        .submit_proposal(manifest(PersonaKind::Optimizer, Source::Agent, vec![set("optimizer.learning_rate", Literal::Float(1000.0))]))
        .unwrap();

    assert_eq!(o.validate_trial(bad, env()).unwrap(), Phase::Failed);
    let t = o.trial(bad).unwrap();
    assert!(t.detail.starts_with("compile"), "{}", t.detail);
    assert_eq!(t.cost_units, 0.0);

    assert_eq!(o.validate_trial(pricey, env()).unwrap(), Phase::Failed);
    let t = o.trial(pricey).unwrap();
    assert!(t.detail.starts_with("budget"), "{}", t.detail);
    assert_eq!(t.cost_units, 0.0);
    let c = o.trial(pricey).unwrap();
    let cfg_cost = env().estimated_cost(PersonaKind::Optimizer, &autorec_core::config::apply_diff(env().baseline(PersonaKind::Optimizer), &c.manifest.diff).unwrap());
    assert!(cfg_cost > cfg.budget_c);

    assert_eq!(o.validate_trial(same, env()).unwrap(), Phase::Validated);
    assert_eq!(o.validate_trial(wild, env()).unwrap(), Phase::Failed);
    assert!(o.trial(wild).unwrap().detail.starts_with("drift"));

    let err = o.validate_trial(same, env()).unwrap_err();
    assert!(matches!(err, OnlineError::IllegalTransition { .. }));
}

#[test]
fn volume_gate_costs_nothing() {
    let cfg = OuterLoopConfig {
        min_rows: usize::MAX,
        ..OuterLoopConfig::default()
    };
    let mut o = Orchestrator::new(cfg);
    let id = o.submit_proposal(manifest(PersonaKind::Architecture, Source::Agent, vec![])).unwrap();
    assert_eq!(o.validate_trial(id, env()).unwrap(), Phase::Failed);
    let t = o.trial(id).unwrap();
    assert!(t.detail.starts_with("volume"));
    assert_eq!(t.cost_units, 0.0);
}

#[test]
fn training_registers_versions_and_catches_divergence() {
    let mut permissive = env().clone();
    permissive.drift_factor = f64::INFINITY;
    let mut o = Orchestrator::new(OuterLoopConfig::default());
    let a = o.submit_proposal(manifest(PersonaKind::Optimizer, Source::Agent, rmsprop())).unwrap();
    let b = o
        .submit_proposal(manifest(PersonaKind::Optimizer, Source::Agent, vec![set("optimizer.learning_rate", Literal::Float(1000.0))]))
        .unwrap();
    let c = o.submit_proposal(manifest(PersonaKind::Optimizer, Source::Agent, vec![])).unwrap();
    o.run_until_quiescent(&permissive, 100).unwrap();

    let tb = o.trial(b).unwrap();
    assert_eq!(tb.phase, Phase::Failed);
    assert_eq!(tb.detail, "training: diverged");
    assert!(tb.history.iter().any(|h| h.phase == Phase::Training));
    let (ra, rc) = (o.trial(a).unwrap().model_ref.clone().unwrap(), o.trial(c).unwrap().model_ref.clone().unwrap());
    assert!(ra.version < rc.version);
    assert_ne!(ra.name, rc.name);
}

#[test]
fn concurrent_training_is_order_independent() {
    let run = |first: Vec<DiffOp>, second: Vec<DiffOp>| {
        let mut o = Orchestrator::new(OuterLoopConfig::default());
        let x = o.submit_proposal(manifest(PersonaKind::Optimizer, Source::Agent, first)).unwrap();
        let y = o.submit_proposal(manifest(PersonaKind::Optimizer, Source::Agent, second)).unwrap();
        o.tick(env()).unwrap();
        o.tick(env()).unwrap();
        let tx = o.trial(x).unwrap().training.clone().unwrap();
        let ty = o.trial(y).unwrap().training.clone().unwrap();
        (tx, ty)
    };
    let lr = vec![set("optimizer.learning_rate", Literal::Float(0.3))];
    let (a1, b1) = run(rmsprop(), lr.clone());
    let (b2, a2) = run(lr, rmsprop());
    assert_eq!(a1, a2);
    assert_eq!(b1, b2);
}

/// First tick at which the observed metric3 stream exceeds `limit`,
/// recomputed from the simulator directly.
fn first_violation(o: &Orchestrator, id: u64, limit: f64, ticks: u32) -> Option<u32> {
    let e = o.trial(id).unwrap().experiment.unwrap();
    let mut sim = OnlineSimulator::new(e.truth, o.config.online, e.seed);
    (1..=ticks).find(|_| sim.advance().is_some_and(|r| r.metric3 > limit))
}

#[test]
fn guardrail_aborts_reward_hacking_within_a_tick() {
    let cfg = OuterLoopConfig::default();
    let mut o = Orchestrator::new(cfg.clone());
    let trap = o.submit_proposal(manifest(PersonaKind::Reward, Source::Agent, watch_only_reward())).unwrap();
    let good = o.submit_proposal(manifest(PersonaKind::Reward, Source::Agent, click_dwell_reward())).unwrap();
    let mut saw_live_before_delay = false;
    while o.trial(trap).unwrap().phase != Phase::Aborted {
        o.tick(env()).unwrap();
        let t = o.trial(trap).unwrap();
        if let (Phase::Live, Some(e)) = (t.phase, t.experiment) {
            if o.tick_count() - e.started_tick < cfg.online.delay_ticks as u64 {
                saw_live_before_delay = true;
                assert!(t.metrics.is_empty());
            }
        }
        assert!(o.tick_count() < 50, "{:?}", o.trial(trap).unwrap());
    }
    assert!(saw_live_before_delay);
    let t = o.trial(trap).unwrap();
    let e = t.experiment.unwrap();
    assert!(e.truth.metric3 > cfg.guardrail_metric3);
    let first = first_violation(&o, trap, cfg.guardrail_metric3, cfg.duration_ticks).unwrap();
    let abort_tick = t.history.last().unwrap().tick;
    assert!(abort_tick - e.started_tick <= first as u64);
    assert!(t.detail.starts_with("guardrail"));

    o.run_until_quiescent(env(), 100).unwrap();
    let g = o.trial(good).unwrap();
    assert_eq!(g.phase, Phase::Completed);
    let r = g.final_metrics().unwrap();
    assert_eq!(r.ticks_observed, cfg.duration_ticks);
    assert!(r.metric1 > 0.0);
}

#[test]
fn finalize_journals_each_terminal_trial_once() {
    let mut o = Orchestrator::new(OuterLoopConfig::default());
    let done = o.submit_proposal(manifest(PersonaKind::Optimizer, Source::Agent, rmsprop())).unwrap();
    let bad = o
        .submit_proposal(manifest(PersonaKind::Optimizer, Source::Agent, vec![set("optimizer.kind", Literal::Text("rmsprop".into()))]))
        .unwrap();
    let stopped = o.submit_proposal(manifest(PersonaKind::Optimizer, Source::Human, vec![])).unwrap();
    assert_eq!(o.abort(stopped, "not needed").unwrap(), Phase::Failed);
    assert!(matches!(o.finalize(done), Err(OnlineError::NotTerminal(_))));
    let rec = o.finalize(stopped).unwrap().clone();
    assert_eq!(rec.status, RecordStatus::Failed);
    let before = o.journal().len();
    assert_eq!(o.finalize(stopped).unwrap_err(), OnlineError::AlreadyFinalized(stopped));
    assert_eq!(o.journal().len(), before);

    o.run_until_quiescent(env(), 100).unwrap();
    let recs = o.journal().records();
    assert_eq!(recs.len(), 3);
    let r_done = recs.iter().find(|r| r.trial_id == done).unwrap();
    assert_eq!(r_done.status, RecordStatus::Completed);
    let online = r_done.online.unwrap();
    assert!(online.confidence_halfwidth > 0.0);
    assert!(r_done.cost_units > 0.0);
    let r_bad = recs.iter().find(|r| r.trial_id == bad).unwrap();
    assert_eq!(r_bad.status, RecordStatus::Failed);
    assert!(r_bad.online.is_none());
    assert!(r_bad.detail.starts_with("compile"));
}

#[test]
fn live_slots_are_bounded() {
    let cfg = OuterLoopConfig::default();
    let mut o = Orchestrator::new(cfg.clone());
    for _ in 0..6 {
        o.submit_proposal(manifest(PersonaKind::Reward, Source::Agent, click_dwell_reward())).unwrap();
    }
    for _ in 0..60 {
        o.tick(env()).unwrap();
        let live = o.trials().filter(|t| t.phase == Phase::Live).count();
        assert!(live <= cfg.live_limit);
    }
    assert!(o.is_quiescent());
    assert_eq!(o.journal().len(), 6);
}
