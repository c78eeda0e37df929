//! Seeded mutation provider. It reads only the prompt text, exactly what a
//! language model would see: the baseline, the journal lines, the quota and
//! the objectives. More visible history means a better-informed surrogate
//! and better anchors.

use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use rand::seq::IndexedRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{Provenance, Provider, ProviderError};
use crate::config::{
    apply_diff, diff_configs, parse_config, serialize_config, Activation, Block, Config, Diff,
    OptimizerKind, RewardSpec, RewardTerm, Signal,
};
use crate::math::{self, Rng};
use crate::persona::{Category, PersonaKind, Quota, COST_OBJECTIVE_PREFIX};
use crate::score::{rank_values, ScoreKind};
use crate::space::{ADAPTIVE_EPSILON, DECAYS, LEARNING_RATES, MOMENTA, REWARD_INPUTS};

const RNG_STREAM: u64 = 0x4E0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MutationPolicy {
    /// Candidates drawn per proposal slot before surrogate screening.
    pub candidates_per_slot: u32,
    /// Neighbours consulted by the surrogate.
    pub neighbors: u32,
    /// Largest relative change an exploit step makes.
    pub exploit_step: f64,
    pub max_blocks: u32,
    pub max_units: u32,
    /// Signals never used as reward inputs.
    pub excluded_signals: Vec<Signal>,
}

impl Default for MutationPolicy {
    fn default() -> Self {
        Self {
            candidates_per_slot: 8,
            neighbors: 3,
            exploit_step: 0.2,
            max_blocks: 3,
            max_units: 64,
            excluded_signals: vec![Signal::SurveyScore],
        }
    }
}

/// One parsed journal line.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewRecord {
    pub id: u64,
    pub config: Config,
    /// `+inf` for failed or unscored records.
    pub value: f64,
    pub cost_units: f64,
}

/// What the provider understood from a prompt.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptView {
    pub persona: PersonaKind,
    pub quota: Quota,
    pub baseline: Config,
    pub loss_ceiling: Option<f64>,
    pub records: Vec<ViewRecord>,
}

fn between<'a>(text: &'a str, open: &str, close: &str) -> Option<&'a str> {
    let start = text.find(open)? + open.len();
    let end = start + text[start..].find(close)?;
    Some(&text[start..end])
}

fn parse_quota(text: &str) -> Option<Quota> {
    let line = text.lines().find(|l| l.starts_with("Make ") && l.contains(" explore, "))?;
    let nums: Vec<u32> = line
        .split(|c: char| !c.is_ascii_digit())
        .filter(|s| !s.is_empty())
        .filter_map(|s| s.parse().ok())
        .collect();
    match nums[..] {
        [explore, exploit, innovate] => Some(Quota {
            explore,
            exploit,
            innovate,
        }),
        _ => None,
    }
}

fn parse_persona(text: &str) -> Option<PersonaKind> {
    let line = text.lines().find_map(|l| l.strip_prefix("- Edit only these paths: "))?;
    let prefixes: Vec<&str> = line.split(", ").map(|p| p.trim_end_matches('*')).collect();
    PersonaKind::ALL
        .into_iter()
        .find(|k| k.editable_prefixes() == prefixes.as_slice())
}

fn parse_records(journal: &str, baseline: &Config) -> Vec<ViewRecord> {
    let mut out = Vec::new();
    let mut lines = journal.lines().peekable();
    while let Some(line) = lines.next() {
        let Some(head) = line.strip_prefix('#') else { continue };
        let fields: Vec<&str> = head.split(" | ").collect();
        let Some(id) = fields.first().and_then(|f| f.split(' ').next()).and_then(|s| s.parse().ok()) else {
            continue;
        };
        let mut value = f64::INFINITY;
        let mut cost = 0.0;
        for f in &fields[1..] {
            if let Some((k, v)) = f.split_once('=') {
                match k {
                    "cost_units" => cost = v.parse().unwrap_or(0.0),
                    "proxy_loss" | "correlation" => value = v.parse().unwrap_or(f64::INFINITY),
                    _ => {}
                }
            }
        }
        let Some(diff_line) = lines.peek().and_then(|l| l.trim_start().strip_prefix("diff: ")) else {
            continue;
        };
        let config = Diff::parse_rendered(diff_line).ok().and_then(|d| apply_diff(baseline, &d).ok());
        lines.next();
        if let Some(config) = config {
            out.push(ViewRecord {
                id,
                config,
                value,
                cost_units: cost,
            });
        }
    }
    out
}

impl PromptView {
    pub fn parse(prompt: &str) -> Result<Self, String> {
        let persona = parse_persona(prompt).ok_or("no editable-path guardrail")?;
        let quota = parse_quota(prompt).ok_or("no category quota")?;
        let base_text = between(prompt, "<config>\n", "</config>").ok_or("no baseline configuration")?;
        let baseline = parse_config(base_text).map_err(|e| e.to_string())?;
        let journal = between(prompt, "<journal>\n", "</journal>").unwrap_or("");
        let loss_ceiling = prompt
            .lines()
            .find_map(|l| l.split_once(COST_OBJECTIVE_PREFIX))
            .and_then(|(_, v)| v.trim().parse().ok());
        Ok(Self {
            persona,
            quota,
            records: parse_records(journal, &baseline),
            baseline,
            loss_ceiling,
        })
    }

    fn kind(&self) -> ScoreKind {
        self.persona.score_kind()
    }

    fn best(&self) -> Option<&ViewRecord> {
        self.records
            .iter()
            .filter(|r| r.value.is_finite())
            .min_by(|a, b| rank_values(self.kind(), a.value, b.value))
    }

    /// Cheapest record within the loss ceiling; lower loss breaks ties.
    fn cheapest_feasible(&self, ceiling: f64) -> Option<&ViewRecord> {
        self.records
            .iter()
            .filter(|r| r.value <= ceiling)
            .min_by(|a, b| a.cost_units.total_cmp(&b.cost_units).then(a.value.total_cmp(&b.value)))
    }
}

#[derive(Debug, Clone, Default)]
pub struct HeuristicProvider {
    pub policy: MutationPolicy,
}

impl HeuristicProvider {
    pub fn new(policy: MutationPolicy) -> Self {
        Self { policy }
    }

    /// The proposals as `(category, explanation, config)`.
    pub fn generate(&self, view: &PromptView, n: usize, seed: u64) -> Vec<(Category, String, Config)> {
        let mut rng = math::rng(seed, RNG_STREAM);
        let quota = if view.quota.total() as usize == n {
            view.quota
        } else {
            Quota::scaled(n as u32)
        };
        let mut known: BTreeSet<String> = view.records.iter().map(|r| serialize_config(&r.config)).collect();
        known.insert(serialize_config(&view.baseline));
        let best = view.best().map_or(&view.baseline, |r| &r.config);
        let anchor = match view.loss_ceiling {
            Some(ceil) => view.cheapest_feasible(ceil).map_or(best, |r| &r.config),
            None => best,
        };
        let surrogate = Surrogate::fit(view, self.policy.neighbors as usize);
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let cat = quota.category_at(i);
            let from = if cat == Category::Explore { best } else { anchor };
            let mut cands: Vec<(String, Config)> = Vec::new();
            let want = self.policy.candidates_per_slot.max(1) as usize;
            for _ in 0..want * 6 {
                if cands.len() >= want {
                    break;
                }
                let Some((why, c)) = self.mutate(view, cat, from, &mut rng) else { continue };
                let key = serialize_config(&c);
                if known.contains(&key) || !crate::config::validate_config(&c).passed() {
                    continue;
                }
                if cands.iter().all(|(_, x)| serialize_config(x) != key) {
                    cands.push((why, c));
                }
            }
            if cands.is_empty() {
                // Neighbourhood exhausted: restart from the baseline with a bold move.
                for _ in 0..want * 6 {
                    if let Some((why, c)) = self.mutate(view, Category::Innovate, &view.baseline, &mut rng) {
                        if !known.contains(&serialize_config(&c)) {
                            cands.push((why, c));
                            break;
                        }
                    }
                }
            }
            let Some(pick) = surrogate.pick(view, &cands) else { continue };
            let (why, c) = cands.swap_remove(pick);
            known.insert(serialize_config(&c));
            out.push((cat, alloc::format!("[{cat}] {why}"), c));
        }
        out
    }

    fn mutate(&self, view: &PromptView, cat: Category, from: &Config, rng: &mut Rng) -> Option<(String, Config)> {
        match view.persona {
            PersonaKind::Optimizer => self.mutate_optimizer(view, cat, from, rng),
            PersonaKind::Architecture => self.mutate_architecture(cat, from, rng),
            PersonaKind::Reward => self.mutate_reward(cat, from, rng),
        }
    }

    fn mutate_optimizer(&self, view: &PromptView, cat: Category, from: &Config, rng: &mut Rng) -> Option<(String, Config)> {
        let mut c = from.clone();
        let o = &mut c.optimizer;
        match cat {
            Category::Explore => {
                let kinds: Vec<OptimizerKind> = OptimizerKind::ALL
                    .into_iter()
                    .filter(|k| *k != view.baseline.optimizer.kind && *k != from.optimizer.kind)
                    .collect();
                let kind = *kinds.choose(rng)?;
                set_kind(o, kind, rng);
                o.learning_rate = *LEARNING_RATES.choose(rng)?;
                Some((alloc::format!("switch to {kind} at lr {:?}", o.learning_rate), c))
            }
            Category::Exploit if view.loss_ceiling.is_some() && c.training.epochs >= 5 => {
                let e = c.training.epochs;
                let lo = libm::ceil(e as f64 * (1.0 - self.policy.exploit_step)) as u32;
                c.training.epochs = rng.random_range(lo..e);
                Some((alloc::format!("trim epochs {e} -> {}", c.training.epochs), c))
            }
            Category::Exploit => {
                let step = self.policy.exploit_step;
                let mut fields = vec!["learning_rate"];
                if o.momentum.is_some_and(|m| m > 0.0) {
                    fields.push("momentum");
                }
                if o.decay.is_some() {
                    fields.push("decay");
                }
                if view.loss_ceiling.is_none() {
                    if c.training.epochs >= 5 {
                        fields.push("epochs");
                    }
                    if c.training.batch_size >= 5 {
                        fields.push("batch_size");
                    }
                }
                let field = *fields.choose(rng)?;
                let f = rng.random_range(1.0 - step..=1.0 + step);
                match field {
                    "learning_rate" => o.learning_rate *= f,
                    "momentum" => o.momentum = o.momentum.map(|m| (m * f).min(0.99)),
                    "decay" => o.decay = o.decay.map(|d| (d * f).min(1.0)),
                    "epochs" => c.training.epochs = scale_int(c.training.epochs, f, step),
                    _ => c.training.batch_size = scale_int(c.training.batch_size, f, step),
                }
                Some((alloc::format!("scale {field} by {f:.3}"), c))
            }
            Category::Innovate => {
                if view.loss_ceiling.is_some() {
                    let div = *[2u32, 4].choose(rng)?;
                    c.training.epochs = (c.training.epochs / div).max(1);
                    if rng.random_bool(0.3) {
                        c.training.batch_size = *[32u32, 64, 128].choose(rng)?;
                    }
                    return Some((alloc::format!("cut epochs to {}", c.training.epochs), c));
                }
                let f = *[0.1, 1.0 / 3.0, 3.0, 10.0].choose(rng)?;
                o.learning_rate *= f;
                if o.momentum.is_some() && rng.random_bool(0.5) {
                    o.momentum = Some(*MOMENTA.choose(rng)?);
                }
                if rng.random_bool(0.3) {
                    c.training.batch_size = if rng.random_bool(0.5) {
                        (c.training.batch_size / 2).max(1)
                    } else {
                        c.training.batch_size * 2
                    };
                }
                Some((alloc::format!("jump lr by x{f:.2}"), c))
            }
        }
    }

    fn mutate_architecture(&self, cat: Category, from: &Config, rng: &mut Rng) -> Option<(String, Config)> {
        let mut c = from.clone();
        let blocks = &mut c.architecture.blocks;
        let why = match cat {
            Category::Explore => {
                let slots: Vec<usize> = (0..blocks.len()).filter(|i| blocks[*i] != Block::LayerNorm).collect();
                let i = *slots.choose(rng)?;
                let nonlinear = &Activation::ALL[1..];
                blocks[i] = match blocks[i] {
                    Block::Dense { units, activation } if rng.random_bool(0.5) => {
                        let act = *nonlinear.iter().filter(|a| **a != activation).collect::<Vec<_>>().choose(rng)?;
                        Block::Dense { units, activation: *act }
                    }
                    Block::Dense { .. } => Block::GluGate {
                        units: *[8u32, 16].choose(rng)?,
                    },
                    _ => Block::Dense {
                        units: *[16u32, 32].choose(rng)?,
                        activation: *nonlinear.choose(rng)?,
                    },
                };
                alloc::format!("swap block {i} for a different family")
            }
            Category::Exploit => {
                let slots: Vec<usize> = (0..blocks.len())
                    .filter(|i| matches!(blocks[*i], Block::Dense { units, .. } | Block::GluGate { units } if units >= 5))
                    .collect();
                let i = *slots.choose(rng)?;
                let step = self.policy.exploit_step;
                let f = rng.random_range(1.0 - step..=1.0 + step);
                match &mut blocks[i] {
                    Block::Dense { units, .. } | Block::GluGate { units } => *units = scale_int(*units, f, step),
                    Block::LayerNorm => {}
                }
                alloc::format!("resize block {i} by {f:.3}")
            }
            Category::Innovate => {
                let max = self.policy.max_blocks as usize;
                let choice = rng.random_range(0..3);
                if choice == 0 && blocks.len() < max {
                    let b = *[
                        Block::LayerNorm,
                        Block::GluGate { units: 8 },
                        Block::Dense { units: 8, activation: Activation::Gelu },
                    ]
                    .choose(rng)?;
                    let at = rng.random_range(0..=blocks.len());
                    blocks.insert(at, b);
                    alloc::format!("insert a block at {at}")
                } else if choice == 1 && blocks.len() > 1 {
                    let at = rng.random_range(0..blocks.len());
                    blocks.remove(at);
                    alloc::format!("drop block {at}")
                } else {
                    let n = rng.random_range(1..=2.min(max));
                    blocks.clear();
                    for _ in 0..n {
                        blocks.push(random_block(rng, self.policy.max_units)?);
                    }
                    "rebuild the stack".to_string()
                }
            }
        };
        let max_units = self.policy.max_units;
        let ok = c.architecture.blocks.iter().all(|b| match b {
            Block::Dense { units, .. } | Block::GluGate { units } => *units >= 1 && *units <= max_units,
            Block::LayerNorm => true,
        }) && c.architecture.blocks.iter().any(|b| *b != Block::LayerNorm);
        ok.then_some((why, c))
    }

    fn mutate_reward(&self, cat: Category, from: &Config, rng: &mut Rng) -> Option<(String, Config)> {
        let inputs: Vec<_> = REWARD_INPUTS
            .iter()
            .filter(|(s, _)| !self.policy.excluded_signals.contains(s))
            .copied()
            .collect();
        let mut w: Vec<f64> = inputs.iter().map(|(s, _)| from.reward.weight(*s)).collect();
        let ladder = [0.25, 0.5, 0.75, 1.0];
        let why = match cat {
            Category::Explore => {
                let absent: Vec<usize> = (0..w.len()).filter(|i| w[*i] == 0.0).collect();
                let present: Vec<usize> = (0..w.len()).filter(|i| w[*i] != 0.0).collect();
                if !absent.is_empty() && (present.len() < 2 || rng.random_bool(0.7)) {
                    let i = *absent.choose(rng)?;
                    let top = w.iter().copied().fold(0.0, f64::max).max(0.25);
                    w[i] = top * ladder.choose(rng)?;
                    alloc::format!("add {}", inputs[i].0)
                } else {
                    let i = *present.choose(rng)?;
                    w[i] = 0.0;
                    alloc::format!("drop {}", inputs[i].0)
                }
            }
            Category::Exploit => {
                let present: Vec<usize> = (0..w.len()).filter(|i| w[*i] != 0.0).collect();
                let i = *present.choose(rng)?;
                let step = self.policy.exploit_step;
                let f = rng.random_range(1.0 - step..=1.0 + step);
                w[i] *= f;
                alloc::format!("scale {} weight by {f:.3}", inputs[i].0)
            }
            Category::Innovate => {
                for x in w.iter_mut() {
                    *x = *[0.0, 0.25, 0.5, 0.75, 1.0].choose(rng)?;
                }
                "redraw every weight".to_string()
            }
        };
        if w.iter().all(|x| *x == 0.0) {
            return None;
        }
        let mut terms: Vec<RewardTerm> = from
            .reward
            .terms()
            .iter()
            .filter(|t| !inputs.iter().any(|(s, _)| *s == t.signal))
            .copied()
            .collect();
        for ((signal, transform), weight) in inputs.iter().zip(&w) {
            if *weight != 0.0 {
                let transform = from.reward.term(*signal).map_or(*transform, |t| t.transform);
                terms.push(RewardTerm {
                    signal: *signal,
                    weight: round_weight(*weight),
                    transform,
                });
            }
        }
        let mut c = from.clone();
        c.reward = RewardSpec::new(terms);
        Some((why, c))
    }
}

/// Four significant digits keep rendered diffs short.
fn round_weight(w: f64) -> f64 {
    libm::round(w * 1e4) / 1e4
}

/// Integer scaled by `f`, then pulled back inside the allowed step.
fn scale_int(v: u32, f: f64, step: f64) -> u32 {
    let lo = libm::ceil(v as f64 * (1.0 - step)) as u32;
    let hi = libm::floor(v as f64 * (1.0 + step)) as u32;
    (libm::round(v as f64 * f) as u32).clamp(lo.max(1), hi.max(1))
}

fn set_kind(o: &mut crate::config::OptimizerSpec, kind: OptimizerKind, rng: &mut Rng) {
    o.kind = kind;
    let m = *MOMENTA.choose(rng).unwrap_or(&0.0);
    o.momentum = matches!(kind, OptimizerKind::Sgd | OptimizerKind::Rmsprop | OptimizerKind::Adam).then_some(m);
    o.decay = (kind == OptimizerKind::Rmsprop).then(|| *DECAYS.choose(rng).unwrap_or(&0.9));
    o.epsilon = (kind != OptimizerKind::Sgd).then_some(o.epsilon.unwrap_or(ADAPTIVE_EPSILON));
}

fn random_block(rng: &mut Rng, max_units: u32) -> Option<Block> {
    let units = *[8u32, 16, 32].iter().filter(|u| **u <= max_units).collect::<Vec<_>>().choose(rng)?;
    Some(if rng.random_bool(0.5) {
        Block::GluGate { units: *units }
    } else {
        Block::Dense {
            units: *units,
            activation: *Activation::ALL[1..].choose(rng)?,
        }
    })
}

/// Inverse-distance k-nearest-neighbour regressor over visible records.
struct Surrogate {
    points: Vec<(Vec<f64>, f64)>,
    k: usize,
}

impl Surrogate {
    fn fit(view: &PromptView, k: usize) -> Self {
        let kind = view.kind();
        let finite: Vec<f64> = view.records.iter().map(|r| r.value).filter(|v| v.is_finite()).collect();
        let points = view
            .records
            .iter()
            .filter_map(|r| {
                let t = match kind {
                    ScoreKind::ProxyLoss if r.value.is_finite() => libm::log(r.value.max(1e-12)),
                    ScoreKind::ProxyLoss => {
                        let worst = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                        if !worst.is_finite() {
                            return None;
                        }
                        libm::log(worst.max(1e-12)) + 2.0
                    }
                    ScoreKind::Correlation if r.value.is_finite() => r.value,
                    ScoreKind::Correlation => finite.iter().copied().fold(f64::INFINITY, f64::min) - 0.1,
                };
                t.is_finite().then(|| (features(view.persona, &r.config), t))
            })
            .collect();
        Self { points, k: k.max(1) }
    }

    /// Lower is better for every kind.
    fn predict(&self, kind: ScoreKind, x: &[f64]) -> Option<f64> {
        if self.points.len() < 2 {
            return None;
        }
        let mut d: Vec<(f64, f64)> = self
            .points
            .iter()
            .map(|(p, t)| (p.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(), *t))
            .collect();
        d.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (mut num, mut den) = (0.0, 0.0);
        for (dist, t) in d.iter().take(self.k) {
            let w = 1.0 / (libm::sqrt(*dist) + 1e-6);
            num += w * t;
            den += w;
        }
        let mean = num / den;
        Some(if kind == ScoreKind::ProxyLoss { mean } else { -mean })
    }

    /// Index of the preferred candidate; the first one when the surrogate
    /// has too little data.
    fn pick(&self, view: &PromptView, cands: &[(String, Config)]) -> Option<usize> {
        if cands.is_empty() {
            return None;
        }
        let kind = view.kind();
        let preds: Vec<Option<f64>> = cands
            .iter()
            .map(|(_, c)| self.predict(kind, &features(view.persona, c)))
            .collect();
        if preds.iter().any(Option::is_none) {
            return Some(0);
        }
        let key = |i: usize| -> (bool, f64, f64) {
            let p = preds[i].unwrap();
            match view.loss_ceiling {
                Some(ceil) => {
                    let c = &cands[i].1;
                    let cost = c.training.epochs as f64;
                    (libm::exp(p) > ceil, cost, p)
                }
                None => (false, 0.0, p),
            }
        };
        (0..cands.len()).min_by(|a, b| {
            let (ka, kb) = (key(*a), key(*b));
            ka.0.cmp(&kb.0)
                .then(ka.1.total_cmp(&kb.1))
                .then(ka.2.total_cmp(&kb.2))
                .then(Ordering::Equal)
        })
    }
}

fn features(persona: PersonaKind, c: &Config) -> Vec<f64> {
    match persona {
        PersonaKind::Optimizer => {
            let o = &c.optimizer;
            let mut v: Vec<f64> = OptimizerKind::ALL.iter().map(|k| (*k == o.kind) as u8 as f64).collect();
            v.push(libm::log10(o.learning_rate));
            v.push(o.momentum.unwrap_or(0.0));
            v.push(o.decay.unwrap_or(0.0));
            v.push(libm::log2(c.training.batch_size as f64) / 4.0);
            v.push(libm::log2(c.training.epochs as f64) / 2.0);
            v
        }
        PersonaKind::Architecture => {
            let b = &c.architecture.blocks;
            let count = |f: fn(&Block) -> bool| b.iter().filter(|x| f(x)).count() as f64;
            let units: u32 = b
                .iter()
                .map(|x| match x {
                    Block::Dense { units, .. } | Block::GluGate { units } => *units,
                    Block::LayerNorm => 0,
                })
                .sum();
            let mut v = vec![
                2.0 * c.architecture.has_gate() as u8 as f64,
                count(|x| matches!(x, Block::GluGate { .. })),
                count(|x| matches!(x, Block::Dense { .. })),
                count(|x| *x == Block::LayerNorm),
                libm::log2(units as f64 + 1.0) / 3.0,
            ];
            let first_act = b.iter().find_map(|x| match x {
                Block::Dense { activation, .. } => Some(*activation),
                _ => None,
            });
            v.extend(Activation::ALL.iter().map(|a| (Some(*a) == first_act) as u8 as f64));
            v
        }
        PersonaKind::Reward => {
            let total: f64 = REWARD_INPUTS.iter().map(|(s, _)| c.reward.weight(*s).abs()).sum();
            REWARD_INPUTS
                .iter()
                .map(|(s, _)| 2.0 * c.reward.weight(*s).abs() / total.max(1e-12))
                .collect()
        }
    }
}

#[derive(Serialize)]
struct WireProposal<'a> {
    explanation: &'a str,
    diff: &'a Diff,
}

impl Provider for HeuristicProvider {
    fn provenance(&self) -> Provenance {
        Provenance::Heuristic
    }

    fn request(&mut self, prompt: &str, n: usize, seed: u64) -> Result<String, ProviderError> {
        let view = PromptView::parse(prompt).map_err(ProviderError::Prompt)?;
        let props = self.generate(&view, n, seed);
        let diffs: Vec<(String, Diff)> = props
            .into_iter()
            .map(|(_, why, c)| (why, diff_configs(&view.baseline, &c)))
            .collect();
        let wire: Vec<WireProposal<'_>> = diffs
            .iter()
            .map(|(why, d)| WireProposal {
                explanation: why,
                diff: d,
            })
            .collect();
        serde_json::to_string_pretty(&wire).map_err(|e| ProviderError::Prompt(e.to_string()))
    }
}
