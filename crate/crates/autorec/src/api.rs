//! Commands against the outer loop, shared by the HTTP routes and the CLI so
//! both surfaces expose the same operations with the same results.

use std::path::Path;

use autorec_core::offline::TrialManifest;
use autorec_core::online::{OnlineError, Orchestrator, OuterLoopConfig, Trial, TrialEnv};
use autorec_core::persona::PersonaKind;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::store::{StateStore, StoreError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CommandKind {
    ListTrials,
    GetTrial,
    SubmitTrial,
    AbortTrial,
    ReorderQueue,
    ShowJournal,
    AddSteering,
    ShowSteering,
    ExperimentMetrics,
}

impl CommandKind {
    pub const ALL: [CommandKind; 9] = [
        Self::ListTrials,
        Self::GetTrial,
        Self::SubmitTrial,
        Self::AbortTrial,
        Self::ReorderQueue,
        Self::ShowJournal,
        Self::AddSteering,
        Self::ShowSteering,
        Self::ExperimentMetrics,
    ];

    pub fn is_mutation(self) -> bool {
        matches!(self, Self::SubmitTrial | Self::AbortTrial | Self::ReorderQueue | Self::AddSteering)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    ListTrials,
    GetTrial(u64),
    SubmitTrial(TrialManifest),
    AbortTrial { id: u64, reason: String },
    ReorderQueue(Vec<u64>),
    ShowJournal,
    AddSteering { persona: PersonaKind, text: String },
    ShowSteering(PersonaKind),
    ExperimentMetrics(u64),
}

impl Command {
    pub fn kind(&self) -> CommandKind {
        match self {
            Self::ListTrials => CommandKind::ListTrials,
            Self::GetTrial(_) => CommandKind::GetTrial,
            Self::SubmitTrial(_) => CommandKind::SubmitTrial,
            Self::AbortTrial { .. } => CommandKind::AbortTrial,
            Self::ReorderQueue(_) => CommandKind::ReorderQueue,
            Self::ShowJournal => CommandKind::ShowJournal,
            Self::AddSteering { .. } => CommandKind::AddSteering,
            Self::ShowSteering(_) => CommandKind::ShowSteering,
            Self::ExperimentMetrics(_) => CommandKind::ExperimentMetrics,
        }
    }

    /// The HTTP request that performs this command: method, path and body.
    pub fn to_request(&self) -> (&'static str, String, Option<Value>) {
        match self {
            Self::ListTrials => ("GET", "/trials".into(), None),
            Self::GetTrial(id) => ("GET", format!("/trials/{id}"), None),
            Self::SubmitTrial(m) => ("POST", "/trials".into(), Some(serde_json::to_value(m).expect("serializable"))),
            Self::AbortTrial { id, reason } => ("POST", format!("/trials/{id}/abort"), Some(json!({ "reason": reason }))),
            Self::ReorderQueue(order) => ("POST", "/queue/reorder".into(), Some(json!({ "order": order }))),
            Self::ShowJournal => ("GET", "/journal".into(), None),
            Self::AddSteering { persona, text } => {
                ("POST", "/steering".into(), Some(json!({ "persona": persona, "text": text })))
            }
            Self::ShowSteering(p) => ("GET", format!("/steering/{p}"), None),
            Self::ExperimentMetrics(id) => ("GET", format!("/experiments/{id}/metrics"), None),
        }
    }
}

/// Sends commands to a running service instead of opening its state.
pub struct RemoteClient {
    base: String,
    token: Option<String>,
    agent: ureq::Agent,
}

impl RemoteClient {
    pub fn new(base: &str, token: Option<String>) -> Self {
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(std::time::Duration::from_secs(30)))
            .build()
            .into();
        Self {
            base: base.trim_end_matches('/').into(),
            token,
            agent,
        }
    }

    pub fn execute(&self, cmd: &Command) -> Result<Value, ApiError> {
        let (method, path, body) = cmd.to_request();
        let url = format!("{}{path}", self.base);
        let auth = self.token.as_ref().map(|t| format!("Bearer {t}"));
        let sent = if method == "GET" {
            let mut req = self.agent.get(&url);
            if let Some(a) = &auth {
                req = req.header("Authorization", a);
            }
            req.call()
        } else {
            let mut req = self.agent.post(&url);
            if let Some(a) = &auth {
                req = req.header("Authorization", a);
            }
            req.send_json(body.unwrap_or(Value::Null))
        };
        let mut resp = sent.map_err(|e| ApiError::new(502, "unreachable", format!("{url}: {e}")))?;
        let status = resp.status().as_u16();
        let value: Value = resp
            .body_mut()
            .read_json()
            .map_err(|e| ApiError::new(502, "bad_response", format!("{url}: {e}")))?;
        if (200..300).contains(&status) {
            Ok(value)
        } else {
            let mut err: ApiError = serde_json::from_value(value)
                .map_err(|e| ApiError::new(502, "bad_response", format!("{url}: {e}")))?;
            err.status = status;
            Err(err)
        }
    }
}

/// Request bodies of the mutating routes.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AbortBody {
    #[serde(default)]
    pub reason: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReorderBody {
    pub order: Vec<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SteeringBody {
    pub persona: PersonaKind,
    pub text: String,
}

/// Error body `{code, message}` plus the HTTP status it maps to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: u16,
    pub code: String,
    pub message: String,
}

impl ApiError {
    pub fn new(status: u16, code: &str, message: impl Into<String>) -> Self {
        Self {
            status,
            code: code.into(),
            message: message.into(),
        }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(400, "bad_request", message)
    }
}

impl std::fmt::Display for ApiError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.code, self.message)
    }
}

impl std::error::Error for ApiError {}

impl From<OnlineError> for ApiError {
    fn from(e: OnlineError) -> Self {
        let (status, code) = match &e {
            OnlineError::MalformedManifest(_) => (400, "malformed_manifest"),
            OnlineError::NotPermutation => (409, "not_permutation"),
            OnlineError::UnknownTrial(_) => (404, "not_found"),
            OnlineError::NotTerminal(_) => (409, "not_terminal"),
            OnlineError::AlreadyFinalized(_) => (409, "already_finalized"),
            OnlineError::AlreadyTerminal { .. } => (409, "already_terminal"),
            OnlineError::IllegalTransition { .. } => (409, "illegal_transition"),
            OnlineError::Replay(_) => (500, "replay"),
        };
        Self::new(status, code, e.to_string())
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::Locked(_) => Self::new(409, "locked", e.to_string()),
            _ => Self::new(500, "storage", e.to_string()),
        }
    }
}

pub fn parse_body<T: for<'de> Deserialize<'de>>(bytes: &[u8]) -> Result<T, ApiError> {
    serde_json::from_slice(bytes).map_err(|e| ApiError::bad_request(e.to_string()))
}

/// A trial as shown to operators: the simulator's ground truth is withheld
/// and the queue position is added.
pub fn trial_view(t: &Trial, queue: &[u64]) -> Value {
    let mut v = serde_json::to_value(t).expect("serializable");
    if let Some(exp) = v.get_mut("experiment").and_then(Value::as_object_mut) {
        exp.remove("truth");
    }
    v["queue_position"] = json!(queue.iter().position(|&q| q == t.id));
    v
}

/// Applies one command to the orchestrator.
pub fn execute(o: &mut Orchestrator, cmd: Command) -> Result<Value, ApiError> {
    Ok(match cmd {
        Command::ListTrials => {
            let queue = o.queue();
            Value::Array(o.trials().map(|t| trial_view(t, queue)).collect())
        }
        Command::GetTrial(id) => {
            let t = o.trial(id).ok_or(OnlineError::UnknownTrial(id))?;
            trial_view(t, o.queue())
        }
        Command::SubmitTrial(m) => {
            let id = o.submit_proposal(m)?;
            json!({ "id": id, "phase": o.trial(id).unwrap().phase })
        }
        Command::AbortTrial { id, reason } => {
            let reason = if reason.is_empty() { "aborted by operator".to_string() } else { reason };
            let phase = o.abort(id, &reason)?;
            json!({ "id": id, "phase": phase })
        }
        Command::ReorderQueue(order) => json!({ "queue": o.reorder_queue(order)? }),
        Command::ShowJournal => serde_json::to_value(o.journal().records()).expect("serializable"),
        Command::AddSteering { persona, text } => {
            if text.trim().is_empty() {
                return Err(ApiError::bad_request("steering text is empty"));
            }
            o.add_steering(persona, text)?;
            json!({ "persona": persona, "steering": o.steering(persona) })
        }
        Command::ShowSteering(persona) => json!({ "persona": persona, "steering": o.steering(persona) }),
        Command::ExperimentMetrics(id) => serde_json::to_value(
            o.experiment_metrics(id)
                .ok_or_else(|| ApiError::new(404, "not_found", format!("no experiment {id}")))?,
        )
        .expect("serializable"),
    })
}

/// An orchestrator with optional durable storage. Every mutation is
/// persisted before its result is returned.
pub struct Service {
    pub orch: Orchestrator,
    pub store: Option<StateStore>,
}

impl Service {
    pub fn in_memory(config: OuterLoopConfig) -> Self {
        Self {
            orch: Orchestrator::new(config),
            store: None,
        }
    }

    pub fn open(dir: &Path, config: Option<OuterLoopConfig>) -> Result<Self, StoreError> {
        let (store, orch) = StateStore::open(dir, config)?;
        Ok(Self {
            orch,
            store: Some(store),
        })
    }

    fn persist(&mut self) -> Result<(), ApiError> {
        match &mut self.store {
            Some(s) => Ok(s.persist(&mut self.orch)?),
            None => {
                self.orch.take_events();
                Ok(())
            }
        }
    }

    pub fn execute(&mut self, cmd: Command) -> Result<Value, ApiError> {
        let out = execute(&mut self.orch, cmd);
        self.persist()?;
        out
    }

    pub fn tick(&mut self, env: &dyn TrialEnv) -> Result<(), ApiError> {
        let out = self.orch.tick(env).map_err(ApiError::from);
        self.persist()?;
        out
    }

    /// Ticks until nothing is in flight or `max_ticks` pass.
    pub fn run_until_quiescent(&mut self, env: &dyn TrialEnv, max_ticks: u64) -> Result<u64, ApiError> {
        let mut n = 0;
        while !self.orch.is_quiescent() && n < max_ticks {
            self.tick(env)?;
            n += 1;
        }
        Ok(n)
    }
}
