//! Providers that need the outside world: an HTTP model endpoint and replay
//! files on disk.

use std::fs;
use std::path::Path;
use std::time::Duration;

use autorec_core::ablation::builtin_provider;
use autorec_core::proposer::{Provenance, Provider, ProviderConfig, ProviderError, ProviderKind, ScriptedProvider};
use serde::{Deserialize, Serialize};

/// Overrides the configured endpoint when set.
pub const ENDPOINT_ENV: &str = "AUTOREC_LLM_ENDPOINT";
/// Default name of the variable holding the bearer token.
pub const TOKEN_ENV: &str = "AUTOREC_LLM_TOKEN";

#[derive(Debug, Serialize)]
struct LlmRequest<'a> {
    prompt: &'a str,
    max_tokens: u32,
}

#[derive(Debug, Deserialize)]
struct LlmResponse {
    text: String,
}

/// Posts `{prompt, max_tokens}` and reads `{text}`. Transport failures,
/// timeouts, 429 and 5xx are retried; other statuses fail at once.
pub struct HttpLlmProvider {
    endpoint: String,
    token: Option<String>,
    max_tokens: u32,
    max_retries: u32,
    agent: ureq::Agent,
}

impl HttpLlmProvider {
    pub fn new(endpoint: impl Into<String>, token: Option<String>, max_tokens: u32, timeout: Duration, max_retries: u32) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            endpoint: endpoint.into(),
            token,
            max_tokens,
            max_retries,
            agent,
        }
    }

    fn attempt(&self, prompt: &str) -> Result<String, (bool, ProviderError)> {
        let mut req = self.agent.post(&self.endpoint);
        if let Some(t) = &self.token {
            req = req.header("Authorization", &format!("Bearer {t}"));
        }
        let body = LlmRequest {
            prompt,
            max_tokens: self.max_tokens,
        };
        let mut resp = match req.send_json(&body) {
            Ok(r) => r,
            Err(ureq::Error::Timeout(_)) => return Err((true, ProviderError::Timeout(1))),
            Err(e) => return Err((true, ProviderError::Transport(e.to_string()))),
        };
        let status = resp.status().as_u16();
        if status != 200 {
            let message = resp.body_mut().read_to_string().unwrap_or_default();
            let retry = status == 429 || status >= 500;
            return Err((retry, ProviderError::Status { status, message }));
        }
        resp.body_mut()
            .read_json::<LlmResponse>()
            .map(|r| r.text)
            .map_err(|e| (false, ProviderError::Transport(format!("bad response body: {e}"))))
    }
}

impl Provider for HttpLlmProvider {
    fn provenance(&self) -> Provenance {
        Provenance::Llm
    }

    fn request(&mut self, prompt: &str, _n: usize, _seed: u64) -> Result<String, ProviderError> {
        let attempts = self.max_retries + 1;
        let mut last = ProviderError::Timeout(attempts);
        for i in 0..attempts {
            match self.attempt(prompt) {
                Ok(text) => return Ok(text),
                Err((false, e)) => return Err(e),
                Err((true, e)) => {
                    last = match e {
                        ProviderError::Timeout(_) => ProviderError::Timeout(attempts),
                        other => other,
                    };
                    if i + 1 < attempts {
                        std::thread::sleep(Duration::from_millis(200 << i.min(5)));
                    }
                }
            }
        }
        Err(last)
    }
}

/// One raw response per line, each a JSON string.
pub fn load_replay(path: &Path) -> Result<Vec<String>, ProviderError> {
    let text = fs::read_to_string(path).map_err(|e| ProviderError::Transport(format!("{}: {e}", path.display())))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str::<String>(l)
                .map_err(|e| ProviderError::Transport(format!("{} line {}: {e}", path.display(), i + 1)))
        })
        .collect()
}

pub fn replay_lines(raws: &[String]) -> String {
    raws.iter().map(|r| serde_json::to_string(r).unwrap() + "\n").collect()
}

/// Builds any configured provider. The token is read from the environment
/// at construction and never stored in configs or artifacts.
pub fn make_provider(cfg: &ProviderConfig) -> Result<Box<dyn Provider>, ProviderError> {
    match &cfg.kind {
        ProviderKind::Heuristic { .. } => Ok(builtin_provider(cfg).expect("heuristic is built in")),
        ProviderKind::Scripted { replay_path } => Ok(Box::new(ScriptedProvider::new(load_replay(Path::new(replay_path))?))),
        ProviderKind::HttpLlm {
            endpoint,
            token_env,
            max_tokens,
        } => {
            let endpoint = std::env::var(ENDPOINT_ENV).unwrap_or_else(|_| endpoint.clone());
            if endpoint.is_empty() {
                return Err(ProviderError::Transport(format!("no endpoint configured; set {ENDPOINT_ENV}")));
            }
            Ok(Box::new(HttpLlmProvider::new(
                endpoint,
                std::env::var(token_env).ok(),
                *max_tokens,
                Duration::from_millis(cfg.timeout_ms),
                cfg.max_retries,
            )))
        }
    }
}
