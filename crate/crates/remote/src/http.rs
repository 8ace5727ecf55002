use std::time::Duration;

use serde::Serialize;
use thiserror::Error;

pub const DEFAULT_ATTEMPTS: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct HttpConfig {
    pub endpoint: String,
    pub api_key: Option<String>,
    pub timeout: Duration,
    /// Total attempts per request, including the first.
    pub max_attempts: usize,
    /// Delay before the first retry; doubled for each further retry.
    pub backoff: Duration,
}

impl HttpConfig {
    pub fn new(endpoint: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            api_key: None,
            timeout: Duration::from_secs(600),
            max_attempts: DEFAULT_ATTEMPTS,
            backoff: Duration::from_millis(500),
        }
    }

    /// Reads `{prefix}_ENDPOINT_URL`, `{prefix}_API_KEY` and, when
    /// `timeout_var` is given, a timeout in seconds.
    pub(crate) fn from_env(prefix: &str, timeout_var: Option<&str>) -> Result<Self, String> {
        let url_var = format!("{prefix}_ENDPOINT_URL");
        let endpoint = std::env::var(&url_var).map_err(|_| format!("{url_var} is not set"))?;
        let mut cfg = Self::new(endpoint);
        cfg.api_key = std::env::var(format!("{prefix}_API_KEY"))
            .ok()
            .filter(|k| !k.is_empty());
        if let Some(var) = timeout_var {
            if let Ok(raw) = std::env::var(var) {
                let secs: u64 = raw
                    .trim()
                    .parse()
                    .map_err(|_| format!("{var} must be whole seconds"))?;
                cfg.timeout = Duration::from_secs(secs);
            }
        }
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CallError {
    #[error("HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("{0}")]
    Transport(String),
    #[error("timed out after {0} s")]
    Timeout(u64),
}

fn retryable(e: &CallError) -> bool {
    match e {
        CallError::Status { status, .. } => *status >= 500 || *status == 429,
        CallError::Transport(_) | CallError::Timeout(_) => true,
    }
}

pub(crate) struct Client {
    pub cfg: HttpConfig,
    agent: ureq::Agent,
}

impl Client {
    pub fn new(cfg: HttpConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(cfg.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self { cfg, agent }
    }

    fn attempt(&self, body: &impl Serialize) -> Result<String, CallError> {
        let mut req = self.agent.post(&self.cfg.endpoint);
        if let Some(key) = &self.cfg.api_key {
            req = req.header("Authorization", format!("Bearer {key}"));
        }
        let mut resp = req.send_json(body).map_err(|e| self.classify(e))?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| self.classify(e))?;
        if (200..300).contains(&status) {
            Ok(text)
        } else {
            Err(CallError::Status { status, body: text })
        }
    }

    fn classify(&self, e: ureq::Error) -> CallError {
        match e {
            ureq::Error::Timeout(_) => CallError::Timeout(self.cfg.timeout.as_secs()),
            other => CallError::Transport(other.to_string()),
        }
    }

    /// Posts `body` and returns the response text of the first 2xx reply.
    pub fn post_json(&self, body: &impl Serialize) -> Result<String, CallError> {
        let mut delay = self.cfg.backoff;
        let mut attempt = 1;
        loop {
            match self.attempt(body) {
                Ok(text) => return Ok(text),
                Err(e) if retryable(&e) && attempt < self.cfg.max_attempts.max(1) => {
                    std::thread::sleep(delay);
                    delay *= 2;
                    attempt += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }
}
