use std::path::PathBuf;
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{CompletionRequest, GatewayError};
use crate::session::AgentRole;

/// Name of the environment variable holding the HTTP bearer token, unless
/// the config names another.
pub const DEFAULT_API_KEY_ENV: &str = "REFEVO_API_KEY";

/// Text completion backend. Implementations must tolerate two concurrent
/// in-flight requests.
pub trait Provider: Send + Sync {
    fn complete(&self, req: &CompletionRequest) -> Result<String, GatewayError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    Mock,
    Http,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub backoff_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 3,
            backoff_ms: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProviderConfig {
    pub kind: ProviderKind,
    #[serde(default)]
    pub endpoint: Option<String>,
    #[serde(default)]
    pub model_name: Option<String>,
    #[serde(default)]
    pub script_path: Option<PathBuf>,
    #[serde(default)]
    pub retry: RetryPolicy,
    /// Name (not value) of the variable carrying the bearer token.
    #[serde(default = "default_api_key_env")]
    pub api_key_env: String,
    #[serde(default = "default_request_timeout")]
    pub request_timeout_s: u64,
}

fn default_api_key_env() -> String {
    DEFAULT_API_KEY_ENV.to_owned()
}

fn default_request_timeout() -> u64 {
    120
}

impl ProviderConfig {
    pub fn mock(script_path: impl Into<PathBuf>) -> Self {
        ProviderConfig {
            kind: ProviderKind::Mock,
            endpoint: None,
            model_name: None,
            script_path: Some(script_path.into()),
            retry: RetryPolicy::default(),
            api_key_env: default_api_key_env(),
            request_timeout_s: default_request_timeout(),
        }
    }

    pub fn http(endpoint: impl Into<String>, model_name: impl Into<String>) -> Self {
        ProviderConfig {
            kind: ProviderKind::Http,
            endpoint: Some(endpoint.into()),
            model_name: Some(model_name.into()),
            script_path: None,
            retry: RetryPolicy::default(),
            api_key_env: default_api_key_env(),
            request_timeout_s: default_request_timeout(),
        }
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        let bad = |m: &str| Err(GatewayError::InvalidConfig(m.to_owned()));
        match self.kind {
            ProviderKind::Mock if self.script_path.is_none() => return bad("mock provider needs script_path"),
            ProviderKind::Http if self.endpoint.is_none() || self.model_name.is_none() => {
                return bad("http provider needs endpoint and model_name")
            }
            _ => {}
        }
        if self.retry.max_attempts == 0 {
            return bad("retry.max_attempts must be at least 1");
        }
        Ok(())
    }
}

/// Builds the provider described by `cfg`; the mock script is read here.
pub fn build_provider(cfg: &ProviderConfig) -> Result<Box<dyn Provider>, GatewayError> {
    cfg.validate()?;
    match cfg.kind {
        ProviderKind::Mock => {
            let path = cfg.script_path.as_ref().expect("validated");
            let text = std::fs::read_to_string(path)
                .map_err(|e| GatewayError::InvalidConfig(format!("cannot read script {}: {e}", path.display())))?;
            Ok(Box::new(MockProvider::from_json(&text)?))
        }
        ProviderKind::Http => Ok(Box::new(HttpProvider::new(cfg.clone())?)),
    }
}

/// One scripted reply.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptEntry {
    pub role: AgentRole,
    pub response: String,
    /// Only eligible when this substring occurs in the request evidence (or
    /// the prompt when the request carries no evidence).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub when: Option<String>,
    /// Never consumed: answers every later matching request.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub repeat: bool,
}

impl ScriptEntry {
    pub fn new(role: AgentRole, response: impl Into<String>) -> Self {
        ScriptEntry {
            role,
            response: response.into(),
            when: None,
            repeat: false,
        }
    }

    pub fn when(mut self, needle: impl Into<String>) -> Self {
        self.when = Some(needle.into());
        self
    }

    pub fn repeating(mut self) -> Self {
        self.repeat = true;
        self
    }
}

#[derive(Debug, Default)]
struct MockState {
    consumed: Vec<bool>,
    requests: Vec<CompletionRequest>,
}

/// Deterministic provider replaying a script. For each request the first
/// unconsumed entry of the request's role whose condition holds answers it.
#[derive(Debug)]
pub struct MockProvider {
    script: Vec<ScriptEntry>,
    state: Mutex<MockState>,
}

impl MockProvider {
    pub fn new(script: Vec<ScriptEntry>) -> Self {
        let consumed = vec![false; script.len()];
        MockProvider {
            script,
            state: Mutex::new(MockState {
                consumed,
                requests: Vec::new(),
            }),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, GatewayError> {
        let script: Vec<ScriptEntry> =
            serde_json::from_str(text).map_err(|e| GatewayError::InvalidConfig(format!("mock script: {e}")))?;
        Ok(Self::new(script))
    }

    /// Requests received so far, in arrival order.
    pub fn requests(&self) -> Vec<CompletionRequest> {
        self.state.lock().expect("mock state").requests.clone()
    }

    pub fn remaining(&self, role: AgentRole) -> usize {
        let st = self.state.lock().expect("mock state");
        self.script
            .iter()
            .zip(&st.consumed)
            .filter(|(e, used)| e.role == role && !**used)
            .count()
    }
}

impl Provider for MockProvider {
    fn complete(&self, req: &CompletionRequest) -> Result<String, GatewayError> {
        req.validate()?;
        let mut st = self.state.lock().expect("mock state");
        st.requests.push(req.clone());
        let haystack = req.evidence.as_deref().unwrap_or(&req.prompt);
        let hit = self.script.iter().enumerate().position(|(i, e)| {
            e.role == req.role && !st.consumed[i] && e.when.as_deref().is_none_or(|w| haystack.contains(w))
        });
        let Some(i) = hit else {
            return Err(GatewayError::ScriptExhausted { role: req.role });
        };
        if !self.script[i].repeat {
            st.consumed[i] = true;
        }
        Ok(self.script[i].response.clone())
    }
}

/// Chat-completion client: posts `{model, messages, max_tokens, temperature}`
/// and returns `choices[0].message.content`.
pub struct HttpProvider {
    cfg: ProviderConfig,
    agent: ureq::Agent,
}

impl std::fmt::Debug for HttpProvider {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpProvider").field("cfg", &self.cfg).finish_non_exhaustive()
    }
}

enum Attempt {
    Done(String),
    Retry(String),
    Fatal(GatewayError),
}

impl HttpProvider {
    pub fn new(cfg: ProviderConfig) -> Result<Self, GatewayError> {
        cfg.validate()?;
        if cfg.kind != ProviderKind::Http {
            return Err(GatewayError::InvalidConfig("not an http provider config".into()));
        }
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(cfg.request_timeout_s)))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(HttpProvider { cfg, agent })
    }

    fn attempt(&self, body: &Value) -> Attempt {
        let endpoint = self.cfg.endpoint.as_deref().expect("validated");
        let mut request = self.agent.post(endpoint).header("Content-Type", "application/json");
        if let Ok(key) = std::env::var(&self.cfg.api_key_env) {
            request = request.header("Authorization", format!("Bearer {key}"));
        }
        let mut response = match request.send_json(body) {
            Ok(r) => r,
            Err(e) => return Attempt::Retry(e.to_string()),
        };
        let status = response.status().as_u16();
        if status >= 500 || status == 429 {
            return Attempt::Retry(format!("HTTP {status}"));
        }
        if status >= 400 {
            let detail = response.body_mut().read_to_string().unwrap_or_default();
            return Attempt::Fatal(GatewayError::TransportError {
                attempts: 1,
                message: format!("HTTP {status}: {}", truncate(&detail, 200)),
            });
        }
        let json: Value = match response.body_mut().read_json() {
            Ok(v) => v,
            Err(e) => return Attempt::Fatal(GatewayError::MalformedProviderResponse(e.to_string())),
        };
        match json.pointer("/choices/0/message/content").and_then(Value::as_str) {
            Some(text) => Attempt::Done(text.to_owned()),
            None => Attempt::Fatal(GatewayError::MalformedProviderResponse(
                "missing choices[0].message.content".into(),
            )),
        }
    }
}

fn truncate(s: &str, max: usize) -> &str {
    match s.char_indices().nth(max) {
        Some((i, _)) => &s[..i],
        None => s,
    }
}

impl Provider for HttpProvider {
    fn complete(&self, req: &CompletionRequest) -> Result<String, GatewayError> {
        req.validate()?;
        let body = json!({
            "model": self.cfg.model_name,
            "messages": [{"role": "user", "content": req.prompt}],
            "max_tokens": req.max_output_tokens,
            "temperature": req.temperature_hint,
        });
        let max = self.cfg.retry.max_attempts;
        let mut last = String::new();
        for attempt in 1..=max {
            match self.attempt(&body) {
                Attempt::Done(text) => return Ok(text),
                Attempt::Fatal(GatewayError::TransportError { message, .. }) => {
                    return Err(GatewayError::TransportError {
                        attempts: attempt,
                        message,
                    })
                }
                Attempt::Fatal(e) => return Err(e),
                Attempt::Retry(msg) => last = msg,
            }
            if attempt < max {
                let backoff = self.cfg.retry.backoff_ms.saturating_mul(1 << (attempt - 1).min(16));
                std::thread::sleep(Duration::from_millis(backoff));
            }
        }
        Err(GatewayError::TransportError {
            attempts: max,
            message: last,
        })
    }
}
