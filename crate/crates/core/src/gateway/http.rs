use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{ChatBackend, ChatRequest, GatewayError, Message, RetryPolicy};

pub const ENV_ENDPOINT: &str = "COGSCREEN_ENDPOINT";
pub const ENV_API_KEY: &str = "COGSCREEN_API_KEY";
pub const ENV_MODEL: &str = "COGSCREEN_MODEL";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HttpConfig {
    /// Base URL such as `http://localhost:8000/v1`, or the full
    /// `/chat/completions` URL.
    pub endpoint: String,
    #[serde(default)]
    pub api_key: Option<String>,
    pub model: String,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
    #[serde(default = "default_max_in_flight")]
    pub max_in_flight: usize,
    #[serde(default)]
    pub retry: RetryPolicy,
}

fn default_timeout_secs() -> u64 {
    120
}

fn default_max_in_flight() -> usize {
    4
}

impl HttpConfig {
    /// Read endpoint, key and model from the environment.
    pub fn from_env() -> Result<Self, GatewayError> {
        let endpoint =
            std::env::var(ENV_ENDPOINT).map_err(|_| GatewayError::Config(format!("{ENV_ENDPOINT} is not set")))?;
        Ok(HttpConfig {
            endpoint,
            api_key: std::env::var(ENV_API_KEY).ok(),
            model: std::env::var(ENV_MODEL).unwrap_or_else(|_| "Qwen/Qwen3-8B".to_string()),
            timeout_secs: default_timeout_secs(),
            max_in_flight: default_max_in_flight(),
            retry: RetryPolicy::default(),
        })
    }

    fn url(&self) -> String {
        let base = self.endpoint.trim_end_matches('/');
        if base.ends_with("/chat/completions") {
            base.to_string()
        } else {
            format!("{base}/chat/completions")
        }
    }
}

#[derive(Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    messages: &'a [Message],
    temperature: f64,
    top_p: f64,
    max_tokens: u32,
}

#[derive(Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireMessage,
}

#[derive(Deserialize)]
struct WireMessage {
    content: Option<String>,
}

/// Counting semaphore capping concurrent in-flight requests.
struct Gate {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Gate {
    fn acquire(&self) -> GatePermit<'_> {
        let mut free = self.free.lock().expect("gate poisoned");
        while *free == 0 {
            free = self.cv.wait(free).expect("gate poisoned");
        }
        *free -= 1;
        GatePermit(self)
    }
}

struct GatePermit<'a>(&'a Gate);

impl Drop for GatePermit<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().expect("gate poisoned") += 1;
        self.0.cv.notify_one();
    }
}

/// Chat-completions client for an OpenAI-compatible server such as vLLM.
pub struct HttpBackend {
    config: HttpConfig,
    agent: ureq::Agent,
    gate: Gate,
}

impl HttpBackend {
    pub fn new(config: HttpConfig) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        let gate = Gate { free: Mutex::new(config.max_in_flight.max(1)), cv: Condvar::new() };
        HttpBackend { config, agent, gate }
    }

    pub fn config(&self) -> &HttpConfig {
        &self.config
    }

    fn send_once(&self, request: &ChatRequest) -> Result<String, GatewayError> {
        let body = WireRequest {
            model: &self.config.model,
            messages: &request.messages,
            temperature: request.temperature,
            top_p: request.top_p,
            max_tokens: request.max_tokens,
        };
        let mut call = self.agent.post(&self.config.url()).header("Content-Type", "application/json");
        if let Some(key) = &self.config.api_key {
            call = call.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = call.send_json(&body).map_err(|e| match e {
            ureq::Error::Timeout(_) => GatewayError::Timeout(Duration::from_secs(self.config.timeout_secs)),
            other => GatewayError::Transport(other.to_string()),
        })?;
        let status = resp.status().as_u16();
        let text =
            resp.body_mut().read_to_string().map_err(|e| GatewayError::Transport(format!("reading body: {e}")))?;
        match status {
            200..=299 => {}
            429 | 500..=599 => return Err(GatewayError::Transport(format!("HTTP {status}: {text}"))),
            _ => return Err(GatewayError::Protocol(format!("HTTP {status}: {text}"))),
        }
        let parsed: WireResponse =
            serde_json::from_str(&text).map_err(|e| GatewayError::Protocol(format!("response body: {e}")))?;
        parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| GatewayError::Protocol("response has no choices[0].message.content".into()))
    }
}

impl ChatBackend for HttpBackend {
    fn complete(&self, request: &ChatRequest) -> Result<String, GatewayError> {
        request.validate()?;
        let _permit = self.gate.acquire();
        self.config.retry.run(|| self.send_once(request))
    }
}
