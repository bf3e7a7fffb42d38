//! Chat-completion backends.
//!
//! A [`ChatBackend`] turns a [`ChatRequest`] into the assistant's raw text.
//! The live backend speaks the chat-completions wire format over HTTP; the
//! scripted and recording backends make every agent deterministic in tests.

mod backends;
mod http;
mod toolcall;

use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use backends::{FnBackend, RecordingBackend, ScriptedBackend};
pub use http::{HttpBackend, HttpConfig, ENV_API_KEY, ENV_ENDPOINT, ENV_MODEL};
pub use toolcall::{parse_tool_calls, BlockError, ParsedResponse, ToolCall, TOOL_CALL_CLOSE, TOOL_CALL_OPEN};

/// Examiner sampling temperature.
pub const EXAMINER_TEMPERATURE: f64 = 0.3;
/// Verifier sampling temperature.
pub const VERIFIER_TEMPERATURE: f64 = 0.1;
pub const DEFAULT_TOP_P: f64 = 0.9;
pub const DEFAULT_MAX_TOKENS: u32 = 4096;

#[derive(Debug, thiserror::Error)]
pub enum GatewayError {
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("request timed out after {0:?}")]
    Timeout(Duration),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("no scripted response for request fingerprint {0}")]
    Unscripted(String),
    #[error("backend configuration: {0}")]
    Config(String),
}

impl GatewayError {
    /// Transport failures and timeouts may succeed on another attempt.
    pub fn is_retryable(&self) -> bool {
        matches!(self, GatewayError::Transport(_) | GatewayError::Timeout(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn system(content: impl Into<String>) -> Self {
        Message { role: Role::System, content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Message { role: Role::User, content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Message { role: Role::Assistant, content: content.into() }
    }
}

/// Sampling settings for one agent role.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sampling {
    pub temperature: f64,
    pub top_p: f64,
    pub max_tokens: u32,
}

impl Sampling {
    pub fn examiner() -> Self {
        Sampling { temperature: EXAMINER_TEMPERATURE, top_p: DEFAULT_TOP_P, max_tokens: DEFAULT_MAX_TOKENS }
    }

    pub fn verifier() -> Self {
        Sampling { temperature: VERIFIER_TEMPERATURE, ..Sampling::examiner() }
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(GatewayError::InvalidRequest(format!("temperature {} outside [0, 2]", self.temperature)));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(GatewayError::InvalidRequest(format!("top_p {} outside (0, 1]", self.top_p)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub messages: Vec<Message>,
    pub temperature: f64,
    pub top_p: f64,
    pub max_tokens: u32,
}

impl ChatRequest {
    pub fn new(messages: Vec<Message>, sampling: Sampling) -> Result<Self, GatewayError> {
        let req = ChatRequest {
            messages,
            temperature: sampling.temperature,
            top_p: sampling.top_p,
            max_tokens: sampling.max_tokens,
        };
        req.validate()?;
        Ok(req)
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.messages.is_empty() {
            return Err(GatewayError::InvalidRequest("messages must be non-empty".into()));
        }
        Sampling { temperature: self.temperature, top_p: self.top_p, max_tokens: self.max_tokens }.validate()
    }

    /// Stable identity of the conversation: SHA-256 over roles and contents.
    /// Sampling parameters are excluded so scripts survive temperature
    /// changes.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for m in &self.messages {
            let role = match m.role {
                Role::System => "system",
                Role::User => "user",
                Role::Assistant => "assistant",
            };
            h.update(role.as_bytes());
            h.update([0u8]);
            h.update((m.content.len() as u64).to_le_bytes());
            h.update(m.content.as_bytes());
        }
        hex::encode(h.finalize())
    }

    pub fn system_text(&self) -> &str {
        self.messages.iter().find(|m| m.role == Role::System).map(|m| m.content.as_str()).unwrap_or("")
    }

    pub fn last_user_text(&self) -> &str {
        self.messages.iter().rev().find(|m| m.role == Role::User).map(|m| m.content.as_str()).unwrap_or("")
    }
}

/// Something that answers chat requests. Implementations are shared
/// read-only between threads.
pub trait ChatBackend: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<String, GatewayError>;
}

impl<B: ChatBackend + ?Sized> ChatBackend for std::sync::Arc<B> {
    fn complete(&self, request: &ChatRequest) -> Result<String, GatewayError> {
        (**self).complete(request)
    }
}

impl<B: ChatBackend + ?Sized> ChatBackend for &B {
    fn complete(&self, request: &ChatRequest) -> Result<String, GatewayError> {
        (**self).complete(request)
    }
}

/// Retry schedule for retryable transport errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub initial_backoff_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { max_retries: 2, initial_backoff_ms: 250 }
    }
}

impl RetryPolicy {
    pub fn none() -> Self {
        RetryPolicy { max_retries: 0, initial_backoff_ms: 0 }
    }

    /// Run `op`, retrying retryable failures with doubling backoff.
    pub fn run<T>(&self, mut op: impl FnMut() -> Result<T, GatewayError>) -> Result<T, GatewayError> {
        let mut backoff = self.initial_backoff_ms;
        let mut attempt = 0;
        loop {
            match op() {
                Err(e) if e.is_retryable() && attempt < self.max_retries => {
                    attempt += 1;
                    if backoff > 0 {
                        std::thread::sleep(Duration::from_millis(backoff));
                    }
                    backoff = backoff.saturating_mul(2);
                }
                other => return other,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::cell::Cell;

    #[test]
    fn request_invariants() {
        assert!(ChatRequest::new(vec![], Sampling::examiner()).is_err());
        let msgs = vec![Message::user("hi")];
        let hot = Sampling { temperature: 2.5, ..Sampling::examiner() };
        assert!(ChatRequest::new(msgs.clone(), hot).is_err());
        let bad_p = Sampling { top_p: 0.0, ..Sampling::examiner() };
        assert!(ChatRequest::new(msgs.clone(), bad_p).is_err());
        let ok = ChatRequest::new(msgs, Sampling::verifier()).unwrap();
        assert_eq!(ok.temperature, 0.1);
        assert_eq!(ok.top_p, 0.9);
        assert_eq!(ok.max_tokens, 4096);
    }

    #[test]
    fn fingerprint_ignores_sampling_but_not_content() {
        let a = ChatRequest::new(vec![Message::user("x")], Sampling::examiner()).unwrap();
        let b = ChatRequest::new(vec![Message::user("x")], Sampling::verifier()).unwrap();
        let c = ChatRequest::new(vec![Message::system("x")], Sampling::examiner()).unwrap();
        assert_eq!(a.fingerprint(), b.fingerprint());
        assert_ne!(a.fingerprint(), c.fingerprint());
        assert_eq!(a.fingerprint().len(), 64);
    }

    #[test]
    fn retry_policy_retries_only_retryable_errors() {
        let calls = Cell::new(0);
        let policy = RetryPolicy { max_retries: 2, initial_backoff_ms: 0 };
        let r: Result<(), _> = policy.run(|| {
            calls.set(calls.get() + 1);
            Err(GatewayError::Transport("down".into()))
        });
        assert!(r.is_err());
        assert_eq!(calls.get(), 3);

        calls.set(0);
        let r: Result<(), _> = policy.run(|| {
            calls.set(calls.get() + 1);
            Err(GatewayError::Protocol("bad body".into()))
        });
        assert!(r.is_err());
        assert_eq!(calls.get(), 1);

        calls.set(0);
        let r = policy.run(|| {
            calls.set(calls.get() + 1);
            if calls.get() < 2 {
                Err(GatewayError::Timeout(Duration::from_secs(1)))
            } else {
                Ok(7)
            }
        });
        assert_eq!(r.unwrap(), 7);
    }
}
