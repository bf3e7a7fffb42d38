use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Mutex;

use super::{ChatBackend, ChatRequest, GatewayError};

/// Replays canned responses keyed by [`ChatRequest::fingerprint`].
///
/// The script file is a JSON object mapping fingerprint to response text.
#[derive(Debug, Clone, Default)]
pub struct ScriptedBackend {
    script: BTreeMap<String, String>,
}

impl ScriptedBackend {
    pub fn new(script: BTreeMap<String, String>) -> Self {
        ScriptedBackend { script }
    }

    pub fn from_json(text: &str) -> Result<Self, GatewayError> {
        serde_json::from_str(text)
            .map(ScriptedBackend::new)
            .map_err(|e| GatewayError::Config(format!("mock script: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, GatewayError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| GatewayError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Register the response for `request`.
    pub fn insert(&mut self, request: &ChatRequest, response: impl Into<String>) {
        self.script.insert(request.fingerprint(), response.into());
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.script).expect("string map serializes")
    }

    pub fn len(&self) -> usize {
        self.script.len()
    }

    pub fn is_empty(&self) -> bool {
        self.script.is_empty()
    }
}

impl ChatBackend for ScriptedBackend {
    fn complete(&self, request: &ChatRequest) -> Result<String, GatewayError> {
        request.validate()?;
        let fp = request.fingerprint();
        self.script.get(&fp).cloned().ok_or(GatewayError::Unscripted(fp))
    }
}

/// Adapts a closure into a backend.
pub struct FnBackend<F>(pub F);

impl<F> ChatBackend for FnBackend<F>
where
    F: Fn(&ChatRequest) -> Result<String, GatewayError> + Send + Sync,
{
    fn complete(&self, request: &ChatRequest) -> Result<String, GatewayError> {
        request.validate()?;
        (self.0)(request)
    }
}

/// Wraps another backend and keeps every request it forwards.
pub struct RecordingBackend<B> {
    inner: B,
    log: Mutex<Vec<ChatRequest>>,
}

impl<B: ChatBackend> RecordingBackend<B> {
    pub fn new(inner: B) -> Self {
        RecordingBackend { inner, log: Mutex::new(Vec::new()) }
    }

    pub fn requests(&self) -> Vec<ChatRequest> {
        self.log.lock().expect("recording log poisoned").clone()
    }

    pub fn count(&self) -> usize {
        self.log.lock().expect("recording log poisoned").len()
    }

    pub fn into_inner(self) -> B {
        self.inner
    }
}

impl<B: ChatBackend> ChatBackend for RecordingBackend<B> {
    fn complete(&self, request: &ChatRequest) -> Result<String, GatewayError> {
        self.log.lock().expect("recording log poisoned").push(request.clone());
        self.inner.complete(request)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{Message, Sampling};

    fn req(text: &str) -> ChatRequest {
        ChatRequest::new(vec![Message::user(text)], Sampling::examiner()).unwrap()
    }

    #[test]
    fn scripted_backend_replays_by_fingerprint() {
        let mut mock = ScriptedBackend::default();
        mock.insert(&req("name animals"), "Animal list: [Lion]");
        assert_eq!(mock.complete(&req("name animals")).unwrap(), "Animal list: [Lion]");
        assert!(matches!(mock.complete(&req("other")), Err(GatewayError::Unscripted(_))));
        // Determinism across repeated calls.
        assert_eq!(mock.complete(&req("name animals")).unwrap(), mock.complete(&req("name animals")).unwrap());
    }

    #[test]
    fn script_file_round_trip() {
        let mut mock = ScriptedBackend::default();
        mock.insert(&req("a"), "A");
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("script.json");
        std::fs::write(&path, mock.to_json()).unwrap();
        let loaded = ScriptedBackend::load(&path).unwrap();
        assert_eq!(loaded.complete(&req("a")).unwrap(), "A");
        assert!(ScriptedBackend::from_json("[1,2]").is_err());
    }

    #[test]
    fn recording_backend_captures_requests() {
        let rec = RecordingBackend::new(FnBackend(|r: &ChatRequest| Ok(r.last_user_text().to_uppercase())));
        assert_eq!(rec.complete(&req("hi")).unwrap(), "HI");
        assert_eq!(rec.count(), 1);
        assert_eq!(rec.requests()[0].temperature, 0.3);
    }
}
