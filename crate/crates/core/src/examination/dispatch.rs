use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::gateway::ToolCall;
use crate::toolbox::{self, MatchMode, TargetList};

/// Names accepted by [`dispatch_tools`].
pub const TOOL_NAMES: [&str; 5] = ["list_length", "keyword_check", "parse_hkllt", "dedupe_exact", "score_serial7"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolOutcome {
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ToolOutcome {
    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }
}

fn arg<'a>(call: &'a ToolCall, key: &str) -> Result<&'a Value, String> {
    call.arguments.get(key).ok_or_else(|| format!("missing argument `{key}`"))
}

fn array<'a>(call: &'a ToolCall, key: &str) -> Result<&'a [Value], String> {
    arg(call, key)?.as_array().map(Vec::as_slice).ok_or_else(|| format!("argument `{key}` must be a list"))
}

/// Strings stay strings; numbers and other scalars use their JSON text so
/// that `[2, 1]` and `["2", "1"]` compare equal.
fn token(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn tokens(call: &ToolCall, key: &str) -> Result<Vec<String>, String> {
    Ok(array(call, key)?.iter().map(token).collect())
}

fn run(call: &ToolCall, targets: &TargetList) -> Result<Value, String> {
    match call.name.as_str() {
        "list_length" => Ok(json!(toolbox::list_length(array(call, "list")?))),
        "dedupe_exact" => Ok(json!(toolbox::dedupe_exact(&tokens(call, "list")?))),
        "keyword_check" => {
            let mode = match call.arguments.get("mode") {
                None => MatchMode::ExactSequence,
                Some(v) => serde_json::from_value(v.clone()).map_err(|_| format!("unknown mode {v}"))?,
            };
            let m = toolbox::keyword_check_text(&tokens(call, "targets")?, &tokens(call, "candidate")?, mode)
                .map_err(|e| e.to_string())?;
            Ok(json!({ "matched": m.matched, "per_target": m.per_target }))
        }
        "parse_hkllt" => {
            let r = toolbox::parse_hkllt(&tokens(call, "recalled")?, targets);
            serde_json::to_value(r).map_err(|e| e.to_string())
        }
        "score_serial7" => {
            let responses = array(call, "responses")?
                .iter()
                .map(|v| v.as_i64().ok_or_else(|| format!("serial7 response {v} is not an integer")))
                .collect::<Result<Vec<_>, _>>()?;
            let s = toolbox::score_serial7(&responses);
            Ok(json!({ "count_correct": s.count_correct, "score": s.score }))
        }
        other => Err(format!("unknown tool `{other}`")),
    }
}

/// Execute each call against the scoring toolbox. Failures are reported per
/// call and never abort the others.
pub fn dispatch_tools(calls: &[ToolCall], targets: &TargetList) -> Vec<ToolOutcome> {
    calls
        .iter()
        .map(|call| match run(call, targets) {
            Ok(v) => ToolOutcome { name: call.name.clone(), value: Some(v), error: None },
            Err(e) => ToolOutcome { name: call.name.clone(), value: None, error: Some(e) },
        })
        .collect()
}
