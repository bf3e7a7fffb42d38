use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::gateway::{parse_tool_calls, BlockError, ToolCall};
use crate::primitives::{Extraction, Judged};
use crate::task::TaskId;

/// Examiner output that does not match the task's schema.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[error("{message}")]
pub struct ParseError {
    pub message: String,
    /// The offending part of the output, or the whole output when nothing matched.
    pub fragment: String,
}

impl ParseError {
    fn new(message: impl Into<String>, fragment: impl Into<String>) -> Self {
        ParseError { message: message.into(), fragment: fragment.into() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedOutput {
    pub extraction: Extraction,
    pub calls: Vec<ToolCall>,
    pub block_errors: Vec<BlockError>,
}

/// First JSON object in `text` that has every key in `keys`.
pub fn find_json_object(text: &str, keys: &[&str]) -> Option<Map<String, Value>> {
    for (i, _) in text.match_indices('{') {
        let mut stream = serde_json::Deserializer::from_str(&text[i..]).into_iter::<Value>();
        if let Some(Ok(Value::Object(obj))) = stream.next() {
            if keys.iter().all(|k| obj.contains_key(*k)) {
                return Some(obj);
            }
        }
    }
    None
}

/// Items of a `Label: [a, b, c]` line, matched case-insensitively.
/// Accepts JSON arrays and bare comma-separated lists. `None` when no line
/// carries the label.
pub fn labeled_list(text: &str, label: &str) -> Option<Vec<String>> {
    let re = regex::Regex::new(&format!("(?i){}", regex::escape(label))).expect("escaped label is a valid regex");
    let line = text.lines().find(|l| re.is_match(l))?;
    let rest = line[re.find(line)?.end()..].trim();
    let inner = match (rest.find('['), rest.rfind(']')) {
        (Some(a), Some(b)) if a < b => &rest[a + 1..b],
        _ => return Some(split_bare(rest)),
    };
    match serde_json::from_str::<Vec<Value>>(&format!("[{inner}]")) {
        Ok(values) => Some(values.iter().map(value_text).collect()),
        Err(_) => Some(split_bare(inner)),
    }
}

fn split_bare(s: &str) -> Vec<String> {
    s.split([',', '，', '、'])
        .map(|p| p.trim().trim_matches(['"', '\'', '“', '”']).trim().to_string())
        .filter(|p| !p.is_empty())
        .collect()
}

fn value_text(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn string_list(v: &Value, field: &str) -> Result<Vec<String>, ParseError> {
    match v {
        Value::String(s) if s.trim().is_empty() => Ok(vec![]),
        Value::String(s) => Ok(vec![s.clone()]),
        Value::Array(items) => items
            .iter()
            .map(|i| match i {
                Value::String(s) => Ok(s.clone()),
                other => Err(ParseError::new(format!("`{field}` items must be strings"), other.to_string())),
            })
            .collect(),
        Value::Null => Ok(vec![]),
        other => Err(ParseError::new(format!("`{field}` must be a string or list of strings"), other.to_string())),
    }
}

fn int_list(items: &[Value], field: &str) -> Result<Vec<i64>, ParseError> {
    items
        .iter()
        .map(|v| {
            match v {
                Value::Number(n) => n.as_i64(),
                Value::String(s) => s.trim().parse().ok(),
                _ => None,
            }
            .ok_or_else(|| ParseError::new(format!("`{field}` must contain integers"), v.to_string()))
        })
        .collect()
}

fn int_strings(items: &[String], field: &str) -> Result<Vec<i64>, ParseError> {
    items
        .iter()
        .map(|s| s.trim().parse().map_err(|_| ParseError::new(format!("`{field}` must contain integers"), s.clone())))
        .collect()
}

fn digits(v: Option<&Value>, field: &str) -> Result<Vec<u32>, ParseError> {
    let Some(Value::Array(items)) = v else {
        return Err(ParseError::new(
            format!("`{field}` must be a list of digits"),
            v.map(|v| v.to_string()).unwrap_or_default(),
        ));
    };
    int_list(items, field)?
        .into_iter()
        .map(|d| {
            u32::try_from(d)
                .map_err(|_| ParseError::new(format!("`{field}` digits must be non-negative"), d.to_string()))
        })
        .collect()
}

fn judged(obj: &Map<String, Value>, key: &str) -> Result<Judged, ParseError> {
    let item = obj
        .get(key)
        .and_then(Value::as_object)
        .ok_or_else(|| ParseError::new(format!("`{key}` must be an object"), Value::Object(obj.clone()).to_string()))?;
    let response = string_list(item.get("response").unwrap_or(&Value::Null), &format!("{key}.response"))?;
    let is_correct = match item.get("is_correct") {
        Some(Value::Bool(b)) => *b,
        Some(Value::String(s)) if s.eq_ignore_ascii_case("true") => true,
        Some(Value::String(s)) if s.eq_ignore_ascii_case("false") => false,
        other => {
            return Err(ParseError::new(
                format!("`{key}.is_correct` must be true or false"),
                other.map(|v| v.to_string()).unwrap_or_default(),
            ))
        }
    };
    Ok(Judged { response, is_correct })
}

fn call_list(calls: &[ToolCall], tool: &str, arg: &str) -> Option<Result<Vec<Value>, ParseError>> {
    let call = calls.iter().rev().find(|c| c.name == tool)?;
    Some(match call.arguments.get(arg) {
        Some(Value::Array(items)) => Ok(items.clone()),
        other => Err(ParseError::new(
            format!("{tool} argument `{arg}` must be a list"),
            other.map(|v| v.to_string()).unwrap_or_else(|| call.to_block()),
        )),
    })
}

fn no_match(task: TaskId, what: &str, raw: &str) -> ParseError {
    ParseError::new(format!("{task}: no {what} found in output"), raw.trim())
}

/// Parse raw examiner output into the task's extraction schema.
pub fn parse_examiner_output(task: TaskId, raw: &str) -> Result<ParsedOutput, ParseError> {
    let parsed = parse_tool_calls(raw);
    let prose = parsed.prose.as_str();
    let extraction = match task {
        TaskId::PictureNaming => {
            let obj =
                find_json_object(prose, &["items"]).ok_or_else(|| no_match(task, "JSON object with `items`", raw))?;
            let Some(Value::Array(items)) = obj.get("items") else {
                return Err(ParseError::new("`items` must be a list", obj["items"].to_string()));
            };
            let items = items
                .iter()
                .enumerate()
                .map(|(i, v)| {
                    let mut wrap = Map::new();
                    wrap.insert(format!("items[{i}]"), v.clone());
                    judged(&wrap, &format!("items[{i}]"))
                })
                .collect::<Result<_, _>>()?;
            Extraction::PictureNaming { items }
        }
        TaskId::DigitSpan => {
            let obj = find_json_object(prose, &["forward", "backward"])
                .ok_or_else(|| no_match(task, "JSON object with `forward` and `backward`", raw))?;
            Extraction::DigitSpan {
                forward: digits(obj.get("forward"), "forward")?,
                backward: digits(obj.get("backward"), "backward")?,
            }
        }
        TaskId::Serial7 => {
            let responses = match labeled_list(prose, "valid responses:") {
                Some(items) => int_strings(&items, "valid responses")?,
                None => match call_list(&parsed.calls, "score_serial7", "responses") {
                    Some(items) => int_list(&items?, "responses")?,
                    None => return Err(no_match(task, "`Valid responses:` line", raw)),
                },
            };
            Extraction::Serial7 { responses }
        }
        TaskId::SentenceRep => {
            let obj = find_json_object(prose, &["S1", "S2"])
                .ok_or_else(|| no_match(task, "JSON object with `S1` and `S2`", raw))?;
            let mut responses = Vec::new();
            for key in ["S1", "S2"] {
                let text = match &obj[key] {
                    Value::Object(o) => {
                        string_list(o.get("response").unwrap_or(&Value::Null), &format!("{key}.response"))?
                    }
                    other => string_list(other, key)?,
                };
                responses.push(text.join(" "));
            }
            Extraction::SentenceRep { responses }
        }
        TaskId::AnimalFluency => {
            let animals = match call_list(&parsed.calls, "list_length", "list") {
                Some(items) => items?.iter().map(value_text).collect(),
                None => labeled_list(prose, "animal list:")
                    .ok_or_else(|| no_match(task, "list_length call or `Animal list:` line", raw))?,
            };
            Extraction::AnimalFluency { animals }
        }
        TaskId::Abstraction => {
            let obj = find_json_object(prose, &["Q1", "Q2"])
                .ok_or_else(|| no_match(task, "JSON object with `Q1` and `Q2`", raw))?;
            Extraction::Abstraction { q1: judged(&obj, "Q1")?, q2: judged(&obj, "Q2")? }
        }
        TaskId::HklltTrial4 | TaskId::HklltTrial5 => {
            let recalled = match call_list(&parsed.calls, "parse_hkllt", "recalled") {
                Some(items) => items?.iter().map(value_text).collect(),
                None => labeled_list(prose, "recalled words:")
                    .ok_or_else(|| no_match(task, "parse_hkllt call or `Recalled words:` line", raw))?,
            };
            Extraction::HklltRecall { recalled }
        }
    };
    Ok(ParsedOutput { extraction, calls: parsed.calls, block_errors: parsed.errors })
}

/// Canonical examiner output for an extraction, in the template formats.
pub fn render_examiner_output(extraction: &Extraction) -> String {
    use serde_json::json;
    let block = |name: &str, args: Value| {
        let Value::Object(m) = args else { unreachable!("tool arguments are objects") };
        ToolCall::new(name, m).to_block()
    };
    let judged_json = |j: &Judged| json!({ "response": j.response, "is_correct": j.is_correct });
    match extraction {
        Extraction::PictureNaming { items } => {
            let mut s = String::new();
            for (i, it) in items.iter().enumerate() {
                s.push_str(&format!(
                    "Item {} Resp: {}  Item {} Judge: {}\n",
                    i + 1,
                    it.response.join(" "),
                    i + 1,
                    it.is_correct
                ));
            }
            s.push_str(&json!({ "items": items.iter().map(judged_json).collect::<Vec<_>>() }).to_string());
            s
        }
        Extraction::DigitSpan { forward, backward } => json!({ "forward": forward, "backward": backward }).to_string(),
        Extraction::Serial7 { responses } => {
            let list = responses.iter().map(|r| r.to_string()).collect::<Vec<_>>().join(", ");
            format!("Valid responses: [{list}]\n{}", block("score_serial7", json!({ "responses": responses })))
        }
        Extraction::SentenceRep { responses } => {
            let get = |i: usize| responses.get(i).cloned().unwrap_or_default();
            json!({ "S1": { "response": get(0) }, "S2": { "response": get(1) } }).to_string()
        }
        Extraction::AnimalFluency { animals } => {
            format!("Animal list: [{}]\n{}", animals.join(", "), block("list_length", json!({ "list": animals })))
        }
        Extraction::Abstraction { q1, q2 } => {
            format!(
                "Q1 Resp: {}  Q1 Judge: {}\nQ2 Resp: {}  Q2 Judge: {}\n{}",
                q1.response.join(" "),
                q1.is_correct,
                q2.response.join(" "),
                q2.is_correct,
                json!({ "Q1": judged_json(q1), "Q2": judged_json(q2) })
            )
        }
        Extraction::HklltRecall { recalled } => {
            format!(
                "Recalled words: [{}]\n{}",
                recalled.join(", "),
                block("parse_hkllt", json!({ "recalled": recalled }))
            )
        }
    }
}
