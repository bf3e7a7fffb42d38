use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

pub const TOOL_CALL_OPEN: &str = "<tool_call>";
pub const TOOL_CALL_CLOSE: &str = "</tool_call>";

/// One function invocation requested by the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolCall {
    pub name: String,
    pub arguments: Map<String, Value>,
}

impl ToolCall {
    pub fn new(name: impl Into<String>, arguments: Map<String, Value>) -> Self {
        ToolCall { name: name.into(), arguments }
    }

    /// Render in the block syntax the examiners emit.
    pub fn to_block(&self) -> String {
        let body = serde_json::json!({ "name": self.name, "arguments": self.arguments });
        format!("{TOOL_CALL_OPEN}\n{body}\n{TOOL_CALL_CLOSE}")
    }
}

/// A block that could not be turned into a [`ToolCall`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockError {
    /// Zero-based index among all blocks in the response.
    pub block: usize,
    pub message: String,
    pub fragment: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ParsedResponse {
    pub calls: Vec<ToolCall>,
    /// Text outside every block, blocks removed.
    pub prose: String,
    pub errors: Vec<BlockError>,
}

fn parse_block(body: &str) -> Result<ToolCall, String> {
    let value: Value = serde_json::from_str(body.trim()).map_err(|e| format!("invalid JSON: {e}"))?;
    let Value::Object(mut obj) = value else {
        return Err("block body is not a JSON object".into());
    };
    let name = match obj.remove("name") {
        Some(Value::String(s)) if !s.trim().is_empty() => s,
        Some(_) => return Err("`name` must be a non-empty string".into()),
        None => return Err("missing `name`".into()),
    };
    let arguments = match obj.remove("arguments") {
        Some(Value::Object(m)) => m,
        // Some servers double-encode arguments as a JSON string.
        Some(Value::String(s)) => match serde_json::from_str::<Value>(&s) {
            Ok(Value::Object(m)) => m,
            _ => return Err("`arguments` string does not hold a JSON object".into()),
        },
        Some(_) => return Err("`arguments` must be an object".into()),
        None => return Err("missing `arguments`".into()),
    };
    Ok(ToolCall { name, arguments })
}

/// Extract every `<tool_call>…</tool_call>` block from model output.
///
/// Blocks are returned in order. A block whose body is not a JSON object
/// with `name` and `arguments` is skipped and recorded in `errors`; the rest
/// of the response is still parsed. An unterminated block is an error and
/// its text is kept as prose.
pub fn parse_tool_calls(text: &str) -> ParsedResponse {
    let mut out = ParsedResponse::default();
    let mut rest = text;
    let mut block = 0;
    while let Some(start) = rest.find(TOOL_CALL_OPEN) {
        out.prose.push_str(&rest[..start]);
        let after = &rest[start + TOOL_CALL_OPEN.len()..];
        let Some(end) = after.find(TOOL_CALL_CLOSE) else {
            out.errors.push(BlockError {
                block,
                message: "unterminated tool_call block".into(),
                fragment: after.trim().to_string(),
            });
            out.prose.push_str(&rest[start..]);
            rest = "";
            break;
        };
        let body = &after[..end];
        match parse_block(body) {
            Ok(call) => out.calls.push(call),
            Err(message) => out.errors.push(BlockError { block, message, fragment: body.trim().to_string() }),
        }
        block += 1;
        rest = &after[end + TOOL_CALL_CLOSE.len()..];
    }
    out.prose.push_str(rest);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_block_from_examiner_output() {
        let text = "Animal list: [Lion, Tiger]\n<tool_call>\n{\"name\": \"list_length\", \"arguments\": {\"list\": [\"Lion\", \"Tiger\"]}}\n</tool_call>";
        let parsed = parse_tool_calls(text);
        assert_eq!(parsed.calls.len(), 1);
        assert_eq!(parsed.calls[0].name, "list_length");
        assert_eq!(parsed.calls[0].arguments["list"].as_array().unwrap().len(), 2);
        assert!(parsed.errors.is_empty());
        assert_eq!(parsed.prose.trim(), "Animal list: [Lion, Tiger]");
    }

    #[test]
    fn no_blocks_is_all_prose() {
        let parsed = parse_tool_calls("just thinking out loud");
        assert!(parsed.calls.is_empty());
        assert_eq!(parsed.prose, "just thinking out loud");
    }

    #[test]
    fn malformed_block_is_recorded_not_fatal() {
        let text =
            "<tool_call>{\"name\":\"a\",\"arguments\":{}}</tool_call> mid <tool_call>{\"name\": oops}</tool_call>";
        let parsed = parse_tool_calls(text);
        assert_eq!(parsed.calls.len(), 1);
        assert_eq!(parsed.errors.len(), 1);
        assert_eq!(parsed.errors[0].block, 1);
        assert!(parsed.errors[0].fragment.contains("oops"));
        assert_eq!(parsed.prose.trim(), "mid");
    }

    #[test]
    fn missing_fields_and_unterminated_blocks() {
        let parsed = parse_tool_calls("<tool_call>{\"arguments\":{}}</tool_call>");
        assert!(parsed.errors[0].message.contains("name"));
        let parsed = parse_tool_calls("<tool_call>{\"name\":\"x\",\"arguments\":[1]}</tool_call>");
        assert!(parsed.errors[0].message.contains("arguments"));
        let parsed = parse_tool_calls("before <tool_call>{\"name\":\"x\"");
        assert_eq!(parsed.errors.len(), 1);
        assert!(parsed.prose.starts_with("before <tool_call>"));
    }

    #[test]
    fn string_encoded_arguments_are_accepted() {
        let parsed = parse_tool_calls(r#"<tool_call>{"name":"x","arguments":"{\"k\":1}"}</tool_call>"#);
        assert_eq!(parsed.calls[0].arguments["k"], 1);
    }

    fn arb_value() -> impl Strategy<Value = Value> {
        let leaf = prop_oneof![
            Just(Value::Null),
            any::<bool>().prop_map(Value::Bool),
            any::<i64>().prop_map(Value::from),
            "[a-zA-Z0-9 /_\\-\u{4e00}-\u{4e10}]{0,12}".prop_map(Value::String),
        ];
        leaf.prop_recursive(3, 16, 4, |inner| {
            prop_oneof![
                prop::collection::vec(inner.clone(), 0..4).prop_map(Value::Array),
                prop::collection::btree_map("[a-z]{1,6}", inner, 0..4)
                    .prop_map(|m| Value::Object(m.into_iter().collect())),
            ]
        })
    }

    proptest! {
        #[test]
        fn block_round_trip(name in "[a-z_]{1,16}", args in prop::collection::btree_map("[a-z]{1,8}", arb_value(), 0..5)) {
            let call = ToolCall::new(name, args.into_iter().collect());
            let text = format!("prefix {}\nsuffix", call.to_block());
            let parsed = parse_tool_calls(&text);
            prop_assert!(parsed.errors.is_empty());
            prop_assert_eq!(parsed.calls, vec![call]);
        }
    }
}
