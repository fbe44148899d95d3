//! JSON-RPC 2.0 message shapes for `tools/list` and canonical JSON text.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::McpError;

/// A `tools/list` request. Request ids are assigned sequentially starting
/// at 1 so that a discovery session is reproducible message-for-message.
#[derive(Debug, Serialize)]
pub struct ListToolsRequest {
    pub jsonrpc: &'static str,
    pub id: u64,
    pub method: &'static str,
    pub params: ListToolsParams,
}

#[derive(Debug, Serialize)]
pub struct ListToolsParams {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cursor: Option<String>,
}

impl ListToolsRequest {
    pub fn new(id: u64, cursor: Option<String>) -> Self {
        Self {
            jsonrpc: "2.0",
            id,
            method: "tools/list",
            params: ListToolsParams { cursor },
        }
    }

    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("request serialization cannot fail")
    }
}

#[derive(Debug, Deserialize)]
struct RpcEnvelope {
    #[allow(dead_code)]
    jsonrpc: Option<String>,
    id: Option<Value>,
    result: Option<Value>,
    error: Option<RpcError>,
}

#[derive(Debug, Deserialize)]
struct RpcError {
    code: i64,
    message: String,
}

/// One page of a `tools/list` result: the advertised tool objects verbatim,
/// plus the pagination cursor if the server has more pages.
#[derive(Debug)]
pub struct ToolsPage {
    pub tools: Vec<Value>,
    pub next_cursor: Option<String>,
}

/// Parse a raw JSON-RPC response to a `tools/list` request with the given id.
pub fn parse_tools_page(raw: &Value, expected_id: u64) -> Result<ToolsPage, McpError> {
    let envelope: RpcEnvelope = serde_json::from_value(raw.clone())
        .map_err(|e| McpError::Protocol(format!("malformed JSON-RPC response: {e}")))?;
    match envelope.id {
        Some(Value::Number(n)) if n.as_u64() == Some(expected_id) => {}
        other => {
            return Err(McpError::Protocol(format!(
                "response id {other:?} does not match request id {expected_id}"
            )))
        }
    }
    if let Some(err) = envelope.error {
        return Err(McpError::Protocol(format!(
            "server error {}: {}",
            err.code, err.message
        )));
    }
    let result = envelope
        .result
        .ok_or_else(|| McpError::Protocol("response carries neither result nor error".into()))?;
    let tools = result
        .get("tools")
        .and_then(Value::as_array)
        .ok_or_else(|| McpError::Protocol("result.tools missing or not an array".into()))?
        .clone();
    let next_cursor = match result.get("nextCursor") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Some(s.clone()),
        Some(other) => {
            return Err(McpError::Protocol(format!(
                "result.nextCursor is not a string: {other}"
            )))
        }
    };
    Ok(ToolsPage { tools, next_cursor })
}

/// Serialize a JSON value canonically: object keys sorted, arrays in order,
/// no insignificant whitespace. Idempotent over its own output.
pub fn canonical_json(value: &Value) -> String {
    serde_json::to_string(&sort_keys(value)).expect("canonical serialization cannot fail")
}

fn sort_keys(value: &Value) -> Value {
    match value {
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            let mut out = Map::new();
            for key in keys {
                out.insert(key.clone(), sort_keys(&map[key]));
            }
            Value::Object(out)
        }
        Value::Array(items) => Value::Array(items.iter().map(sort_keys).collect()),
        other => other.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn request_encoding_is_stable() {
        let req = ListToolsRequest::new(1, None);
        assert_eq!(
            serde_json::to_string(&req).unwrap(),
            r#"{"jsonrpc":"2.0","id":1,"method":"tools/list","params":{}}"#
        );
        let req = ListToolsRequest::new(2, Some("page-2".into()));
        assert_eq!(
            serde_json::to_string(&req).unwrap(),
            r#"{"jsonrpc":"2.0","id":2,"method":"tools/list","params":{"cursor":"page-2"}}"#
        );
    }

    #[test]
    fn canonical_json_sorts_keys_recursively() {
        let v = json!({"b": 1, "a": {"z": [3, {"y": 2, "x": 1}], "w": null}});
        assert_eq!(
            canonical_json(&v),
            r#"{"a":{"w":null,"z":[3,{"x":1,"y":2}]},"b":1}"#
        );
    }

    #[test]
    fn canonical_json_is_idempotent() {
        let v = json!({"beta": {"d": 4, "c": [1, 2]}, "alpha": "x"});
        let once = canonical_json(&v);
        let twice = canonical_json(&serde_json::from_str(&once).unwrap());
        assert_eq!(once, twice);
    }

    #[test]
    fn parse_tools_page_handles_cursor_and_errors() {
        let ok = json!({"jsonrpc": "2.0", "id": 3, "result": {"tools": [], "nextCursor": "p2"}});
        let page = parse_tools_page(&ok, 3).unwrap();
        assert!(page.tools.is_empty());
        assert_eq!(page.next_cursor.as_deref(), Some("p2"));

        let wrong_id = parse_tools_page(&ok, 4);
        assert!(matches!(wrong_id, Err(McpError::Protocol(_))));

        let err = json!({"jsonrpc": "2.0", "id": 1, "error": {"code": -32601, "message": "nope"}});
        assert!(matches!(parse_tools_page(&err, 1), Err(McpError::Protocol(_))));
    }
}
