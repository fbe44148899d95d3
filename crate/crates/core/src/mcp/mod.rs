//! MCP tool discovery: enumerate the tools advertised by configured servers
//! and normalize them into [`ToolSchema`] values.
//!
//! Only the `tools/list` surface is spoken (paginated via cursor when the
//! server paginates). Three transports are supported: a stdio subprocess
//! speaking newline-delimited JSON-RPC, plain HTTP POST, and replay of a
//! recorded transcript so discovery runs deterministically without live
//! servers.

mod transport;
pub mod wire;

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use transport::{Exchange, HttpExchange, ReplayExchange, StdioExchange, DEFAULT_TIMEOUT};
use wire::{canonical_json, parse_tools_page, ListToolsRequest};

#[derive(Debug, Error)]
pub enum McpError {
    /// The server could not be reached, timed out, or the transcript/command
    /// backing the transport is unusable.
    #[error("transport failure: {0}")]
    Transport(String),
    /// The server (or recording) violated the wire protocol.
    #[error("protocol error: {0}")]
    Protocol(String),
    /// A tool advertisement could not be normalized into a [`ToolSchema`].
    #[error("invalid tool from {server_id}: {reason}")]
    InvalidTool { server_id: String, reason: String },
    /// Endpoint configuration violates an invariant.
    #[error("invalid endpoint configuration: {0}")]
    Config(String),
    /// Two catalog entries share a (server_id, name) key.
    #[error("duplicate tool key {0}")]
    DuplicateKey(ToolKey),
    /// Every configured server failed, or one failed in strict mode.
    #[error("discovery failed: {0}")]
    Discovery(String),
}

/// Identity of one tool: the advertising server plus the tool's own name.
/// Displayed and parsed in the namespaced `server_id.name` form.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ToolKey {
    pub server_id: String,
    pub name: String,
}

impl ToolKey {
    pub fn new(server_id: impl Into<String>, name: impl Into<String>) -> Self {
        Self {
            server_id: server_id.into(),
            name: name.into(),
        }
    }
}

impl fmt::Display for ToolKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.server_id, self.name)
    }
}

impl FromStr for ToolKey {
    type Err = String;

    /// Parses the namespaced form. Server ids cannot contain dots, so the
    /// first dot splits server from tool name.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once('.') {
            Some((server, name)) if !server.is_empty() && !name.is_empty() => {
                Ok(Self::new(server, name))
            }
            _ => Err(format!("`{s}` is not of the form server_id.name")),
        }
    }
}

/// How to reach one MCP server.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransportKind {
    /// `address` is a command line; the subprocess speaks newline-delimited
    /// JSON-RPC on stdin/stdout.
    StdioSubprocess,
    /// `address` is a URL; each message is an HTTP POST.
    Http,
    /// `address` is a recorded transcript file; discovery replays it.
    Replay,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServerEndpoint {
    pub server_id: String,
    pub transport: TransportKind,
    /// Command line, URL, or transcript path depending on `transport`.
    pub address: String,
    pub display_name: String,
}

impl ServerEndpoint {
    /// Validates the `server_id` shape: `[a-z0-9_-]+`.
    pub fn validate(&self) -> Result<(), McpError> {
        if self.server_id.is_empty()
            || !self
                .server_id
                .chars()
                .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_' || c == '-')
        {
            return Err(McpError::Config(format!(
                "server_id `{}` must match [a-z0-9_-]+",
                self.server_id
            )));
        }
        Ok(())
    }
}

/// One declared parameter of a tool, as advertised in its input schema.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParameterSpec {
    pub name: String,
    pub type_name: String,
    pub description: String,
    pub required: bool,
}

/// A tool's identity, description, and parameter schema as discovered from
/// an MCP server. `raw_schema_text` holds the advertised tool object
/// serialized canonically (sorted keys, no insignificant whitespace) and is
/// the basis for token accounting and catalog hashing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolSchema {
    pub server_id: String,
    pub name: String,
    pub description: String,
    pub parameters: Vec<ParameterSpec>,
    pub raw_schema_text: String,
}

impl ToolSchema {
    pub fn key(&self) -> ToolKey {
        ToolKey::new(self.server_id.clone(), self.name.clone())
    }
}

/// One failed server during a best-effort snapshot.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiscoveryDiagnostic {
    pub server_id: String,
    pub error: String,
}

/// Whether `snapshot_catalog` fails on the first unreachable server or
/// records the failure and keeps the rest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DiscoveryMode {
    Strict,
    BestEffort,
}

/// The union of every server's advertised tools at one point in time.
#[derive(Debug, Clone)]
pub struct Catalog {
    pub tools: Vec<ToolSchema>,
    /// Unix milliseconds. Fixed at 0 when every endpoint is a replay
    /// transcript, so fixture-driven builds are reproducible byte-for-byte.
    pub captured_at_ms: i64,
    pub diagnostics: Vec<DiscoveryDiagnostic>,
}

impl Catalog {
    pub fn per_server_counts(&self) -> Vec<(String, usize)> {
        let mut counts: Vec<(String, usize)> = Vec::new();
        for tool in &self.tools {
            match counts.iter_mut().find(|(id, _)| id == &tool.server_id) {
                Some((_, n)) => *n += 1,
                None => counts.push((tool.server_id.clone(), 1)),
            }
        }
        counts
    }
}

fn open_exchange(endpoint: &ServerEndpoint) -> Result<Box<dyn Exchange>, McpError> {
    match endpoint.transport {
        TransportKind::StdioSubprocess => Ok(Box::new(StdioExchange::spawn(
            &endpoint.address,
            DEFAULT_TIMEOUT,
        )?)),
        TransportKind::Http => Ok(Box::new(HttpExchange::new(
            &endpoint.address,
            DEFAULT_TIMEOUT,
        )?)),
        TransportKind::Replay => Ok(Box::new(ReplayExchange::open(Path::new(
            &endpoint.address,
        ))?)),
    }
}

/// Normalize one advertised tool object. The advertised parameter order is
/// preserved; constraints beyond the required flag stay inside
/// `raw_schema_text` untouched.
fn normalize_tool(server_id: &str, advertised: &Value) -> Result<ToolSchema, McpError> {
    let invalid = |reason: String| McpError::InvalidTool {
        server_id: server_id.to_string(),
        reason,
    };
    let name = advertised
        .get("name")
        .and_then(Value::as_str)
        .filter(|n| !n.is_empty())
        .ok_or_else(|| invalid("tool name missing or empty".into()))?
        .to_string();
    let description = advertised
        .get("description")
        .and_then(Value::as_str)
        .unwrap_or("")
        .to_string();

    let mut parameters = Vec::new();
    if let Some(schema) = advertised.get("inputSchema") {
        let required: BTreeSet<&str> = schema
            .get("required")
            .and_then(Value::as_array)
            .map(|names| names.iter().filter_map(Value::as_str).collect())
            .unwrap_or_default();
        if let Some(props) = schema.get("properties").and_then(Value::as_object) {
            for (param_name, prop) in props {
                parameters.push(ParameterSpec {
                    name: param_name.clone(),
                    type_name: prop
                        .get("type")
                        .and_then(Value::as_str)
                        .unwrap_or("any")
                        .to_string(),
                    description: prop
                        .get("description")
                        .and_then(Value::as_str)
                        .unwrap_or("")
                        .to_string(),
                    required: required.contains(param_name.as_str()),
                });
            }
        }
    }

    Ok(ToolSchema {
        server_id: server_id.to_string(),
        name,
        description,
        parameters,
        raw_schema_text: canonical_json(advertised),
    })
}

/// Enumerate every tool the server advertises, following pagination cursors
/// until the server stops returning one. Order is the advertised order.
/// An empty catalog is not an error.
pub fn list_tools(endpoint: &ServerEndpoint) -> Result<Vec<ToolSchema>, McpError> {
    endpoint.validate()?;
    let mut exchange = open_exchange(endpoint)?;
    let mut tools = Vec::new();
    let mut cursor: Option<String> = None;
    let mut next_id = 1u64;
    loop {
        let request = ListToolsRequest::new(next_id, cursor.take());
        let response = exchange.exchange(&request.to_value())?;
        let page = parse_tools_page(&response, next_id)?;
        for advertised in &page.tools {
            tools.push(normalize_tool(&endpoint.server_id, advertised)?);
        }
        match page.next_cursor {
            Some(next) => {
                cursor = Some(next);
                next_id += 1;
            }
            None => break,
        }
    }
    Ok(tools)
}

/// Discover every endpoint and union the results into a [`Catalog`].
///
/// Endpoint ids must be unique and the combined catalog must not contain
/// duplicate (server_id, name) keys; either violation is a hard error. In
/// best-effort mode unreachable servers become diagnostics instead of
/// failures, but a snapshot where every server failed is still an error.
pub fn snapshot_catalog(
    endpoints: &[ServerEndpoint],
    mode: DiscoveryMode,
) -> Result<Catalog, McpError> {
    if endpoints.is_empty() {
        return Err(McpError::Config("no endpoints configured".into()));
    }
    let mut seen_servers = BTreeSet::new();
    for endpoint in endpoints {
        endpoint.validate()?;
        if !seen_servers.insert(endpoint.server_id.clone()) {
            return Err(McpError::Config(format!(
                "server_id `{}` listed more than once",
                endpoint.server_id
            )));
        }
    }

    let mut tools = Vec::new();
    let mut diagnostics = Vec::new();
    for endpoint in endpoints {
        match list_tools(endpoint) {
            Ok(mut listed) => tools.append(&mut listed),
            Err(err) => match mode {
                DiscoveryMode::Strict => {
                    return Err(McpError::Discovery(format!(
                        "server {}: {err}",
                        endpoint.server_id
                    )))
                }
                DiscoveryMode::BestEffort => diagnostics.push(DiscoveryDiagnostic {
                    server_id: endpoint.server_id.clone(),
                    error: err.to_string(),
                }),
            },
        }
    }
    if diagnostics.len() == endpoints.len() {
        return Err(McpError::Discovery(format!(
            "all {} servers failed; first: {}",
            endpoints.len(),
            diagnostics[0].error
        )));
    }

    let mut keys = BTreeSet::new();
    for tool in &tools {
        if !keys.insert(tool.key()) {
            return Err(McpError::DuplicateKey(tool.key()));
        }
    }

    let all_replay = endpoints
        .iter()
        .all(|e| e.transport == TransportKind::Replay);
    let captured_at_ms = if all_replay {
        0
    } else {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as i64)
            .unwrap_or(0)
    };

    Ok(Catalog {
        tools,
        captured_at_ms,
        diagnostics,
    })
}

/// Convenience for tests and fixture tooling: a replay endpoint.
pub fn replay_endpoint(server_id: &str, transcript: impl Into<PathBuf>) -> ServerEndpoint {
    let path: PathBuf = transcript.into();
    ServerEndpoint {
        server_id: server_id.to_string(),
        transport: TransportKind::Replay,
        address: path.to_string_lossy().into_owned(),
        display_name: server_id.to_string(),
    }
}
