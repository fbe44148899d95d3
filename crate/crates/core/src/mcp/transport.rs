//! Discovery transports: stdio subprocess, HTTP POST, and transcript replay.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};
use std::sync::mpsc;
use std::thread;
use std::time::Duration;

use serde_json::Value;

use super::McpError;

/// Default per-exchange timeout for live transports.
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

/// A request/response exchange with an MCP server. Implementations must
/// deliver responses for the session in request order.
pub trait Exchange {
    fn exchange(&mut self, request: &Value) -> Result<Value, McpError>;
}

/// Spawns the configured command and speaks newline-delimited JSON-RPC over
/// its stdin/stdout. Lines that are not responses to our request (server
/// notifications, log noise) are skipped.
pub struct StdioExchange {
    child: Child,
    stdin: std::process::ChildStdin,
    lines: mpsc::Receiver<std::io::Result<String>>,
    timeout: Duration,
}

impl StdioExchange {
    pub fn spawn(command_line: &str, timeout: Duration) -> Result<Self, McpError> {
        let mut parts = command_line.split_whitespace();
        let program = parts
            .next()
            .ok_or_else(|| McpError::Transport("empty command line".into()))?;
        let mut child = Command::new(program)
            .args(parts)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| McpError::Transport(format!("failed to spawn {program}: {e}")))?;
        let stdin = child.stdin.take().expect("stdin piped");
        let stdout = child.stdout.take().expect("stdout piped");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            let reader = BufReader::new(stdout);
            for line in reader.lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(Self {
            child,
            stdin,
            lines: rx,
            timeout,
        })
    }
}

impl Exchange for StdioExchange {
    fn exchange(&mut self, request: &Value) -> Result<Value, McpError> {
        let mut line = serde_json::to_string(request)
            .map_err(|e| McpError::Protocol(format!("request serialization: {e}")))?;
        line.push('\n');
        self.stdin
            .write_all(line.as_bytes())
            .and_then(|_| self.stdin.flush())
            .map_err(|e| McpError::Transport(format!("write to server stdin: {e}")))?;

        let request_id = request.get("id").cloned();
        loop {
            let received = self
                .lines
                .recv_timeout(self.timeout)
                .map_err(|e| match e {
                    mpsc::RecvTimeoutError::Timeout => {
                        McpError::Transport("timed out waiting for response".into())
                    }
                    mpsc::RecvTimeoutError::Disconnected => {
                        McpError::Transport("server closed its output stream".into())
                    }
                })?
                .map_err(|e| McpError::Transport(format!("read from server stdout: {e}")))?;
            if received.trim().is_empty() {
                continue;
            }
            let value: Value = serde_json::from_str(&received)
                .map_err(|e| McpError::Protocol(format!("non-JSON line from server: {e}")))?;
            // Skip anything that is not the response to our request.
            if request_id.is_some() && value.get("id") == request_id.as_ref() {
                return Ok(value);
            }
        }
    }
}

impl Drop for StdioExchange {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// POSTs each JSON-RPC message to a fixed URL and treats the response body
/// as the JSON-RPC reply.
pub struct HttpExchange {
    client: reqwest::blocking::Client,
    url: String,
}

impl HttpExchange {
    pub fn new(url: &str, timeout: Duration) -> Result<Self, McpError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| McpError::Transport(format!("http client: {e}")))?;
        Ok(Self {
            client,
            url: url.to_string(),
        })
    }
}

impl Exchange for HttpExchange {
    fn exchange(&mut self, request: &Value) -> Result<Value, McpError> {
        let response = self
            .client
            .post(&self.url)
            .header("content-type", "application/json")
            .header("accept", "application/json")
            .json(request)
            .send()
            .map_err(|e| McpError::Transport(format!("POST {}: {e}", self.url)))?;
        let status = response.status();
        if !status.is_success() {
            return Err(McpError::Transport(format!(
                "POST {}: status {status}",
                self.url
            )));
        }
        response
            .json()
            .map_err(|e| McpError::Protocol(format!("response body is not JSON: {e}")))
    }
}

/// Replays a recorded transcript: a file of alternating request/response
/// message lines, verbatim as exchanged. Each outgoing request is checked
/// against the recorded one (JSON equality, so whitespace differences in
/// the recording are harmless) and answered with the recorded response.
#[derive(Debug)]
pub struct ReplayExchange {
    path: PathBuf,
    exchanges: Vec<(Value, Value)>,
    position: usize,
}

impl ReplayExchange {
    pub fn open(path: &Path) -> Result<Self, McpError> {
        let text = fs::read_to_string(path)
            .map_err(|e| McpError::Transport(format!("read transcript {}: {e}", path.display())))?;
        let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
        if !lines.len().is_multiple_of(2) {
            return Err(McpError::Protocol(format!(
                "transcript {} has an unpaired trailing line",
                path.display()
            )));
        }
        let mut exchanges = Vec::with_capacity(lines.len() / 2);
        for pair in lines.chunks(2) {
            let request: Value = serde_json::from_str(pair[0]).map_err(|e| {
                McpError::Protocol(format!("transcript {}: bad request line: {e}", path.display()))
            })?;
            let response: Value = serde_json::from_str(pair[1]).map_err(|e| {
                McpError::Protocol(format!(
                    "transcript {}: bad response line: {e}",
                    path.display()
                ))
            })?;
            exchanges.push((request, response));
        }
        Ok(Self {
            path: path.to_path_buf(),
            exchanges,
            position: 0,
        })
    }
}

impl Exchange for ReplayExchange {
    fn exchange(&mut self, request: &Value) -> Result<Value, McpError> {
        let Some((recorded_request, response)) = self.exchanges.get(self.position) else {
            return Err(McpError::Protocol(format!(
                "transcript {} exhausted after {} exchanges",
                self.path.display(),
                self.position
            )));
        };
        if recorded_request != request {
            return Err(McpError::Protocol(format!(
                "transcript {} exchange {}: request diverges from recording\n  sent:     {request}\n  recorded: {recorded_request}",
                self.path.display(),
                self.position
            )));
        }
        self.position += 1;
        Ok(response.clone())
    }
}
