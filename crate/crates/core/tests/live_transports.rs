//! Discovery over the live transports: a stdio subprocess speaking
//! newline-delimited JSON-RPC, and an HTTP endpoint. The subprocess is a
//! small inline python script so the tests stay self-contained.

use std::sync::Arc;

use axum::routing::post;
use axum::{Json, Router};
use serde_json::{json, Value};
use tokio::sync::oneshot;

use toolgate::mcp::{list_tools, ServerEndpoint, TransportKind};

/// A python one-liner MCP server: answers two pages of tools/list and
/// prefixes its first reply with an unrelated notification line, which a
/// correct client must skip.
const STDIO_SERVER: &str = r#"
import json, sys
def reply(obj):
    sys.stdout.write(json.dumps(obj) + "\n")
    sys.stdout.flush()
pages = {
    None: {"tools": [{"name": "alpha", "description": "First tool",
                      "inputSchema": {"type": "object", "properties": {}}}],
           "nextCursor": "p2"},
    "p2": {"tools": [{"name": "beta", "description": "Second tool",
                      "inputSchema": {"type": "object", "properties": {
                          "city": {"type": "string", "description": "City name"}},
                          "required": ["city"]}}]},
}
first = True
for line in sys.stdin:
    request = json.loads(line)
    if request.get("method") != "tools/list":
        continue
    if first:
        reply({"jsonrpc": "2.0", "method": "notifications/message",
               "params": {"level": "info", "data": "starting up"}})
        first = False
    cursor = request.get("params", {}).get("cursor")
    reply({"jsonrpc": "2.0", "id": request["id"], "result": pages[cursor]})
"#;

#[test]
fn stdio_subprocess_discovery_follows_pages_and_skips_notifications() {
    let dir = tempfile::tempdir().unwrap();
    let script = dir.path().join("mcp_server.py");
    std::fs::write(&script, STDIO_SERVER).unwrap();
    let endpoint = ServerEndpoint {
        server_id: "scripted".into(),
        transport: TransportKind::StdioSubprocess,
        address: format!("python3 {}", script.display()),
        display_name: "Scripted".into(),
    };
    let tools = list_tools(&endpoint).unwrap();
    assert_eq!(tools.len(), 2);
    assert_eq!(tools[0].name, "alpha");
    assert_eq!(tools[1].name, "beta");
    assert_eq!(tools[1].parameters.len(), 1);
    assert!(tools[1].parameters[0].required);
    assert_eq!(tools[0].server_id, "scripted");
}

#[test]
fn stdio_spawn_failure_is_a_transport_error() {
    let endpoint = ServerEndpoint {
        server_id: "missing".into(),
        transport: TransportKind::StdioSubprocess,
        address: "definitely-not-a-real-binary --flag".into(),
        display_name: "Missing".into(),
    };
    let err = list_tools(&endpoint).unwrap_err();
    assert!(matches!(err, toolgate::mcp::McpError::Transport(_)));
}

#[test]
fn stdio_server_that_closes_early_is_a_transport_error() {
    let endpoint = ServerEndpoint {
        server_id: "silent".into(),
        transport: TransportKind::StdioSubprocess,
        // exits immediately without answering
        address: "true".into(),
        display_name: "Silent".into(),
    };
    let err = list_tools(&endpoint).unwrap_err();
    assert!(matches!(err, toolgate::mcp::McpError::Transport(_)));
}

struct MockHttpServer {
    addr: std::net::SocketAddr,
    shutdown: Option<oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<()>>,
}

impl MockHttpServer {
    fn start(tools: Vec<Value>) -> Self {
        let tools = Arc::new(tools);
        let app = Router::new().route(
            "/mcp",
            post(move |Json(request): Json<Value>| {
                let tools = tools.clone();
                async move {
                    Json(json!({
                        "jsonrpc": "2.0",
                        "id": request["id"],
                        "result": {"tools": *tools}
                    }))
                }
            }),
        );
        let runtime = tokio::runtime::Builder::new_multi_thread()
            .worker_threads(1)
            .enable_all()
            .build()
            .unwrap();
        let listener = runtime
            .block_on(tokio::net::TcpListener::bind("127.0.0.1:0"))
            .unwrap();
        let addr = listener.local_addr().unwrap();
        let (tx, rx) = oneshot::channel::<()>();
        let thread = std::thread::spawn(move || {
            runtime.block_on(async move {
                let _ = axum::serve(listener, app)
                    .with_graceful_shutdown(async {
                        let _ = rx.await;
                    })
                    .await;
            });
        });
        Self {
            addr,
            shutdown: Some(tx),
            thread: Some(thread),
        }
    }
}

impl Drop for MockHttpServer {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(thread) = self.thread.take() {
            let _ = thread.join();
        }
    }
}

#[test]
fn http_discovery_posts_jsonrpc_and_normalizes_tools() {
    let server = MockHttpServer::start(vec![json!({
        "name": "lookup",
        "description": "Look something up",
        "inputSchema": {"type": "object", "properties": {
            "term": {"type": "string", "description": "Search term"}
        }, "required": ["term"]}
    })]);
    let endpoint = ServerEndpoint {
        server_id: "remote".into(),
        transport: TransportKind::Http,
        address: format!("http://{}/mcp", server.addr),
        display_name: "Remote".into(),
    };
    let tools = list_tools(&endpoint).unwrap();
    assert_eq!(tools.len(), 1);
    assert_eq!(tools[0].name, "lookup");
    assert_eq!(tools[0].server_id, "remote");
    // canonical serialization sorts the advertised object's keys
    assert!(tools[0].raw_schema_text.starts_with(r#"{"description":"#));
}

#[test]
fn http_connection_refused_is_a_transport_error() {
    let endpoint = ServerEndpoint {
        server_id: "refused".into(),
        transport: TransportKind::Http,
        address: "http://127.0.0.1:9/mcp".into(),
        display_name: "Refused".into(),
    };
    let err = list_tools(&endpoint).unwrap_err();
    assert!(matches!(err, toolgate::mcp::McpError::Transport(_)));
}
