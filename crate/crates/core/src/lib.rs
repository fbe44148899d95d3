//! Semantic tool discovery for MCP ecosystems.
//!
//! This crate indexes tool schemas discovered from MCP servers as dense
//! vectors and retrieves the top-K most relevant tools for a user query,
//! so an LLM orchestrator can inject a handful of tool definitions instead
//! of the whole catalog. It ships with:
//!
//! - an MCP `tools/list` client (stdio, HTTP, and replay transports),
//! - a deterministic reference embedder plus a remote HTTP provider,
//! - an exact flat vector index with bit-exact persistence,
//! - token accounting and token-reduction reporting,
//! - an HTTP gateway with atomic reindexing and an LRU response cache,
//! - an evaluation harness (precision/recall/F1/hit-rate/MRR/TRR sweeps).
//!
//! The `toolgate` CLI in this workspace wires the pieces together; see the
//! repository README for end-to-end usage.

pub mod config;
pub mod document;
pub mod embedding;
pub mod evalkit;
pub mod gateway;
pub mod index;
pub mod mcp;
pub mod pipeline;
pub mod tokens;

pub use document::{render, ToolDocument};
pub use embedding::{similarity, EmbeddingVector, Provider, ProviderSpec};
pub use index::{IndexSnapshot, IndexedTool, RankedTool};
pub use mcp::{Catalog, ServerEndpoint, ToolKey, ToolSchema};
pub use pipeline::Selection;
pub use tokens::{count_tokens, token_reduction, TokenizerSpec};
