//! End-to-end query processing: embed the query, search the snapshot,
//! apply the threshold with fallback, and assemble token accounting.
//!
//! The fallback is always on: when threshold filtering empties the
//! candidate set, the unthresholded top-K is returned instead and
//! `fallback_applied` is set, so a non-empty catalog always yields at
//! least one tool.

use std::collections::BTreeSet;
use std::io::Write;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::{EmbedError, Provider};
use crate::index::{IndexSnapshot, RankedTool, SearchError};
use crate::mcp::ToolKey;
use crate::tokens::{token_reduction, TokenError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("query must be non-empty")]
    EmptyQuery,
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Token(#[from] TokenError),
    #[error("provider `{provider}` does not match the index provider `{index}`")]
    ProviderMismatch { provider: String, index: String },
    #[error("reranker violated membership: {0}")]
    RerankMembership(String),
    #[error("invoked tool {0} is not in the catalog")]
    UnknownInvokedTool(ToolKey),
    #[error("failed to append invocation record: {0}")]
    LogSink(String),
}

/// Ranked retrieval result for one query, with token accounting and the
/// embed+search wall time.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub query_text: String,
    pub ranked: Vec<RankedTool>,
    pub k_requested: usize,
    pub threshold: Option<f32>,
    pub fallback_applied: bool,
    pub selected_tokens: u64,
    pub baseline_tokens: u64,
    pub trr: f64,
    pub retrieval_latency_ms: f64,
}

/// Embed `query`, search the snapshot, and assemble a [`Selection`].
///
/// The latency field spans query embedding and search only (a monotonic
/// clock around the retrieval work, not any transport to the caller).
pub fn select_tools(
    snapshot: &IndexSnapshot,
    provider: &Provider,
    query: &str,
    k: usize,
    threshold: Option<f32>,
) -> Result<Selection, PipelineError> {
    if query.trim().is_empty() {
        return Err(PipelineError::EmptyQuery);
    }
    if provider.provider_id() != snapshot.provider_id {
        return Err(PipelineError::ProviderMismatch {
            provider: provider.provider_id().to_string(),
            index: snapshot.provider_id.clone(),
        });
    }

    let started = Instant::now();
    let query_vector = provider.embed(query)?;
    let mut ranked = snapshot.search(&query_vector, k, threshold)?;
    let mut fallback_applied = false;
    if ranked.is_empty() && threshold.is_some() && !snapshot.is_empty() {
        ranked = snapshot.search(&query_vector, k, None)?;
        fallback_applied = true;
    }
    let retrieval_latency_ms = started.elapsed().as_secs_f64() * 1e3;

    let selected_tokens: u64 = ranked
        .iter()
        .filter_map(|r| snapshot.entry(&r.key))
        .map(|e| e.schema_token_count)
        .sum();
    let baseline_tokens = snapshot.baseline_tokens();
    let trr = token_reduction(baseline_tokens, selected_tokens)?;

    Ok(Selection {
        query_text: query.to_string(),
        ranked,
        k_requested: k,
        threshold,
        fallback_applied,
        selected_tokens,
        baseline_tokens,
        trr,
        retrieval_latency_ms,
    })
}

/// A pluggable reranking stage. Implementations return the new order of
/// tool keys; they may permute the selection but never add, drop, or
/// duplicate members.
pub trait Reranker {
    fn rerank(&self, query: &str, ranked: &[RankedTool]) -> Vec<ToolKey>;
}

/// Apply an optional reranker to a selection. With no reranker this is the
/// identity. A configured reranker's output is validated against the
/// membership contract before it is accepted.
pub fn rerank_hook(
    selection: Selection,
    reranker: Option<&dyn Reranker>,
) -> Result<Selection, PipelineError> {
    let Some(reranker) = reranker else {
        return Ok(selection);
    };
    let new_order = reranker.rerank(&selection.query_text, &selection.ranked);
    if new_order.len() != selection.ranked.len() {
        return Err(PipelineError::RerankMembership(format!(
            "returned {} keys for {} entries",
            new_order.len(),
            selection.ranked.len()
        )));
    }
    let original: BTreeSet<&ToolKey> = selection.ranked.iter().map(|r| &r.key).collect();
    let reordered: BTreeSet<&ToolKey> = new_order.iter().collect();
    if original != reordered {
        return Err(PipelineError::RerankMembership(
            "returned keys are not a permutation of the selection".into(),
        ));
    }
    let mut ranked = Vec::with_capacity(new_order.len());
    for key in &new_order {
        let entry = selection
            .ranked
            .iter()
            .find(|r| &r.key == key)
            .expect("membership verified above");
        ranked.push(entry.clone());
    }
    Ok(Selection { ranked, ..selection })
}

/// How an orchestrated tool call ended up, as reported by the caller.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InvocationOutcome {
    Success,
    Failure,
}

/// One append-only invocation record: what was retrieved, what the LLM
/// actually invoked, and how it went. Raw logging only; nothing learns
/// from these records.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InvocationRecord {
    pub timestamp_ms: i64,
    pub query_text: String,
    pub ranked: Vec<String>,
    pub invoked: Vec<String>,
    pub outcome: InvocationOutcome,
}

/// Validate the invoked keys against the catalog and append one JSON line
/// to the sink.
pub fn log_invocation(
    snapshot: &IndexSnapshot,
    selection: &Selection,
    invoked: &[ToolKey],
    outcome: InvocationOutcome,
    sink: &mut dyn Write,
) -> Result<InvocationRecord, PipelineError> {
    for key in invoked {
        if !snapshot.contains(key) {
            return Err(PipelineError::UnknownInvokedTool(key.clone()));
        }
    }
    let record = InvocationRecord {
        timestamp_ms: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as i64)
            .unwrap_or(0),
        query_text: selection.query_text.clone(),
        ranked: selection.ranked.iter().map(|r| r.key.to_string()).collect(),
        invoked: invoked.iter().map(ToolKey::to_string).collect(),
        outcome,
    };
    let line = serde_json::to_string(&record)
        .map_err(|e| PipelineError::LogSink(e.to_string()))?;
    sink.write_all(line.as_bytes())
        .and_then(|_| sink.write_all(b"\n"))
        .map_err(|e| PipelineError::LogSink(e.to_string()))?;
    Ok(record)
}
