//! Flat exact vector index over the tool catalog.
//!
//! Every query scores every entry (the catalogs this serves are a few
//! hundred tools, well inside the latency budget), so results are exact
//! and fully deterministic: scores come from a fixed-order dot product,
//! ordering is score-descending with ties broken by tool key. Snapshots
//! are immutable once built; reindexing builds a new one and swaps it in.

mod persist;

pub use persist::{decode, encode, load, persist, PersistError, FORMAT_VERSION};

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::document::{render, EnrichmentTable};
use crate::embedding::{dot, EmbedError, EmbeddingVector, Provider};
use crate::mcp::{Catalog, ToolKey};
use crate::tokens::{TokenError, Tokenizer, TokenizerSpec};

#[derive(Debug, Error)]
pub enum BuildError {
    #[error("cannot build an index from an empty catalog")]
    EmptyCatalog,
    #[error("duplicate tool key {0} in catalog")]
    DuplicateKey(ToolKey),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Token(#[from] TokenError),
}

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("k must be at least 1")]
    ZeroK,
    #[error("query dimension {query} does not match index dimension {index}")]
    DimensionMismatch { query: usize, index: usize },
}

/// One indexed tool: its embedding, the document that produced it, and the
/// token cost of its LLM-facing schema.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexedTool {
    pub tool_key: ToolKey,
    pub vector: EmbeddingVector,
    pub document_text: String,
    /// Tokens of `raw_schema_text` under the tokenizer active at build time.
    pub schema_token_count: u64,
    pub raw_schema_text: String,
}

/// An immutable built index. Entries are sorted by tool key (the canonical
/// form), all sharing one provider and dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexSnapshot {
    pub entries: Vec<IndexedTool>,
    pub provider_id: String,
    pub dimension: usize,
    /// Unix milliseconds; inherited from the catalog snapshot this index
    /// was built from (0 for replayed fixture catalogs).
    pub build_timestamp_ms: i64,
    /// Hex SHA-256 over every entry's key and raw schema text, in key order.
    pub catalog_hash: String,
}

/// One search result.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedTool {
    pub key: ToolKey,
    pub score: f32,
}

/// Digest of the catalog content: each entry's server id, name, and raw
/// schema text, length-prefixed, in sorted key order.
pub fn catalog_hash(entries: &[IndexedTool]) -> String {
    let mut hasher = Sha256::new();
    for entry in entries {
        for field in [
            entry.tool_key.server_id.as_str(),
            entry.tool_key.name.as_str(),
            entry.raw_schema_text.as_str(),
        ] {
            hasher.update((field.len() as u64).to_le_bytes());
            hasher.update(field.as_bytes());
        }
    }
    let digest = hasher.finalize();
    let mut hex = String::with_capacity(64);
    for byte in digest {
        use std::fmt::Write as _;
        let _ = write!(hex, "{byte:02x}");
    }
    hex
}

/// Build a snapshot from a discovered catalog: render each tool's document,
/// embed all documents through the provider, and count each schema's
/// tokens. Any embedding failure aborts the whole build; there are no
/// partial snapshots.
pub fn build(
    catalog: &Catalog,
    provider: &Provider,
    enrichments: &EnrichmentTable,
    tokenizer_spec: &TokenizerSpec,
) -> Result<IndexSnapshot, BuildError> {
    if catalog.tools.is_empty() {
        return Err(BuildError::EmptyCatalog);
    }
    let mut tools: Vec<_> = catalog.tools.iter().collect();
    tools.sort_by_key(|tool| tool.key());
    for pair in tools.windows(2) {
        if pair[0].key() == pair[1].key() {
            return Err(BuildError::DuplicateKey(pair[0].key()));
        }
    }

    let tokenizer = Tokenizer::new(tokenizer_spec)?;
    let documents: Vec<_> = tools
        .iter()
        .map(|tool| render(tool, enrichments.get(&tool.key())))
        .collect();
    let texts: Vec<&str> = documents.iter().map(|d| d.text.as_str()).collect();
    let vectors = provider.embed_batch(&texts)?;

    let entries: Vec<IndexedTool> = tools
        .iter()
        .zip(documents.iter())
        .zip(vectors)
        .map(|((tool, document), vector)| IndexedTool {
            tool_key: tool.key(),
            vector,
            document_text: document.text.clone(),
            schema_token_count: tokenizer.count(&tool.raw_schema_text),
            raw_schema_text: tool.raw_schema_text.clone(),
        })
        .collect();

    let hash = catalog_hash(&entries);
    Ok(IndexSnapshot {
        dimension: provider.dimension(),
        provider_id: provider.provider_id().to_string(),
        build_timestamp_ms: catalog.captured_at_ms,
        catalog_hash: hash,
        entries,
    })
}

impl IndexSnapshot {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, key: &ToolKey) -> bool {
        self.entry(key).is_some()
    }

    pub fn entry(&self, key: &ToolKey) -> Option<&IndexedTool> {
        self.entries
            .binary_search_by(|e| e.tool_key.cmp(key))
            .ok()
            .map(|i| &self.entries[i])
    }

    /// Sum of every entry's schema token count: the all-tools context cost.
    pub fn baseline_tokens(&self) -> u64 {
        self.entries.iter().map(|e| e.schema_token_count).sum()
    }

    /// Exact top-k search. Every entry is scored; entries below `threshold`
    /// are dropped before truncation; the survivors are ordered by score
    /// descending with ties broken by tool key ascending, and the first `k`
    /// returned. An empty result under a threshold is the caller's cue to
    /// fall back (see the pipeline module).
    pub fn search(
        &self,
        query: &EmbeddingVector,
        k: usize,
        threshold: Option<f32>,
    ) -> Result<Vec<RankedTool>, SearchError> {
        if k == 0 {
            return Err(SearchError::ZeroK);
        }
        if query.dimension() != self.dimension {
            return Err(SearchError::DimensionMismatch {
                query: query.dimension(),
                index: self.dimension,
            });
        }
        let mut scored: Vec<RankedTool> = self
            .entries
            .iter()
            .map(|entry| RankedTool {
                key: entry.tool_key.clone(),
                score: dot(&entry.vector.values, &query.values),
            })
            .filter(|ranked| threshold.is_none_or(|t| ranked.score >= t))
            .collect();
        scored.sort_by(|a, b| {
            b.score
                .total_cmp(&a.score)
                .then_with(|| a.key.cmp(&b.key))
        });
        scored.truncate(k);
        Ok(scored)
    }

    /// Human-inspectable listing: one line per entry with the namespaced
    /// key, schema token count, and the first 8 vector components.
    pub fn export_text(&self) -> String {
        let mut out = String::new();
        for entry in &self.entries {
            let prefix: Vec<String> = entry
                .vector
                .values
                .iter()
                .take(8)
                .map(|v| format!("{v:.6}"))
                .collect();
            out.push_str(&format!(
                "{}\ttokens={}\tv[..8]=[{}]\n",
                entry.tool_key,
                entry.schema_token_count,
                prefix.join(", ")
            ));
        }
        out
    }
}
