//! Benchmark dataset loading and validation.
//!
//! A dataset is one JSON document: the catalog digest it was labeled
//! against, then a list of query records. Every relevant key must resolve
//! against the index snapshot, so a dataset cannot silently drift away
//! from the catalog it grades.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::index::IndexSnapshot;
use crate::mcp::ToolKey;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("failed to read dataset {path}: {reason}")]
    Unreadable { path: String, reason: String },
    #[error("dataset does not parse: {0}")]
    Parse(String),
    #[error("dataset catalog digest {dataset} does not match index catalog {index}")]
    CatalogMismatch { dataset: String, index: String },
    #[error("query {query_id}: relevant tool {key} is not in the catalog")]
    UnknownTool { query_id: String, key: ToolKey },
    #[error("duplicate query_id {0}")]
    DuplicateQueryId(String),
    #[error("query {0}: relevant set must be non-empty")]
    EmptyRelevant(String),
    #[error("query {query_id}: {reason}")]
    Invalid { query_id: String, reason: String },
}

/// The four query categories the benchmark distinguishes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QueryType {
    Simple,
    Task,
    Ambiguous,
    Edge,
}

/// One labeled query: its text, the server whose query set it belongs to,
/// and the ground-truth relevant tools.
#[derive(Debug, Clone)]
pub struct BenchmarkQuery {
    pub query_id: String,
    pub text: String,
    pub server_tag: String,
    pub query_type: QueryType,
    pub relevant: BTreeSet<ToolKey>,
}

#[derive(Debug, Serialize, Deserialize)]
struct DatasetFile {
    catalog_hash: String,
    queries: Vec<QueryRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
struct QueryRecord {
    query_id: String,
    text: String,
    server_tag: String,
    query_type: QueryType,
    relevant: Vec<String>,
}

/// Parse and validate a dataset against the snapshot it will be evaluated
/// on. Returned queries are in file order.
pub fn load_dataset(
    path: &Path,
    snapshot: &IndexSnapshot,
) -> Result<Vec<BenchmarkQuery>, DatasetError> {
    let text = std::fs::read_to_string(path).map_err(|e| DatasetError::Unreadable {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    let file: DatasetFile =
        serde_json::from_str(&text).map_err(|e| DatasetError::Parse(e.to_string()))?;

    if file.catalog_hash != snapshot.catalog_hash {
        return Err(DatasetError::CatalogMismatch {
            dataset: file.catalog_hash,
            index: snapshot.catalog_hash.clone(),
        });
    }

    let mut seen_ids = BTreeSet::new();
    let mut queries = Vec::with_capacity(file.queries.len());
    for record in file.queries {
        if !seen_ids.insert(record.query_id.clone()) {
            return Err(DatasetError::DuplicateQueryId(record.query_id));
        }
        if record.text.trim().is_empty() {
            return Err(DatasetError::Invalid {
                query_id: record.query_id,
                reason: "query text is empty".into(),
            });
        }
        if record.relevant.is_empty() {
            return Err(DatasetError::EmptyRelevant(record.query_id));
        }
        let mut relevant = BTreeSet::new();
        for raw in &record.relevant {
            let key: ToolKey = raw.parse().map_err(|reason| DatasetError::Invalid {
                query_id: record.query_id.clone(),
                reason,
            })?;
            if !snapshot.contains(&key) {
                return Err(DatasetError::UnknownTool {
                    query_id: record.query_id,
                    key,
                });
            }
            relevant.insert(key);
        }
        queries.push(BenchmarkQuery {
            query_id: record.query_id,
            text: record.text,
            server_tag: record.server_tag,
            query_type: record.query_type,
            relevant,
        });
    }
    Ok(queries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::document::EnrichmentTable;
    use crate::embedding::{Provider, ProviderSpec};
    use crate::index::build;
    use crate::mcp::{Catalog, ToolSchema};
    use crate::tokens::TokenizerSpec;
    use std::io::Write as _;

    fn snapshot() -> IndexSnapshot {
        let provider = Provider::new(&ProviderSpec::reference(32)).unwrap();
        let tools = vec![
            ToolSchema {
                server_id: "clock".into(),
                name: "get_time".into(),
                description: "Returns the current time".into(),
                parameters: vec![],
                raw_schema_text: r#"{"name":"get_time"}"#.into(),
            },
            ToolSchema {
                server_id: "files".into(),
                name: "read_file".into(),
                description: "Read a file".into(),
                parameters: vec![],
                raw_schema_text: r#"{"name":"read_file"}"#.into(),
            },
        ];
        build(
            &Catalog {
                tools,
                captured_at_ms: 0,
                diagnostics: vec![],
            },
            &provider,
            &EnrichmentTable::empty(),
            &TokenizerSpec::WhitespacePunct,
        )
        .unwrap()
    }

    fn write_dataset(json: &str) -> tempfile::NamedTempFile {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        write!(file, "{json}").unwrap();
        file
    }

    fn dataset_json(catalog_hash: &str, queries: &str) -> String {
        format!(r#"{{"catalog_hash":"{catalog_hash}","queries":[{queries}]}}"#)
    }

    const QUERY_A: &str = r#"{"query_id":"q1","text":"what time is it","server_tag":"clock","query_type":"simple","relevant":["clock.get_time"]}"#;

    #[test]
    fn loads_valid_dataset() {
        let snap = snapshot();
        let file = write_dataset(&dataset_json(&snap.catalog_hash, QUERY_A));
        let queries = load_dataset(file.path(), &snap).unwrap();
        assert_eq!(queries.len(), 1);
        assert_eq!(queries[0].query_id, "q1");
        assert_eq!(queries[0].query_type, QueryType::Simple);
        assert!(queries[0]
            .relevant
            .contains(&ToolKey::new("clock", "get_time")));
    }

    #[test]
    fn rejects_catalog_digest_mismatch() {
        let snap = snapshot();
        let file = write_dataset(&dataset_json(&"0".repeat(64), QUERY_A));
        assert!(matches!(
            load_dataset(file.path(), &snap),
            Err(DatasetError::CatalogMismatch { .. })
        ));
    }

    #[test]
    fn rejects_unknown_tool_naming_the_key() {
        let snap = snapshot();
        let bad = r#"{"query_id":"q1","text":"x","server_tag":"clock","query_type":"simple","relevant":["clock.missing_tool"]}"#;
        let file = write_dataset(&dataset_json(&snap.catalog_hash, bad));
        match load_dataset(file.path(), &snap) {
            Err(DatasetError::UnknownTool { query_id, key }) => {
                assert_eq!(query_id, "q1");
                assert_eq!(key, ToolKey::new("clock", "missing_tool"));
            }
            other => panic!("expected UnknownTool, got {other:?}"),
        }
    }

    #[test]
    fn rejects_duplicate_query_id() {
        let snap = snapshot();
        let queries = format!("{QUERY_A},{QUERY_A}");
        let file = write_dataset(&dataset_json(&snap.catalog_hash, &queries));
        assert!(matches!(
            load_dataset(file.path(), &snap),
            Err(DatasetError::DuplicateQueryId(id)) if id == "q1"
        ));
    }

    #[test]
    fn accepts_a_benchmark_shaped_dataset() {
        // 140 queries spread over five server tags, like the benchmark
        // this harness is built to grade
        let snap = snapshot();
        let tags = ["filesystem", "mysql", "slack", "github", "timeweather"];
        let queries: Vec<String> = (0..140)
            .map(|i| {
                format!(
                    r#"{{"query_id":"q{i:03}","text":"query {i}","server_tag":"{}","query_type":"task","relevant":["clock.get_time"]}}"#,
                    tags[i % tags.len()]
                )
            })
            .collect();
        let file = write_dataset(&dataset_json(&snap.catalog_hash, &queries.join(",")));
        let loaded = load_dataset(file.path(), &snap).unwrap();
        assert_eq!(loaded.len(), 140);
        let distinct_tags: std::collections::BTreeSet<&str> =
            loaded.iter().map(|q| q.server_tag.as_str()).collect();
        assert_eq!(distinct_tags.len(), 5);
    }

    #[test]
    fn rejects_empty_relevant_set() {
        let snap = snapshot();
        let bad = r#"{"query_id":"q2","text":"x","server_tag":"clock","query_type":"edge","relevant":[]}"#;
        let file = write_dataset(&dataset_json(&snap.catalog_hash, bad));
        assert!(matches!(
            load_dataset(file.path(), &snap),
            Err(DatasetError::EmptyRelevant(id)) if id == "q2"
        ));
    }
}
