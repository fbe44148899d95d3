//! Evaluation harness: run a labeled query set through the retrieval
//! pipeline at several K values and aggregate retrieval-quality, token-
//! efficiency, and latency metrics.
//!
//! Aggregate rows are emitted under both conventions — macro (mean of
//! per-server means) and micro (mean over all queries directly) — since
//! the two diverge whenever servers contribute unequal query counts.

mod dataset;
mod metrics;
mod report;

pub use dataset::{load_dataset, BenchmarkQuery, DatasetError, QueryType};
pub use metrics::{
    f1_score, first_relevant_rank, hit_rate, mrr_at_k, precision_at_k, recall_at_k, MetricError,
};
pub use report::{render_report, ReportError, ReportFormat};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::Provider;
use crate::index::IndexSnapshot;
use crate::mcp::ToolKey;
use crate::pipeline::{select_tools, PipelineError};

/// The K sweep the harness runs by default.
pub const DEFAULT_KS: [usize; 5] = [1, 2, 3, 5, 10];

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no K values supplied")]
    NoKs,
    #[error("K values must be at least 1")]
    ZeroK,
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("query {query_id}: {source}")]
    Query {
        query_id: String,
        source: PipelineError,
    },
    #[error(transparent)]
    Metric(#[from] MetricError),
}

/// What a metrics row aggregates over.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "scope", content = "server_tag")]
pub enum Scope {
    PerServer(String),
    /// Mean of per-server means.
    AggregateMacro,
    /// Mean over all queries directly.
    AggregateMicro,
}

/// One row of the evaluation report: every metric at one K for one scope.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsRow {
    #[serde(flatten)]
    pub scope: Scope,
    pub k: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub hit_rate: f64,
    pub mrr: f64,
    pub trr: f64,
    pub latency_ms_mean: f64,
    pub latency_ms_p95: f64,
}

/// Raw per-(query, k) outcome, kept for oracle checks and drill-down.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PerQueryResult {
    pub query_id: String,
    pub server_tag: String,
    pub k: usize,
    pub retrieved: Vec<ToolKey>,
    pub precision: f64,
    pub recall: f64,
    pub hit: bool,
    pub first_relevant_rank: Option<usize>,
    pub trr: f64,
    pub latency_ms: f64,
    pub fallback_applied: bool,
}

/// The complete evaluation output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsReport {
    pub catalog_hash: String,
    pub provider_id: String,
    pub catalog_size: usize,
    pub query_count: usize,
    pub ks: Vec<usize>,
    pub server_tags: Vec<String>,
    pub threshold: Option<f32>,
    pub rows: Vec<MetricsRow>,
    pub per_query: Vec<PerQueryResult>,
}

impl MetricsReport {
    pub fn row(&self, scope: &Scope, k: usize) -> Option<&MetricsRow> {
        self.rows.iter().find(|r| &r.scope == scope && r.k == k)
    }
}

/// Run every dataset query through `select_tools` at each K and fold the
/// per-query outcomes into per-server and aggregate rows. Queries are
/// processed in query_id order so aggregation is deterministic regardless
/// of dataset file order.
pub fn evaluate(
    snapshot: &IndexSnapshot,
    provider: &Provider,
    dataset: &[BenchmarkQuery],
    ks: &[usize],
    threshold: Option<f32>,
) -> Result<MetricsReport, EvalError> {
    if ks.is_empty() {
        return Err(EvalError::NoKs);
    }
    if ks.contains(&0) {
        return Err(EvalError::ZeroK);
    }
    if dataset.is_empty() {
        return Err(EvalError::EmptyDataset);
    }
    let mut ks: Vec<usize> = ks.to_vec();
    ks.sort_unstable();
    ks.dedup();

    let mut queries: Vec<&BenchmarkQuery> = dataset.iter().collect();
    queries.sort_by(|a, b| a.query_id.cmp(&b.query_id));

    let mut server_tags: Vec<String> = queries.iter().map(|q| q.server_tag.clone()).collect();
    server_tags.sort();
    server_tags.dedup();

    let mut per_query = Vec::with_capacity(queries.len() * ks.len());
    for &k in &ks {
        for query in &queries {
            let selection = select_tools(snapshot, provider, &query.text, k, threshold)
                .map_err(|source| EvalError::Query {
                    query_id: query.query_id.clone(),
                    source,
                })?;
            let retrieved: Vec<ToolKey> =
                selection.ranked.iter().map(|r| r.key.clone()).collect();
            let precision = precision_at_k(&retrieved, &query.relevant, k)?;
            let recall = recall_at_k(&retrieved, &query.relevant, k)?;
            let first_rank = first_relevant_rank(&retrieved, &query.relevant, k);
            per_query.push(PerQueryResult {
                query_id: query.query_id.clone(),
                server_tag: query.server_tag.clone(),
                k,
                retrieved,
                precision,
                recall,
                hit: first_rank.is_some(),
                first_relevant_rank: first_rank,
                trr: selection.trr,
                latency_ms: selection.retrieval_latency_ms,
                fallback_applied: selection.fallback_applied,
            });
        }
    }

    let mut rows = Vec::new();
    for &k in &ks {
        let at_k: Vec<&PerQueryResult> = per_query.iter().filter(|r| r.k == k).collect();

        let mut server_rows = Vec::with_capacity(server_tags.len());
        for tag in &server_tags {
            let subset: Vec<&PerQueryResult> = at_k
                .iter()
                .filter(|r| &r.server_tag == tag)
                .copied()
                .collect();
            let row = fold_rows(Scope::PerServer(tag.clone()), k, &subset)?;
            server_rows.push(row);
        }

        rows.push(macro_row(k, &server_rows));
        rows.push(fold_rows(Scope::AggregateMicro, k, &at_k)?);
        rows.extend(server_rows);
    }

    Ok(MetricsReport {
        catalog_hash: snapshot.catalog_hash.clone(),
        provider_id: snapshot.provider_id.clone(),
        catalog_size: snapshot.len(),
        query_count: queries.len(),
        ks,
        server_tags,
        threshold,
        rows,
        per_query,
    })
}

fn fold_rows(scope: Scope, k: usize, subset: &[&PerQueryResult]) -> Result<MetricsRow, EvalError> {
    let n = subset.len() as f64;
    debug_assert!(!subset.is_empty(), "scopes derive from queries, never empty");
    let precision = subset.iter().map(|r| r.precision).sum::<f64>() / n;
    let recall = subset.iter().map(|r| r.recall).sum::<f64>() / n;
    let hits: Vec<bool> = subset.iter().map(|r| r.hit).collect();
    let ranks: Vec<Option<usize>> = subset.iter().map(|r| r.first_relevant_rank).collect();
    let trr = subset.iter().map(|r| r.trr).sum::<f64>() / n;
    let latencies: Vec<f64> = subset.iter().map(|r| r.latency_ms).collect();
    Ok(MetricsRow {
        scope,
        k,
        precision,
        recall,
        f1: f1_score(precision, recall),
        hit_rate: hit_rate(&hits)?,
        mrr: mrr_at_k(&ranks, k)?,
        trr,
        latency_ms_mean: mean(&latencies),
        latency_ms_p95: p95(&latencies),
    })
}

fn macro_row(k: usize, server_rows: &[MetricsRow]) -> MetricsRow {
    let n = server_rows.len() as f64;
    let precision = server_rows.iter().map(|r| r.precision).sum::<f64>() / n;
    let recall = server_rows.iter().map(|r| r.recall).sum::<f64>() / n;
    MetricsRow {
        scope: Scope::AggregateMacro,
        k,
        precision,
        recall,
        f1: f1_score(precision, recall),
        hit_rate: server_rows.iter().map(|r| r.hit_rate).sum::<f64>() / n,
        mrr: server_rows.iter().map(|r| r.mrr).sum::<f64>() / n,
        trr: server_rows.iter().map(|r| r.trr).sum::<f64>() / n,
        latency_ms_mean: server_rows.iter().map(|r| r.latency_ms_mean).sum::<f64>() / n,
        latency_ms_p95: server_rows.iter().map(|r| r.latency_ms_p95).sum::<f64>() / n,
    }
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

/// Nearest-rank 95th percentile.
fn p95(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = ((0.95 * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::document::EnrichmentTable;
    use crate::embedding::ProviderSpec;
    use crate::index::build;
    use crate::mcp::{Catalog, ToolSchema};
    use crate::tokens::TokenizerSpec;
    use std::collections::BTreeSet;

    fn tool(server: &str, name: &str, description: &str) -> ToolSchema {
        ToolSchema {
            server_id: server.into(),
            name: name.into(),
            description: description.into(),
            parameters: vec![],
            raw_schema_text: format!(r#"{{"description":"{description}","name":"{name}"}}"#),
        }
    }

    fn fixture() -> (IndexSnapshot, Provider, Vec<BenchmarkQuery>) {
        let provider = Provider::new(&ProviderSpec::reference(128)).unwrap();
        let catalog = Catalog {
            tools: vec![
                tool("clock", "get_time", "Returns the current wall clock time"),
                tool("clock", "get_weather", "Current weather conditions for a city"),
                tool("files", "read_file", "Read the contents of a file from disk"),
                tool("files", "write_file", "Write new contents into a file"),
            ],
            captured_at_ms: 0,
            diagnostics: vec![],
        };
        let snapshot = build(
            &catalog,
            &provider,
            &EnrichmentTable::empty(),
            &TokenizerSpec::WhitespacePunct,
        )
        .unwrap();
        let query = |id: &str, text: &str, tag: &str, relevant: &[(&str, &str)]| BenchmarkQuery {
            query_id: id.into(),
            text: text.into(),
            server_tag: tag.into(),
            query_type: QueryType::Simple,
            relevant: relevant
                .iter()
                .map(|(s, n)| ToolKey::new(*s, *n))
                .collect::<BTreeSet<_>>(),
        };
        let dataset = vec![
            query("q1", "what time is it now", "clock", &[("clock", "get_time")]),
            query("q2", "weather conditions in the city", "clock", &[("clock", "get_weather")]),
            query("q3", "read the contents of a file", "files", &[("files", "read_file")]),
            query("q4", "write new contents into a file", "files", &[("files", "write_file")]),
        ];
        (snapshot, provider, dataset)
    }

    #[test]
    fn nearest_neighbor_dataset_scores_perfectly() {
        let (snapshot, provider, dataset) = fixture();
        let report = evaluate(&snapshot, &provider, &dataset, &[1, 2, 3], None).unwrap();
        for k in [1, 2, 3] {
            for scope in [Scope::AggregateMacro, Scope::AggregateMicro] {
                let row = report.row(&scope, k).unwrap();
                assert_eq!(row.hit_rate, 1.0, "hit rate at k={k}");
                assert_eq!(row.mrr, 1.0, "mrr at k={k}");
            }
        }
        let micro1 = report.row(&Scope::AggregateMicro, 1).unwrap();
        assert_eq!(micro1.precision, 1.0);
        assert_eq!(micro1.recall, 1.0);
        assert_eq!(micro1.f1, 1.0);
    }

    #[test]
    fn rows_cover_every_scope_and_k() {
        let (snapshot, provider, dataset) = fixture();
        let report = evaluate(&snapshot, &provider, &dataset, &DEFAULT_KS, None).unwrap();
        assert_eq!(report.ks, vec![1, 2, 3, 5, 10]);
        assert_eq!(report.server_tags, vec!["clock", "files"]);
        // 2 servers + 2 aggregates, per k
        assert_eq!(report.rows.len(), 5 * 4);
        assert_eq!(report.per_query.len(), 5 * 4);
        for row in &report.rows {
            for value in [row.precision, row.recall, row.f1, row.hit_rate, row.mrr, row.trr] {
                assert!((0.0..=1.0).contains(&value), "{value} out of range");
            }
            assert!(row.latency_ms_mean >= 0.0);
        }
    }

    #[test]
    fn precision_times_k_is_the_integral_hit_count() {
        let (snapshot, provider, dataset) = fixture();
        let report = evaluate(&snapshot, &provider, &dataset, &DEFAULT_KS, None).unwrap();
        for record in &report.per_query {
            let product = record.precision * record.k as f64;
            assert!(
                (product - product.round()).abs() < 1e-9,
                "p@k * k = {product} is not integral"
            );
        }
    }

    #[test]
    fn metrics_are_deterministic_across_runs() {
        let (snapshot, provider, dataset) = fixture();
        let a = evaluate(&snapshot, &provider, &dataset, &[1, 3], None).unwrap();
        let b = evaluate(&snapshot, &provider, &dataset, &[1, 3], None).unwrap();
        for (ra, rb) in a.rows.iter().zip(&b.rows) {
            assert_eq!(ra.scope, rb.scope);
            assert_eq!(ra.precision, rb.precision);
            assert_eq!(ra.mrr, rb.mrr);
            assert_eq!(ra.trr, rb.trr);
        }
    }

    #[test]
    fn dataset_order_does_not_change_results() {
        let (snapshot, provider, mut dataset) = fixture();
        let forward = evaluate(&snapshot, &provider, &dataset, &[2], None).unwrap();
        dataset.reverse();
        let reversed = evaluate(&snapshot, &provider, &dataset, &[2], None).unwrap();
        for (ra, rb) in forward.rows.iter().zip(&reversed.rows) {
            assert_eq!(ra.scope, rb.scope);
            assert_eq!(ra.precision, rb.precision);
            assert_eq!(ra.hit_rate, rb.hit_rate);
        }
    }

    #[test]
    fn rejects_bad_k_sets_and_empty_dataset() {
        let (snapshot, provider, dataset) = fixture();
        assert!(matches!(
            evaluate(&snapshot, &provider, &dataset, &[], None),
            Err(EvalError::NoKs)
        ));
        assert!(matches!(
            evaluate(&snapshot, &provider, &dataset, &[0, 3], None),
            Err(EvalError::ZeroK)
        ));
        assert!(matches!(
            evaluate(&snapshot, &provider, &[], &[3], None),
            Err(EvalError::EmptyDataset)
        ));
    }

    #[test]
    fn pipeline_failures_carry_query_context() {
        let (snapshot, _, dataset) = fixture();
        let mut foreign_spec = ProviderSpec::reference(128);
        foreign_spec.provider_id = "other".into();
        let foreign = Provider::new(&foreign_spec).unwrap();
        match evaluate(&snapshot, &foreign, &dataset, &[1], None) {
            Err(EvalError::Query { query_id, .. }) => assert_eq!(query_id, "q1"),
            other => panic!("expected query-scoped error, got {other:?}"),
        }
    }

    #[test]
    fn p95_nearest_rank() {
        assert_eq!(p95(&[5.0]), 5.0);
        let values: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(p95(&values), 95.0);
        assert_eq!(p95(&[3.0, 1.0, 2.0]), 3.0);
    }
}
