//! Retrieval-quality metric primitives.
//!
//! All inputs are binary-relevance: a ranked list of retrieved tool keys
//! and a set of relevant ones. Queries with no relevant tool inside the
//! top-k contribute 0 to MRR (the truncated convention), which is what
//! makes MRR grow with k.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::mcp::ToolKey;

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("k must be at least 1")]
    ZeroK,
    #[error("relevant set must be non-empty")]
    EmptyRelevant,
    #[error("query set must be non-empty")]
    EmptyQuerySet,
}

/// P@K: relevant hits in the top k divided by k. The divisor stays k even
/// when fewer than k items were retrieved.
pub fn precision_at_k(
    retrieved: &[ToolKey],
    relevant: &BTreeSet<ToolKey>,
    k: usize,
) -> Result<f64, MetricError> {
    if k == 0 {
        return Err(MetricError::ZeroK);
    }
    Ok(hits_in_top_k(retrieved, relevant, k) as f64 / k as f64)
}

/// R@K: relevant hits in the top k divided by the size of the relevant set.
pub fn recall_at_k(
    retrieved: &[ToolKey],
    relevant: &BTreeSet<ToolKey>,
    k: usize,
) -> Result<f64, MetricError> {
    if k == 0 {
        return Err(MetricError::ZeroK);
    }
    if relevant.is_empty() {
        return Err(MetricError::EmptyRelevant);
    }
    Ok(hits_in_top_k(retrieved, relevant, k) as f64 / relevant.len() as f64)
}

/// Harmonic mean of precision and recall; 0 when both vanish.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Fraction of queries whose top-k contained at least one relevant tool.
pub fn hit_rate(hits: &[bool]) -> Result<f64, MetricError> {
    if hits.is_empty() {
        return Err(MetricError::EmptyQuerySet);
    }
    Ok(hits.iter().filter(|h| **h).count() as f64 / hits.len() as f64)
}

/// Mean reciprocal rank of the first relevant tool, truncated at k: a
/// query whose first relevant tool sits beyond the top-k (recorded as
/// `None`) contributes 0.
pub fn mrr_at_k(first_relevant_ranks: &[Option<usize>], k: usize) -> Result<f64, MetricError> {
    if k == 0 {
        return Err(MetricError::ZeroK);
    }
    if first_relevant_ranks.is_empty() {
        return Err(MetricError::EmptyQuerySet);
    }
    debug_assert!(
        first_relevant_ranks
            .iter()
            .all(|r| r.is_none_or(|rank| rank >= 1 && rank <= k)),
        "ranks beyond k must be recorded as None"
    );
    let sum: f64 = first_relevant_ranks
        .iter()
        .map(|rank| rank.map_or(0.0, |r| 1.0 / r as f64))
        .sum();
    Ok(sum / first_relevant_ranks.len() as f64)
}

/// 1-based rank of the first retrieved key that is relevant, looking at
/// the top k only.
pub fn first_relevant_rank(
    retrieved: &[ToolKey],
    relevant: &BTreeSet<ToolKey>,
    k: usize,
) -> Option<usize> {
    retrieved
        .iter()
        .take(k)
        .position(|key| relevant.contains(key))
        .map(|i| i + 1)
}

fn hits_in_top_k(retrieved: &[ToolKey], relevant: &BTreeSet<ToolKey>, k: usize) -> usize {
    retrieved
        .iter()
        .take(k)
        .filter(|key| relevant.contains(key))
        .count()
}
