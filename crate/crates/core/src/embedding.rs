//! Text embedding providers and dot-product similarity.
//!
//! Two providers are supported. The reference-local provider is a pure,
//! deterministic test double: a hashed character-trigram plus word-unigram
//! bag, TF-weighted and L2-normalized, intended to give plausible lexical
//! neighborhoods so retrieval behaves meaningfully offline. The remote
//! provider POSTs to an embeddings endpoint in the de-facto convention
//! (`{"model": ..., "input": [...]}` with an ordered `data[].embedding`
//! response), batching up to [`REMOTE_BATCH_SIZE`] texts per request.
//!
//! Every vector leaving [`Provider::embed`] is L2-normalized, so the dot
//! product in [`similarity`] equals cosine similarity and thresholds are
//! scale-free.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Maximum texts per remote embedding request.
pub const REMOTE_BATCH_SIZE: usize = 64;

/// Attempts for a retriable remote failure before giving up.
const REMOTE_RETRIES: u32 = 3;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("cannot embed empty text")]
    EmptyText,
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    /// Transient transport failure; retrying may succeed.
    #[error("embedding transport failure (retriable): {0}")]
    Transport(String),
    /// The endpoint answered but the payload is unusable; retrying will not help.
    #[error("malformed embedding response: {0}")]
    MalformedResponse(String),
    #[error("embedding provider configuration: {0}")]
    Config(String),
}

impl EmbedError {
    pub fn is_retriable(&self) -> bool {
        matches!(self, EmbedError::Transport(_))
    }
}

/// A fixed-dimension, L2-normalized dense vector with provider provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub values: Vec<f32>,
    pub provider_id: String,
}

impl EmbeddingVector {
    pub fn dimension(&self) -> usize {
        self.values.len()
    }

    pub fn l2_norm(&self) -> f64 {
        self.values
            .iter()
            .map(|v| f64::from(*v) * f64::from(*v))
            .sum::<f64>()
            .sqrt()
    }
}

/// Which embedding backend to use and its fixed output dimension.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProviderSpec {
    pub provider_id: String,
    pub kind: ProviderKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum ProviderKind {
    ReferenceLocal {
        dimension: usize,
    },
    RemoteHttp {
        dimension: usize,
        model_name: String,
        url: String,
        /// Name of the environment variable holding the bearer token.
        auth_token_env: Option<String>,
    },
}

impl ProviderSpec {
    /// The deterministic local provider. Its id is always `reference` so an
    /// index built from it can be re-opened without extra configuration.
    pub fn reference(dimension: usize) -> Self {
        Self {
            provider_id: "reference".into(),
            kind: ProviderKind::ReferenceLocal { dimension },
        }
    }

    pub fn dimension(&self) -> usize {
        match &self.kind {
            ProviderKind::ReferenceLocal { dimension } => *dimension,
            ProviderKind::RemoteHttp { dimension, .. } => *dimension,
        }
    }
}

/// A ready-to-call embedding backend constructed from a [`ProviderSpec`].
pub struct Provider {
    spec: ProviderSpec,
    remote: Option<RemoteState>,
}

struct RemoteState {
    client: reqwest::blocking::Client,
    url: String,
    model_name: String,
    bearer: Option<String>,
}

impl Provider {
    pub fn new(spec: &ProviderSpec) -> Result<Self, EmbedError> {
        if spec.dimension() == 0 {
            return Err(EmbedError::Config("dimension must be positive".into()));
        }
        let remote = match &spec.kind {
            ProviderKind::ReferenceLocal { .. } => None,
            ProviderKind::RemoteHttp {
                url,
                model_name,
                auth_token_env,
                ..
            } => {
                let bearer = match auth_token_env {
                    Some(var) => Some(std::env::var(var).map_err(|_| {
                        EmbedError::Config(format!("auth token env var `{var}` is not set"))
                    })?),
                    None => None,
                };
                let client = reqwest::blocking::Client::builder()
                    .timeout(Duration::from_secs(60))
                    .build()
                    .map_err(|e| EmbedError::Config(format!("http client: {e}")))?;
                Some(RemoteState {
                    client,
                    url: url.clone(),
                    model_name: model_name.clone(),
                    bearer,
                })
            }
        };
        Ok(Self {
            spec: spec.clone(),
            remote,
        })
    }

    pub fn spec(&self) -> &ProviderSpec {
        &self.spec
    }

    pub fn provider_id(&self) -> &str {
        &self.spec.provider_id
    }

    pub fn dimension(&self) -> usize {
        self.spec.dimension()
    }

    /// Embed one text into an L2-normalized vector of the provider's
    /// dimension. Text that is empty after trimming is rejected.
    pub fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbedError> {
        Ok(self.embed_batch(&[text])?.pop().expect("one text in, one vector out"))
    }

    /// Embed several texts, preserving order. The remote backend chunks the
    /// input into requests of at most [`REMOTE_BATCH_SIZE`] texts.
    pub fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        for text in texts {
            if text.trim().is_empty() {
                return Err(EmbedError::EmptyText);
            }
        }
        match &self.remote {
            None => Ok(texts
                .iter()
                .map(|t| reference_embed(t, self.dimension(), self.provider_id()))
                .collect()),
            Some(remote) => {
                let mut out = Vec::with_capacity(texts.len());
                for chunk in texts.chunks(REMOTE_BATCH_SIZE) {
                    out.extend(self.remote_batch(remote, chunk)?);
                }
                Ok(out)
            }
        }
    }

    fn remote_batch(
        &self,
        remote: &RemoteState,
        texts: &[&str],
    ) -> Result<Vec<EmbeddingVector>, EmbedError> {
        let mut attempt = 0;
        loop {
            attempt += 1;
            match self.remote_request(remote, texts) {
                Ok(vectors) => return Ok(vectors),
                Err(err) if err.is_retriable() && attempt < REMOTE_RETRIES => {
                    std::thread::sleep(Duration::from_millis(100 << attempt));
                }
                Err(err) => return Err(err),
            }
        }
    }

    fn remote_request(
        &self,
        remote: &RemoteState,
        texts: &[&str],
    ) -> Result<Vec<EmbeddingVector>, EmbedError> {
        #[derive(Serialize)]
        struct Request<'a> {
            model: &'a str,
            input: &'a [&'a str],
        }
        #[derive(Deserialize)]
        struct Response {
            data: Vec<Item>,
        }
        #[derive(Deserialize)]
        struct Item {
            embedding: Vec<f32>,
            index: Option<usize>,
        }

        let mut builder = remote
            .client
            .post(&remote.url)
            .json(&Request {
                model: &remote.model_name,
                input: texts,
            });
        if let Some(token) = &remote.bearer {
            builder = builder.bearer_auth(token);
        }
        let response = builder
            .send()
            .map_err(|e| EmbedError::Transport(e.to_string()))?;
        let status = response.status();
        if status.is_server_error() {
            return Err(EmbedError::Transport(format!("status {status}")));
        }
        if !status.is_success() {
            let body = response.text().unwrap_or_default();
            return Err(EmbedError::MalformedResponse(format!(
                "status {status}: {body}"
            )));
        }
        let parsed: Response = response
            .json()
            .map_err(|e| EmbedError::MalformedResponse(e.to_string()))?;
        if parsed.data.len() != texts.len() {
            return Err(EmbedError::MalformedResponse(format!(
                "{} embeddings for {} inputs",
                parsed.data.len(),
                texts.len()
            )));
        }
        let mut items: Vec<(usize, Vec<f32>)> = parsed
            .data
            .into_iter()
            .enumerate()
            .map(|(i, item)| (item.index.unwrap_or(i), item.embedding))
            .collect();
        items.sort_by_key(|(i, _)| *i);

        let mut vectors = Vec::with_capacity(items.len());
        for (_, values) in items {
            if values.len() != self.dimension() {
                return Err(EmbedError::DimensionMismatch {
                    expected: self.dimension(),
                    actual: values.len(),
                });
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(EmbedError::MalformedResponse(
                    "embedding contains non-finite values".into(),
                ));
            }
            vectors.push(normalize(values, self.provider_id()));
        }
        Ok(vectors)
    }
}

/// Dot product of two vectors of equal dimension. With normalized inputs
/// this is cosine similarity in [-1, 1] up to rounding. Accumulation is a
/// fixed-order sequential fold so equal inputs score identically across
/// runs and platforms.
pub fn similarity(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f32, EmbedError> {
    if a.dimension() != b.dimension() {
        return Err(EmbedError::DimensionMismatch {
            expected: a.dimension(),
            actual: b.dimension(),
        });
    }
    Ok(dot(&a.values, &b.values))
}

pub(crate) fn dot(a: &[f32], b: &[f32]) -> f32 {
    let mut acc = 0.0f32;
    for (x, y) in a.iter().zip(b.iter()) {
        acc += x * y;
    }
    acc
}

// FNV-1a, fixed offset and prime, so feature bucketing never varies across
// platforms or releases (std's hasher makes no such promise).
const FNV_OFFSET: u64 = 0xcbf29ce484222325;
const FNV_PRIME: u64 = 0x100000001b3;

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = FNV_OFFSET;
    for byte in bytes {
        hash ^= u64::from(*byte);
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}

/// The deterministic local embedder: lowercase the text, hash every word
/// unigram and every character trigram into one of `dimension` buckets,
/// accumulate term frequencies, L2-normalize.
fn reference_embed(text: &str, dimension: usize, provider_id: &str) -> EmbeddingVector {
    let lowered = text.to_lowercase();
    let mut counts = vec![0.0f32; dimension];

    for word in lowered.split(|c: char| !c.is_alphanumeric()) {
        if !word.is_empty() {
            bump_feature(&mut counts, b'w', word.as_bytes());
        }
    }
    let chars: Vec<char> = lowered.chars().collect();
    for window in chars.windows(3) {
        let gram: String = window.iter().collect();
        bump_feature(&mut counts, b'g', gram.as_bytes());
    }
    // Inputs made purely of separators ("_", "; ") yield no word and no
    // trigram; fall back to the raw text as a single feature so the vector
    // is never all-zero.
    if counts.iter().all(|c| *c == 0.0) {
        bump_feature(&mut counts, b'r', lowered.as_bytes());
    }

    normalize(counts, provider_id)
}

fn bump_feature(counts: &mut [f32], tag: u8, token: &[u8]) {
    let mut bytes = Vec::with_capacity(token.len() + 2);
    bytes.push(tag);
    bytes.push(b':');
    bytes.extend_from_slice(token);
    let bucket = (fnv1a(&bytes) % counts.len() as u64) as usize;
    counts[bucket] += 1.0;
}

fn normalize(mut values: Vec<f32>, provider_id: &str) -> EmbeddingVector {
    let norm = values
        .iter()
        .map(|v| f64::from(*v) * f64::from(*v))
        .sum::<f64>()
        .sqrt();
    if norm > 0.0 {
        for v in &mut values {
            *v = (f64::from(*v) / norm) as f32;
        }
    }
    EmbeddingVector {
        values,
        provider_id: provider_id.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference(dimension: usize) -> Provider {
        Provider::new(&ProviderSpec::reference(dimension)).unwrap()
    }

    fn unit(dimension: usize, axis: usize) -> EmbeddingVector {
        let mut values = vec![0.0; dimension];
        values[axis] = 1.0;
        EmbeddingVector {
            values,
            provider_id: "test".into(),
        }
    }

    #[test]
    fn reference_embed_is_deterministic() {
        let provider = reference(64);
        let a = provider.embed("abc").unwrap();
        let b = provider.embed("abc").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn embed_rejects_empty_text() {
        let provider = reference(64);
        assert!(matches!(provider.embed(""), Err(EmbedError::EmptyText)));
        assert!(matches!(provider.embed("   "), Err(EmbedError::EmptyText)));
    }

    #[test]
    fn vectors_are_unit_norm() {
        let provider = reference(128);
        for text in ["read file", "a", "post a message to the slack channel"] {
            let v = provider.embed(text).unwrap();
            assert_eq!(v.dimension(), 128);
            assert!((v.l2_norm() - 1.0).abs() <= 1e-6, "norm for {text:?}");
        }
    }

    #[test]
    fn lexical_neighbors_score_higher_than_strangers() {
        let provider = reference(256);
        let base = provider.embed("read file").unwrap();
        let near = provider.embed("read a file").unwrap();
        let far = provider.embed("post slack message").unwrap();
        let near_score = similarity(&base, &near).unwrap();
        let far_score = similarity(&base, &far).unwrap();
        assert!(
            near_score > far_score,
            "expected {near_score} > {far_score}"
        );
    }

    #[test]
    fn self_similarity_of_unit_vector_is_one() {
        let v = unit(8, 3);
        assert_eq!(similarity(&v, &v).unwrap(), 1.0);
    }

    #[test]
    fn orthogonal_basis_vectors_score_zero() {
        let e1 = unit(8, 0);
        let e2 = unit(8, 1);
        assert_eq!(similarity(&e1, &e2).unwrap(), 0.0);
    }

    #[test]
    fn similarity_matches_hand_arithmetic() {
        let a = EmbeddingVector {
            values: vec![0.6, 0.8],
            provider_id: "test".into(),
        };
        let b = EmbeddingVector {
            values: vec![0.8, 0.6],
            provider_id: "test".into(),
        };
        let score = similarity(&a, &b).unwrap();
        assert!((f64::from(score) - 0.96).abs() <= 1e-6, "got {score}");
    }

    #[test]
    fn similarity_is_symmetric() {
        let provider = reference(64);
        let a = provider.embed("list the tables").unwrap();
        let b = provider.embed("show current weather").unwrap();
        assert_eq!(
            similarity(&a, &b).unwrap(),
            similarity(&b, &a).unwrap()
        );
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let a = unit(4, 0);
        let b = unit(8, 0);
        assert!(matches!(
            similarity(&a, &b),
            Err(EmbedError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn batch_preserves_order_and_matches_single_embeds() {
        let provider = reference(64);
        let batch = provider.embed_batch(&["alpha", "beta", "gamma"]).unwrap();
        assert_eq!(batch.len(), 3);
        assert_eq!(batch[0], provider.embed("alpha").unwrap());
        assert_eq!(batch[2], provider.embed("gamma").unwrap());
    }

    #[test]
    fn zero_dimension_rejected() {
        assert!(matches!(
            Provider::new(&ProviderSpec::reference(0)),
            Err(EmbedError::Config(_))
        ));
    }
}
