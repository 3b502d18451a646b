//! Self-consistency selection: embed k candidate texts, take the centroid
//! of their embeddings, and keep the candidate with the highest cosine
//! similarity to it. Ties go to the lowest index.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::digest::hash64;

/// Dimension of the built-in hashed term-frequency embedder.
pub const FALLBACK_DIMENSION: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    values: Vec<f64>,
    norm: f64,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Self {
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        EmbeddingVector { values, norm }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn dimension(&self) -> usize {
        self.values.len()
    }
}

impl From<Vec<f64>> for EmbeddingVector {
    fn from(values: Vec<f64>) -> Self {
        EmbeddingVector::new(values)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConsistencyError {
    #[error("no input to embed or select from")]
    EmptyInput,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("embedding provider error: {0}")]
    EmbeddingProviderError(String),
}

pub trait Embedder: Send + Sync {
    fn embed(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, ConsistencyError>;
}

/// Deterministic offline embedder: lowercase alphanumeric word tokens are
/// bucketed by a 64-bit hash into a fixed number of counters, and the count
/// vector is L2-normalized. Empty text maps to the zero vector.
#[derive(Debug, Clone, Copy)]
pub struct HashedTfEmbedder {
    dimension: usize,
}

impl HashedTfEmbedder {
    pub fn new(dimension: usize) -> Self {
        assert!(dimension > 0, "embedding dimension must be positive");
        HashedTfEmbedder { dimension }
    }

    pub fn embed_one(&self, text: &str) -> EmbeddingVector {
        let mut counts = vec![0.0f64; self.dimension];
        for token in tokens(text) {
            let bucket = (hash64(&[&token]) % self.dimension as u64) as usize;
            counts[bucket] += 1.0;
        }
        let norm = counts.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            counts.iter_mut().for_each(|v| *v /= norm);
        }
        EmbeddingVector::new(counts)
    }
}

impl Default for HashedTfEmbedder {
    fn default() -> Self {
        HashedTfEmbedder::new(FALLBACK_DIMENSION)
    }
}

impl Embedder for HashedTfEmbedder {
    fn embed(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, ConsistencyError> {
        if texts.is_empty() {
            return Err(ConsistencyError::EmptyInput);
        }
        Ok(texts.iter().map(|t| self.embed_one(t)).collect())
    }
}

fn tokens(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
}

/// Remote embedding service: `POST {"texts": [...]}` answered by
/// `{"dimension": d, "vectors": [[...], ...]}`.
#[derive(Debug, Clone)]
pub struct HttpEmbedder {
    endpoint: String,
    bearer: Option<String>,
    timeout: Duration,
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    texts: &'a [&'a str],
}

#[derive(Deserialize)]
struct EmbedResponse {
    dimension: usize,
    vectors: Vec<Vec<f64>>,
}

impl HttpEmbedder {
    pub fn new(endpoint: impl Into<String>, bearer: Option<String>) -> Self {
        HttpEmbedder {
            endpoint: endpoint.into(),
            bearer,
            timeout: Duration::from_secs(60),
        }
    }
}

impl Embedder for HttpEmbedder {
    fn embed(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, ConsistencyError> {
        if texts.is_empty() {
            return Err(ConsistencyError::EmptyInput);
        }
        let provider_err = |e: String| ConsistencyError::EmbeddingProviderError(e);
        let client = reqwest::blocking::Client::builder()
            .timeout(self.timeout)
            .build()
            .map_err(|e| provider_err(e.to_string()))?;
        let mut req = client.post(&self.endpoint).json(&EmbedRequest { texts });
        if let Some(token) = &self.bearer {
            req = req.bearer_auth(token);
        }
        let resp = req.send().map_err(|e| provider_err(e.to_string()))?;
        if !resp.status().is_success() {
            return Err(provider_err(format!("HTTP {}", resp.status())));
        }
        let body: EmbedResponse = resp.json().map_err(|e| provider_err(e.to_string()))?;
        if body.vectors.len() != texts.len() {
            return Err(provider_err(format!(
                "asked for {} vectors, got {}",
                texts.len(),
                body.vectors.len()
            )));
        }
        body.vectors
            .into_iter()
            .map(|v| {
                if v.len() != body.dimension {
                    Err(ConsistencyError::DimensionMismatch {
                        expected: body.dimension,
                        found: v.len(),
                    })
                } else {
                    Ok(EmbeddingVector::new(v))
                }
            })
            .collect()
    }
}

/// Component-wise mean.
pub fn centroid(vectors: &[EmbeddingVector]) -> Result<EmbeddingVector, ConsistencyError> {
    let first = vectors.first().ok_or(ConsistencyError::EmptyInput)?;
    let dim = first.dimension();
    let mut sum = vec![0.0f64; dim];
    for v in vectors {
        if v.dimension() != dim {
            return Err(ConsistencyError::DimensionMismatch {
                expected: dim,
                found: v.dimension(),
            });
        }
        for (acc, x) in sum.iter_mut().zip(&v.values) {
            *acc += x;
        }
    }
    let k = vectors.len() as f64;
    Ok(EmbeddingVector::new(sum.into_iter().map(|s| s / k).collect()))
}

/// `a·b / (‖a‖‖b‖)`, or 0 when either vector has zero norm.
pub fn cosine(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, ConsistencyError> {
    if a.dimension() != b.dimension() {
        return Err(ConsistencyError::DimensionMismatch {
            expected: a.dimension(),
            found: b.dimension(),
        });
    }
    if a.norm == 0.0 || b.norm == 0.0 {
        return Ok(0.0);
    }
    let dot: f64 = a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum();
    Ok(dot / (a.norm * b.norm))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub chosen_index: usize,
    pub chosen_text: String,
    pub similarity_to_centroid: f64,
    pub all_similarities: Vec<f64>,
}

/// Index of the vector most similar to the centroid, and every similarity.
pub fn select_nearest_centroid(
    vectors: &[EmbeddingVector],
) -> Result<(usize, Vec<f64>), ConsistencyError> {
    let center = centroid(vectors)?;
    let sims = vectors
        .iter()
        .map(|v| cosine(v, &center))
        .collect::<Result<Vec<_>, _>>()?;
    let mut best = 0;
    for (i, s) in sims.iter().enumerate().skip(1) {
        if *s > sims[best] {
            best = i;
        }
    }
    Ok((best, sims))
}

pub fn select_representative<E: Embedder + ?Sized>(
    candidates: &[&str],
    embedder: &E,
) -> Result<SelectionResult, ConsistencyError> {
    if candidates.is_empty() {
        return Err(ConsistencyError::EmptyInput);
    }
    let vectors = embedder.embed(candidates)?;
    if vectors.len() != candidates.len() {
        return Err(ConsistencyError::EmbeddingProviderError(format!(
            "embedder returned {} vectors for {} texts",
            vectors.len(),
            candidates.len()
        )));
    }
    let (chosen_index, all_similarities) = select_nearest_centroid(&vectors)?;
    Ok(SelectionResult {
        chosen_index,
        chosen_text: candidates[chosen_index].to_string(),
        similarity_to_centroid: all_similarities[chosen_index],
        all_similarities,
    })
}
