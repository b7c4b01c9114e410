use std::sync::Arc;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::RetrievalError;
use crate::ingest::{HttpRequest, Transport};

/// Identifier of the reference sentence-embedding model.
pub const DEFAULT_EMBEDDING_MODEL: &str = "sentence-transformers/all-MiniLM-L6-v2";
pub const DEFAULT_DIM: usize = 384;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub values: Vec<f64>,
    pub model_id: String,
}

impl EmbeddingVector {
    /// Unit-normalise `values`. Fails on non-finite or all-zero input.
    pub fn normalized(values: Vec<f64>, model_id: &str) -> Result<Self, RetrievalError> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(RetrievalError::ProviderUnavailable("embedding has non-finite values".into()));
        }
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(RetrievalError::ProviderUnavailable("embedding is all zeros".into()));
        }
        Ok(Self {
            values: values.into_iter().map(|v| v / norm).collect(),
            model_id: model_id.to_string(),
        })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Dot product of the normalised inputs, clamped to [-1, 1].
pub fn cosine(u: &EmbeddingVector, v: &EmbeddingVector) -> Result<f64, RetrievalError> {
    if u.dim() != v.dim() {
        return Err(RetrievalError::DimensionMismatch(u.dim(), v.dim()));
    }
    let (nu, nv) = (u.norm(), v.norm());
    if nu == 0.0 || nv == 0.0 {
        return Ok(0.0);
    }
    let dot: f64 = u.values.iter().zip(&v.values).map(|(a, b)| (a / nu) * (b / nv)).sum();
    Ok(dot.clamp(-1.0, 1.0))
}

#[async_trait]
pub trait Embedder: Send + Sync {
    fn model_id(&self) -> &str;
    fn dim(&self) -> usize;
    async fn embed(&self, text: &str) -> Result<EmbeddingVector, RetrievalError>;
}

fn check_text(text: &str) -> Result<(), RetrievalError> {
    if text.trim().is_empty() {
        Err(RetrievalError::InvalidInput("cannot embed empty text".into()))
    } else {
        Ok(())
    }
}

/// Feature-hashing bag of unigrams and bigrams. Deterministic, offline, and
/// good enough to separate topically unrelated texts; not a semantic model.
#[derive(Debug, Clone)]
pub struct HashingEmbedder {
    dim: usize,
    model_id: String,
}

impl HashingEmbedder {
    pub fn new(dim: usize) -> Self {
        Self {
            dim: dim.max(1),
            model_id: format!("hashing-uni-bigram-{dim}"),
        }
    }

    pub fn vector(&self, text: &str) -> Result<EmbeddingVector, RetrievalError> {
        check_text(text)?;
        let tokens: Vec<String> = text
            .split(|c: char| !c.is_alphanumeric())
            .filter(|w| !w.is_empty())
            .map(str::to_lowercase)
            .collect();
        let mut values = vec![0.0; self.dim];
        let mut add = |feature: &str, weight: f64| {
            let h = fnv1a(feature.as_bytes());
            let slot = (h % self.dim as u64) as usize;
            let sign = if (h >> 63) & 1 == 0 { 1.0 } else { -1.0 };
            values[slot] += sign * weight;
        };
        if tokens.is_empty() {
            add(text.trim(), 1.0);
        }
        for t in &tokens {
            add(t, 1.0);
        }
        for pair in tokens.windows(2) {
            add(&format!("{} {}", pair[0], pair[1]), 0.5);
        }
        EmbeddingVector::normalized(values, &self.model_id)
    }
}

impl Default for HashingEmbedder {
    fn default() -> Self {
        Self::new(DEFAULT_DIM)
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

#[async_trait]
impl Embedder for HashingEmbedder {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn dim(&self) -> usize {
        self.dim
    }

    async fn embed(&self, text: &str) -> Result<EmbeddingVector, RetrievalError> {
        self.vector(text)
    }
}

/// OpenAI-compatible `/embeddings` endpoint (e.g. a local inference server
/// hosting the reference model).
pub struct HttpEmbedder {
    transport: Arc<dyn Transport>,
    base_url: String,
    model_id: String,
    dim: usize,
    api_key: Option<String>,
}

impl HttpEmbedder {
    pub fn new(transport: Arc<dyn Transport>, base_url: &str) -> Self {
        Self {
            transport,
            base_url: base_url.trim_end_matches('/').to_string(),
            model_id: DEFAULT_EMBEDDING_MODEL.to_string(),
            dim: DEFAULT_DIM,
            api_key: None,
        }
    }

    pub fn with_model(mut self, model_id: &str, dim: usize) -> Self {
        self.model_id = model_id.to_string();
        self.dim = dim;
        self
    }

    pub fn with_api_key(mut self, key: Option<String>) -> Self {
        self.api_key = key;
        self
    }
}

#[async_trait]
impl Embedder for HttpEmbedder {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn dim(&self) -> usize {
        self.dim
    }

    async fn embed(&self, text: &str) -> Result<EmbeddingVector, RetrievalError> {
        check_text(text)?;
        let mut req = HttpRequest::post_json(
            format!("{}/embeddings", self.base_url),
            &json!({"model": self.model_id, "input": text}),
        );
        if let Some(k) = &self.api_key {
            req = req.header("authorization", format!("Bearer {k}"));
        }
        let resp = self
            .transport
            .send(req)
            .await
            .map_err(|e| RetrievalError::ProviderUnavailable(e.to_string()))?;
        if !resp.is_success() {
            return Err(RetrievalError::ProviderUnavailable(format!("HTTP {}", resp.status)));
        }
        let v: serde_json::Value = serde_json::from_slice(&resp.body)
            .map_err(|e| RetrievalError::ProviderUnavailable(e.to_string()))?;
        let values: Vec<f64> = v["data"][0]["embedding"]
            .as_array()
            .ok_or_else(|| RetrievalError::ProviderUnavailable("response has no embedding".into()))?
            .iter()
            .map(|x| x.as_f64().unwrap_or(f64::NAN))
            .collect();
        if values.len() != self.dim {
            return Err(RetrievalError::DimensionMismatch(values.len(), self.dim));
        }
        EmbeddingVector::normalized(values, &self.model_id)
    }
}
