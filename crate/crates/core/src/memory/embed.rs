use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::MemoryError;

pub const DEFAULT_DIMENSION: usize = 256;

/// Text to fixed-length vector.
pub trait Embedder: Send + Sync {
    fn embed(&self, text: &str) -> Result<Vec<f64>, MemoryError>;
    /// Identifies the backend and its settings; stores remember it.
    fn tag(&self) -> String;
    fn dimension(&self) -> usize;
}

/// Cosine similarity; zero when either vector has zero norm.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Deterministic offline embedder: lowercase alphanumeric tokens hashed
/// with 64-bit FNV-1a into a term-frequency vector, L2-normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashEmbedder {
    pub dimension: usize,
}

impl Default for HashEmbedder {
    fn default() -> Self {
        HashEmbedder {
            dimension: DEFAULT_DIMENSION,
        }
    }
}

impl HashEmbedder {
    pub fn new(dimension: usize) -> Self {
        assert!(dimension > 0, "dimension must be positive");
        HashEmbedder { dimension }
    }

    pub fn tokens(text: &str) -> impl Iterator<Item = String> + '_ {
        text.split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty())
            .map(str::to_lowercase)
    }

    pub fn fnv1a(bytes: &[u8]) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for &b in bytes {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        h
    }

    pub fn bucket(&self, token: &str) -> usize {
        (Self::fnv1a(token.as_bytes()) % self.dimension as u64) as usize
    }
}

impl Embedder for HashEmbedder {
    fn embed(&self, text: &str) -> Result<Vec<f64>, MemoryError> {
        let mut v = vec![0.0; self.dimension];
        let mut any = false;
        for token in Self::tokens(text) {
            v[self.bucket(&token)] += 1.0;
            any = true;
        }
        if !any {
            return Err(MemoryError::EmptyText);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= norm);
        Ok(v)
    }

    fn tag(&self) -> String {
        format!("fnv1a-tf-{}", self.dimension)
    }

    fn dimension(&self) -> usize {
        self.dimension
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WireEmbedderConfig {
    pub base_url: String,
    pub model: String,
    /// Environment variable holding the API key; no header when unset.
    pub api_key_env: String,
    pub dimension: usize,
    pub timeout_s: f64,
}

impl Default for WireEmbedderConfig {
    fn default() -> Self {
        WireEmbedderConfig {
            base_url: "http://localhost:8000/v1".into(),
            model: "text-embedding-3-small".into(),
            api_key_env: "OPENAI_API_KEY".into(),
            dimension: 1536,
            timeout_s: 30.0,
        }
    }
}

/// Remote embedder speaking `POST {base_url}/embeddings`.
pub struct WireEmbedder {
    config: WireEmbedderConfig,
    client: reqwest::blocking::Client,
}

#[derive(Serialize)]
struct EmbeddingRequest<'a> {
    model: &'a str,
    input: [&'a str; 1],
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingDatum>,
}

#[derive(Deserialize)]
struct EmbeddingDatum {
    embedding: Vec<f64>,
}

impl WireEmbedder {
    pub fn new(config: WireEmbedderConfig) -> Result<Self, MemoryError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs_f64(config.timeout_s.max(0.001)))
            .build()
            .map_err(|e| MemoryError::BackendUnavailable(e.to_string()))?;
        Ok(WireEmbedder { config, client })
    }
}

impl Embedder for WireEmbedder {
    fn embed(&self, text: &str) -> Result<Vec<f64>, MemoryError> {
        if text.trim().is_empty() {
            return Err(MemoryError::EmptyText);
        }
        let url = format!("{}/embeddings", self.config.base_url.trim_end_matches('/'));
        let mut request = self.client.post(url).json(&EmbeddingRequest {
            model: &self.config.model,
            input: [text],
        });
        if let Ok(key) = std::env::var(&self.config.api_key_env) {
            request = request.bearer_auth(key);
        }
        let unavailable = |e: reqwest::Error| MemoryError::BackendUnavailable(e.to_string());
        let response: EmbeddingResponse = request
            .send()
            .and_then(|r| r.error_for_status())
            .map_err(unavailable)?
            .json()
            .map_err(unavailable)?;
        let v = response
            .data
            .into_iter()
            .next()
            .ok_or_else(|| MemoryError::BackendUnavailable("response without data".into()))?
            .embedding;
        if v.len() != self.config.dimension {
            return Err(MemoryError::DimensionMismatch {
                expected: self.config.dimension,
                got: v.len(),
            });
        }
        Ok(v)
    }

    fn tag(&self) -> String {
        format!("wire-{}-{}", self.config.model, self.config.dimension)
    }

    fn dimension(&self) -> usize {
        self.config.dimension
    }
}
