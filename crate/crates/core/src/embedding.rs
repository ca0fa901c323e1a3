//! Sentence and token embedding providers.
//!
//! The built-in provider is a hashed bag of words: lowercased word terms,
//! stopwords removed, each term hashed (FNV-1a) into one of `dim` buckets
//! with weight `1 + ln(count)`. It is deterministic and needs no model files.
//! Remote providers are reached over HTTP.

use std::collections::BTreeMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tokenize::word_terms;

pub const DEFAULT_DIM: usize = 512;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    /// Rejects empty or non-finite vectors.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::ProviderFailure("embedding has dimension 0".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::ProviderFailure("embedding has non-finite entries".into()));
        }
        Ok(Self(values))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&v| v == 0.0)
    }

    /// Unit-length copy; the zero vector stays zero.
    pub fn normalized(&self) -> Self {
        let n = self.norm();
        if n == 0.0 {
            return self.clone();
        }
        Self(self.0.iter().map(|v| v / n).collect())
    }

    /// Component-wise mean. Panics on an empty slice or mixed dimensions.
    pub fn mean(vectors: &[EmbeddingVector]) -> Self {
        let dim = vectors[0].dim();
        let mut acc = vec![0.0; dim];
        for v in vectors {
            assert_eq!(v.dim(), dim, "mixed embedding dimensions");
            for (a, x) in acc.iter_mut().zip(&v.0) {
                *a += x;
            }
        }
        let n = vectors.len() as f64;
        Self(acc.into_iter().map(|a| a / n).collect())
    }
}

impl From<EmbeddingVector> for Vec<f64> {
    fn from(v: EmbeddingVector) -> Self {
        v.0
    }
}

/// Cosine similarity `u·v / (‖u‖‖v‖)`, clamped to [-1, 1]. A zero vector
/// has similarity 0 with everything, itself included.
pub fn cosine(u: &EmbeddingVector, v: &EmbeddingVector) -> Result<f64> {
    if u.dim() != v.dim() {
        return Err(Error::DimensionMismatch {
            expected: u.dim(),
            actual: v.dim(),
        });
    }
    let denom = u.norm() * v.norm();
    if denom == 0.0 {
        return Ok(0.0);
    }
    Ok((u.dot(v) / denom).clamp(-1.0, 1.0))
}

/// Maps texts to fixed-dimension vectors.
pub trait EmbeddingProvider: Send + Sync {
    fn id(&self) -> String;
    fn dim(&self) -> usize;
    fn embed(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>>;
}

/// Maps a token sequence to one vector per token (used by BERTScore).
pub trait TokenEmbedder: Send + Sync {
    fn embed_tokens(&self, tokens: &[String]) -> Result<Vec<EmbeddingVector>>;
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

const STOPWORDS: &[&str] = &[
    "a", "about", "after", "all", "also", "an", "and", "any", "are", "as", "at", "be", "been", "before", "being",
    "but", "by", "can", "could", "did", "do", "does", "for", "from", "had", "has", "have", "he", "her", "his", "i",
    "if", "in", "into", "is", "it", "its", "may", "me", "more", "my", "no", "not", "of", "on", "or", "other", "our",
    "she", "should", "so", "such", "than", "that", "the", "their", "them", "then", "there", "these", "they", "this",
    "those", "to", "under", "upon", "was", "we", "were", "what", "when", "where", "which", "while", "who", "will",
    "with", "would", "you", "your",
];

pub fn is_stopword(term: &str) -> bool {
    STOPWORDS.binary_search(&term).is_ok()
}

/// Offline hashed bag-of-words sentence embedder.
#[derive(Debug, Clone)]
pub struct HashedBowProvider {
    dim: usize,
}

impl HashedBowProvider {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        Self { dim }
    }

    pub fn embed_one(&self, text: &str) -> EmbeddingVector {
        let mut counts: BTreeMap<String, u32> = BTreeMap::new();
        for term in word_terms(text).filter(|t| !is_stopword(t)) {
            *counts.entry(term).or_default() += 1;
        }
        let mut values = vec![0.0; self.dim];
        for (term, count) in counts {
            let bucket = (fnv1a(term.as_bytes()) % self.dim as u64) as usize;
            values[bucket] += 1.0 + f64::from(count).ln();
        }
        EmbeddingVector(values)
    }
}

impl Default for HashedBowProvider {
    fn default() -> Self {
        Self::new(DEFAULT_DIM)
    }
}

impl EmbeddingProvider for HashedBowProvider {
    fn id(&self) -> String {
        format!("hashed-bow-{}", self.dim)
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>> {
        if texts.is_empty() {
            return Err(Error::ProviderFailure("no sentences to embed".into()));
        }
        Ok(texts.iter().map(|t| self.embed_one(t)).collect())
    }
}

/// Hashes every token, stopwords and punctuation included, to a one-hot
/// vector. Greedy matching over these vectors reduces BERTScore to lexical
/// matching (up to hash collisions).
#[derive(Debug, Clone)]
pub struct HashedTokenEmbedder {
    dim: usize,
}

impl HashedTokenEmbedder {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        Self { dim }
    }
}

impl Default for HashedTokenEmbedder {
    fn default() -> Self {
        Self::new(DEFAULT_DIM)
    }
}

impl TokenEmbedder for HashedTokenEmbedder {
    fn embed_tokens(&self, tokens: &[String]) -> Result<Vec<EmbeddingVector>> {
        Ok(tokens
            .iter()
            .map(|t| {
                let mut v = vec![0.0; self.dim];
                v[(fnv1a(t.as_bytes()) % self.dim as u64) as usize] = 1.0;
                EmbeddingVector(v)
            })
            .collect())
    }
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    texts: &'a [&'a str],
}

#[derive(Deserialize)]
struct EmbedResponse {
    embeddings: Vec<Vec<f64>>,
}

/// Remote embedder: `POST {"texts": [str]}` returning
/// `{"embeddings": [[float]]}`, one vector per text.
#[derive(Debug, Clone)]
pub struct HttpEmbeddingProvider {
    endpoint: String,
    api_key: Option<String>,
    dim: usize,
    timeout: Duration,
}

impl HttpEmbeddingProvider {
    pub fn new(endpoint: impl Into<String>, dim: usize, api_key: Option<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            api_key,
            dim,
            timeout: Duration::from_secs(60),
        }
    }
}

impl EmbeddingProvider for HttpEmbeddingProvider {
    fn id(&self) -> String {
        format!("http:{}", self.endpoint)
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>> {
        if texts.is_empty() {
            return Err(Error::ProviderFailure("no sentences to embed".into()));
        }
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(self.timeout))
            .build()
            .into();
        let mut req = agent.post(&self.endpoint);
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req
            .send_json(EmbedRequest { texts })
            .map_err(|e| Error::ProviderFailure(e.to_string()))?;
        let body: EmbedResponse = resp
            .body_mut()
            .read_json()
            .map_err(|e| Error::ProviderFailure(e.to_string()))?;
        if body.embeddings.len() != texts.len() {
            return Err(Error::ProviderFailure(format!(
                "{} embeddings returned for {} texts",
                body.embeddings.len(),
                texts.len()
            )));
        }
        body.embeddings
            .into_iter()
            .map(|v| {
                if v.len() != self.dim {
                    return Err(Error::DimensionMismatch {
                        expected: self.dim,
                        actual: v.len(),
                    });
                }
                EmbeddingVector::new(v)
            })
            .collect()
    }
}

/// Sentence embeddings for `texts`, checking one vector per input and a
/// uniform dimension.
pub fn embed_sentences(provider: &dyn EmbeddingProvider, texts: &[&str]) -> Result<Vec<EmbeddingVector>> {
    if texts.is_empty() {
        return Err(Error::ProviderFailure("no sentences to embed".into()));
    }
    let vectors = provider.embed(texts)?;
    if vectors.len() != texts.len() {
        return Err(Error::ProviderFailure(format!(
            "{} vectors for {} sentences",
            vectors.len(),
            texts.len()
        )));
    }
    if let Some(bad) = vectors.iter().find(|v| v.dim() != provider.dim()) {
        return Err(Error::DimensionMismatch {
            expected: provider.dim(),
            actual: bad.dim(),
        });
    }
    Ok(vectors)
}
