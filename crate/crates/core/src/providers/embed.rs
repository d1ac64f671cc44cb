use super::{ProviderError, Result};
use crate::text::{fnv1a64, tokens};

pub trait Embedder: Send + Sync {
    fn id(&self) -> &str;
    fn dimensionality(&self) -> usize;
    fn embed(&self, text: &str) -> Result<Vec<f64>>;
}

/// Feature-hashing bag of words: every lowercased token increments the
/// bucket `fnv1a64(token) % dim`, and the counts are L2-normalized.
#[derive(Debug, Clone)]
pub struct HashEmbedder {
    dim: usize,
    id: String,
}

impl HashEmbedder {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimensionality must be positive");
        HashEmbedder {
            dim,
            id: format!("hash-{dim}"),
        }
    }
}

impl Default for HashEmbedder {
    fn default() -> Self {
        HashEmbedder::new(64)
    }
}

impl Embedder for HashEmbedder {
    fn id(&self) -> &str {
        &self.id
    }

    fn dimensionality(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>> {
        let trimmed = text.trim();
        if trimmed.is_empty() {
            return Err(ProviderError::InvalidRequest("cannot embed empty text".into()));
        }
        let mut v = vec![0.0; self.dim];
        let mut any = false;
        for t in tokens(trimmed) {
            v[(fnv1a64(t.as_bytes()) % self.dim as u64) as usize] += 1.0;
            any = true;
        }
        if !any {
            // punctuation-only text still gets a stable, non-zero vector
            v[(fnv1a64(trimmed.as_bytes()) % self.dim as u64) as usize] = 1.0;
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= norm);
        Ok(v)
    }
}
