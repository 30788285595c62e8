//! Deterministic bag-of-words embedder for offline runs.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use sha2::{Digest, Sha256};

use crate::providers::{EmbeddingProvider, ProviderError};
use crate::tokenizer::{Tokenizer, WordTokenizer};
use crate::vector::normalize;

pub const DEFAULT_DIMENSION: usize = 1536;
pub const DEFAULT_MOCK_SEED: u64 = 42;

/// Key used for the vector of the empty text.
const EMPTY_KEY: &str = "\u{0}empty";

fn token_rng(seed: u64, token: &str) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(token.as_bytes());
    ChaCha8Rng::from_seed(h.finalize().into())
}

/// Fixed pseudo-random unit vector for `token`.
pub fn token_vector(token: &str, dimension: usize, seed: u64) -> Vec<f64> {
    let mut rng = token_rng(seed, token);
    let mut v: Vec<f64> = (0..dimension).map(|_| StandardNormal.sample(&mut rng)).collect();
    normalize(&mut v);
    v
}

fn term_counts(text: &str) -> Vec<(String, usize)> {
    let mut counts: HashMap<String, usize> = HashMap::new();
    for t in WordTokenizer.tokenize(text) {
        *counts.entry(t.text.to_lowercase()).or_insert(0) += 1;
    }
    let mut v: Vec<_> = counts.into_iter().collect();
    // summation order fixed so results are bit-identical across runs
    v.sort();
    v
}

fn combine(text: &str, dimension: usize, mut vector_for: impl FnMut(&str) -> Arc<Vec<f64>>) -> Vec<f64> {
    let counts = term_counts(text);
    if counts.is_empty() {
        return vector_for(EMPTY_KEY).to_vec();
    }
    let mut out = vec![0.0; dimension];
    for (term, n) in counts {
        let tv = vector_for(&term);
        for (o, x) in out.iter_mut().zip(tv.iter()) {
            *o += n as f64 * x;
        }
    }
    if normalize(&mut out) == 0.0 {
        return vector_for(EMPTY_KEY).to_vec();
    }
    out
}

/// Frequency-weighted sum of per-token random unit vectors, normalized.
///
/// Tokens are lowercased. Identical bags of tokens give identical vectors,
/// and texts with disjoint vocabularies are nearly orthogonal in high
/// dimension. Empty text maps to a seeded constant unit vector.
///
/// # Panics
/// If `dimension < 8`.
pub fn mock_embed(text: &str, dimension: usize, seed: u64) -> Vec<f64> {
    assert!(dimension >= 8, "mock embedding dimension must be at least 8");
    combine(text, dimension, |t| Arc::new(token_vector(t, dimension, seed)))
}

/// [`mock_embed`] as an [`EmbeddingProvider`], caching token vectors.
#[derive(Debug)]
pub struct MockEmbedder {
    dimension: usize,
    seed: u64,
    token_budget: usize,
    cache: Mutex<HashMap<String, Arc<Vec<f64>>>>,
}

impl MockEmbedder {
    pub fn new(dimension: usize, seed: u64) -> Self {
        assert!(dimension >= 8, "mock embedding dimension must be at least 8");
        Self {
            dimension,
            seed,
            token_budget: 8192,
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn with_token_budget(mut self, budget: usize) -> Self {
        self.token_budget = budget;
        self
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn embed_text(&self, text: &str) -> Vec<f64> {
        combine(text, self.dimension, |t| {
            if let Some(v) = self.cache.lock().expect("cache lock").get(t) {
                return Arc::clone(v);
            }
            let v = Arc::new(token_vector(t, self.dimension, self.seed));
            self.cache
                .lock()
                .expect("cache lock")
                .entry(t.to_string())
                .or_insert(v)
                .clone()
        })
    }
}

impl Default for MockEmbedder {
    fn default() -> Self {
        Self::new(DEFAULT_DIMENSION, DEFAULT_MOCK_SEED)
    }
}

impl EmbeddingProvider for MockEmbedder {
    fn name(&self) -> &str {
        "mock"
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn token_budget(&self) -> usize {
        self.token_budget
    }

    fn embed(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, ProviderError> {
        Ok(texts.iter().map(|t| self.embed_text(t)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vector::{cosine, norm};

    #[test]
    fn identical_and_reordered_texts_match() {
        let a = mock_embed("bucket versioning", 64, 1);
        assert_eq!(a, mock_embed("bucket versioning", 64, 1));
        assert_eq!(mock_embed("a b", 64, 1), mock_embed("b a", 64, 1));
        assert!((norm(&a) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_text_is_seeded_unit_vector() {
        let e = mock_embed("", 32, 3);
        assert!((norm(&e) - 1.0).abs() < 1e-12);
        assert_eq!(e, mock_embed("   ", 32, 3));
        assert_ne!(e, mock_embed("", 32, 4));
    }

    #[test]
    fn cached_provider_matches_free_function() {
        let m = MockEmbedder::new(48, 9);
        let text = "Enable default encryption on the bucket, then the bucket";
        assert_eq!(m.embed_one(text).unwrap(), mock_embed(text, 48, 9));
        assert_eq!(m.embed_one(text).unwrap(), mock_embed(text, 48, 9));
    }

    #[test]
    fn seeds_change_vectors() {
        assert!(cosine(&mock_embed("x", 256, 1), &mock_embed("x", 256, 2)).abs() < 0.5);
    }
}
