//! Offline stand-in for a cross-encoder.

use crate::embedding::{MockEmbedder, DEFAULT_DIMENSION};
use crate::providers::{RerankProvider, ProviderError};
use crate::vector::cosine;

/// Kept apart from the embedding mock seed so ground truth is not the
/// content retriever's own geometry.
pub const DEFAULT_RERANK_SEED: u64 = 1337;

/// Raw scores span `[-RERANK_SCALE, RERANK_SCALE]`.
pub const RERANK_SCALE: f64 = 10.0;

/// `RERANK_SCALE · cos(mock_embed(query), mock_embed(chunk))`.
pub fn mock_rerank(query: &str, chunk: &str, seed: u64) -> f64 {
    let e = MockEmbedder::new(DEFAULT_DIMENSION, seed);
    RERANK_SCALE * cosine(&e.embed_text(query), &e.embed_text(chunk))
}

#[derive(Debug)]
pub struct MockReranker {
    embedder: MockEmbedder,
}

impl MockReranker {
    pub fn new(seed: u64) -> Self {
        Self::with_dimension(DEFAULT_DIMENSION, seed)
    }

    pub fn with_dimension(dimension: usize, seed: u64) -> Self {
        Self {
            embedder: MockEmbedder::new(dimension, seed),
        }
    }
}

impl Default for MockReranker {
    fn default() -> Self {
        Self::new(DEFAULT_RERANK_SEED)
    }
}

impl RerankProvider for MockReranker {
    fn name(&self) -> &str {
        "mock"
    }

    fn score(&self, query: &str, documents: &[&str]) -> Result<Vec<f64>, ProviderError> {
        let q = self.embedder.embed_text(query);
        Ok(documents
            .iter()
            .map(|d| RERANK_SCALE * cosine(&q, &self.embedder.embed_text(d)))
            .collect())
    }
}
