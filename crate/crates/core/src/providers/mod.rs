//! Provider contracts for the three model roles in the pipeline: chat
//! completion (metadata generation), embedding, and cross-encoder reranking.
//!
//! Deterministic offline implementations live next to the code that uses
//! them ([`crate::metadata::MockChatProvider`],
//! [`crate::embedding::MockEmbedder`], [`crate::evaluation::MockReranker`]);
//! JSON-over-HTTP clients live in [`http`].

pub mod http;

use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ProviderError {
    /// Connection could not be established at all.
    #[error("provider unreachable: {0}")]
    Unreachable(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("provider returned HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed provider response: {0}")]
    Protocol(String),
    #[error("missing credentials: {0}")]
    MissingCredentials(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChatRequest {
    pub system: String,
    pub user: String,
    pub temperature: f64,
    pub max_tokens: usize,
}

/// Chat completion: prompt pair in, response text out.
pub trait ChatProvider: Send + Sync {
    fn name(&self) -> &str;
    fn complete(&self, request: &ChatRequest) -> Result<String, ProviderError>;
}

/// Text to fixed-dimension dense vectors.
pub trait EmbeddingProvider: Send + Sync {
    fn name(&self) -> &str;
    fn dimension(&self) -> usize;
    /// Maximum input length in tokens of the shared tokenizer.
    fn token_budget(&self) -> usize {
        8192
    }
    fn embed(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, ProviderError>;

    fn embed_one(&self, text: &str) -> Result<Vec<f64>, ProviderError> {
        self.embed(&[text])?
            .pop()
            .ok_or_else(|| ProviderError::Protocol("empty embedding response".into()))
    }
}

/// Joint (query, document) relevance scoring. Scores are raw and unbounded.
pub trait RerankProvider: Send + Sync {
    fn name(&self) -> &str;
    fn score(&self, query: &str, documents: &[&str]) -> Result<Vec<f64>, ProviderError>;
}
