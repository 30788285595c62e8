//! Document segmentation under three strategies.
//!
//! All strategies work in token space over the shared [`Tokenizer`]: every
//! chunk is a contiguous token range of its source document, so
//! `char_span` always slices the original body and `token_count` is exact.

mod naive;
mod recursive;
mod semantic;

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, Document};
use crate::providers::{EmbeddingProvider, ProviderError};
use crate::tokenizer::{Token, Tokenizer};

pub use naive::chunk_naive;
pub use recursive::{chunk_recursive, RECURSIVE_DELIMITERS};
pub use semantic::{chunk_semantic, coherence, sentence_spans};

#[derive(Debug, Error)]
pub enum ChunkingError {
    #[error("invalid chunking config: {0}")]
    InvalidConfig(String),
    #[error("semantic chunking requires a sentence embedder")]
    MissingEmbedder,
    #[error("sentence embedding failed: {0}")]
    Embedding(#[from] ProviderError),
    #[error("embedding dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("document {doc_id}: {source}")]
    Document {
        doc_id: String,
        #[source]
        source: Box<ChunkingError>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChunkingStrategy {
    Semantic,
    Recursive,
    Naive,
}

impl ChunkingStrategy {
    /// Column order used by rendered report tables.
    pub const ALL: [ChunkingStrategy; 3] = [Self::Semantic, Self::Naive, Self::Recursive];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Semantic => "semantic",
            Self::Recursive => "recursive",
            Self::Naive => "naive",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Self::Semantic => "Semantic",
            Self::Recursive => "Recursive",
            Self::Naive => "Naive",
        }
    }
}

impl fmt::Display for ChunkingStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ChunkingStrategy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "semantic" => Ok(Self::Semantic),
            "recursive" => Ok(Self::Recursive),
            "naive" => Ok(Self::Naive),
            other => Err(format!("unknown chunking strategy {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChunkingConfig {
    pub strategy: ChunkingStrategy,
    pub max_tokens: usize,
    pub overlap_tokens: usize,
    /// Semantic merge floor.
    pub min_tokens: usize,
    /// Semantic breakpoint percentile in (0, 100).
    pub breakpoint_percentile: f64,
}

impl ChunkingConfig {
    pub fn naive() -> Self {
        Self {
            strategy: ChunkingStrategy::Naive,
            max_tokens: 1024,
            overlap_tokens: 0,
            min_tokens: 0,
            breakpoint_percentile: 25.0,
        }
    }

    pub fn recursive() -> Self {
        Self {
            strategy: ChunkingStrategy::Recursive,
            max_tokens: 512,
            overlap_tokens: 128,
            min_tokens: 0,
            breakpoint_percentile: 25.0,
        }
    }

    pub fn semantic() -> Self {
        Self {
            strategy: ChunkingStrategy::Semantic,
            max_tokens: 1024,
            overlap_tokens: 0,
            min_tokens: 64,
            breakpoint_percentile: 25.0,
        }
    }

    pub fn for_strategy(strategy: ChunkingStrategy) -> Self {
        match strategy {
            ChunkingStrategy::Naive => Self::naive(),
            ChunkingStrategy::Recursive => Self::recursive(),
            ChunkingStrategy::Semantic => Self::semantic(),
        }
    }

    pub fn with_max_tokens(mut self, max_tokens: usize) -> Self {
        self.max_tokens = max_tokens;
        self
    }

    pub fn with_overlap(mut self, overlap_tokens: usize) -> Self {
        self.overlap_tokens = overlap_tokens;
        self
    }

    pub fn with_min_tokens(mut self, min_tokens: usize) -> Self {
        self.min_tokens = min_tokens;
        self
    }

    pub fn validate(&self) -> Result<(), ChunkingError> {
        let bad = |m: String| Err(ChunkingError::InvalidConfig(m));
        if self.max_tokens == 0 {
            return bad("max_tokens must be at least 1".into());
        }
        if self.overlap_tokens >= self.max_tokens {
            return bad(format!(
                "overlap_tokens ({}) must be smaller than max_tokens ({})",
                self.overlap_tokens, self.max_tokens
            ));
        }
        if self.min_tokens >= self.max_tokens {
            return bad(format!(
                "min_tokens ({}) must be smaller than max_tokens ({})",
                self.min_tokens, self.max_tokens
            ));
        }
        if !(self.breakpoint_percentile > 0.0 && self.breakpoint_percentile < 100.0) {
            return bad(format!("breakpoint_percentile {} outside (0, 100)", self.breakpoint_percentile));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChunkRecord {
    pub chunk_id: String,
    pub doc_id: String,
    pub source_tag: String,
    pub strategy: ChunkingStrategy,
    pub text: String,
    pub token_count: usize,
    /// UTF-8 byte offsets `[start, end)` into the source body.
    pub char_span: (usize, usize),
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coherence: Option<f64>,
}

/// Build a chunk record from a contiguous token range of `doc`.
pub(crate) fn record_from_range(
    doc: &Document,
    tokens: &[Token<'_>],
    range: Range<usize>,
    strategy: ChunkingStrategy,
    index: usize,
) -> ChunkRecord {
    let start = tokens[range.start].start;
    let end = tokens[range.end - 1].end;
    ChunkRecord {
        chunk_id: format!("{}#{}", doc.doc_id, index),
        doc_id: doc.doc_id.clone(),
        source_tag: doc.source_tag.clone(),
        strategy,
        text: doc.body[start..end].to_string(),
        token_count: range.len(),
        char_span: (start, end),
        coherence: None,
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ChunkStats {
    pub document_count: usize,
    pub chunk_count: usize,
    pub mean_tokens: f64,
    pub max_tokens: usize,
    pub min_tokens: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_coherence: Option<f64>,
}

impl ChunkStats {
    pub fn from_chunks(document_count: usize, chunks: &[ChunkRecord]) -> Self {
        if chunks.is_empty() {
            return Self {
                document_count,
                ..Self::default()
            };
        }
        let total: usize = chunks.iter().map(|c| c.token_count).sum();
        let coherences: Vec<f64> = chunks.iter().filter_map(|c| c.coherence).collect();
        Self {
            document_count,
            chunk_count: chunks.len(),
            mean_tokens: total as f64 / chunks.len() as f64,
            max_tokens: chunks.iter().map(|c| c.token_count).max().unwrap_or(0),
            min_tokens: chunks.iter().map(|c| c.token_count).min().unwrap_or(0),
            mean_coherence: (!coherences.is_empty())
                .then(|| coherences.iter().sum::<f64>() / coherences.len() as f64),
        }
    }
}

/// All chunks of one corpus under one strategy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChunkSet {
    pub strategy: ChunkingStrategy,
    pub chunks: Vec<ChunkRecord>,
    pub stats: ChunkStats,
}

/// Chunk one document with the configured strategy.
pub fn chunk_document(
    doc: &Document,
    cfg: &ChunkingConfig,
    tokenizer: &dyn Tokenizer,
    embedder: Option<&dyn EmbeddingProvider>,
) -> Result<Vec<ChunkRecord>, ChunkingError> {
    match cfg.strategy {
        ChunkingStrategy::Naive => chunk_naive(doc, cfg, tokenizer),
        ChunkingStrategy::Recursive => chunk_recursive(doc, cfg, tokenizer),
        ChunkingStrategy::Semantic => {
            let embedder = embedder.ok_or(ChunkingError::MissingEmbedder)?;
            chunk_semantic(doc, cfg, tokenizer, embedder)
        }
    }
}

/// Chunk every document in corpus order.
pub fn chunk_corpus(
    corpus: &Corpus,
    cfg: &ChunkingConfig,
    tokenizer: &dyn Tokenizer,
    embedder: Option<&dyn EmbeddingProvider>,
) -> Result<ChunkSet, ChunkingError> {
    cfg.validate()?;
    if cfg.strategy == ChunkingStrategy::Semantic && embedder.is_none() {
        return Err(ChunkingError::MissingEmbedder);
    }
    let mut chunks = Vec::new();
    for doc in corpus.documents() {
        let doc_chunks = chunk_document(doc, cfg, tokenizer, embedder).map_err(|e| ChunkingError::Document {
            doc_id: doc.doc_id.clone(),
            source: Box::new(e),
        })?;
        chunks.extend(doc_chunks);
    }
    let stats = ChunkStats::from_chunks(corpus.len(), &chunks);
    Ok(ChunkSet {
        strategy: cfg.strategy,
        chunks,
        stats,
    })
}
