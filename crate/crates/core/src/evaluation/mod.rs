//! Pooled reranker ground truth and IR metrics over the retriever matrix.

mod ground_truth;
mod metrics;
mod mock;
mod report;

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chunking::ChunkingStrategy;
use crate::metadata::EnrichedChunk;
use crate::providers::ProviderError;

pub use ground_truth::{build_ground_truth, load_judgments, GroundTruthOptions, RelevanceJudgment};
pub use metrics::{
    dcg, hit_rate_at_k, metadata_consistency, metadata_consistency_at_k, mrr_at_k, ndcg_at_k, precision_at_k,
    JudgmentSet,
};
pub use mock::{mock_rerank, MockReranker, DEFAULT_RERANK_SEED, RERANK_SCALE};
pub use report::{
    canonical_json, evaluate_all, CellMetrics, EvalOptions, LatencySummary, Metric, MetricReport, QueryMetrics,
};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no queries to evaluate")]
    NoQueries,
    #[error("missing results for cells: {}", .0.join(", "))]
    MissingCells(Vec<String>),
    #[error("query {query_id} has no results from {cell}")]
    IncompletePool { query_id: String, cell: String },
    #[error("unknown chunk {0}")]
    UnknownChunk(ChunkKey),
    #[error("reranker failed for query {query_id} after {attempts} attempts; progress saved to {checkpoint:?}: {source}")]
    Rerank {
        query_id: String,
        attempts: usize,
        checkpoint: Option<std::path::PathBuf>,
        #[source]
        source: ProviderError,
    },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("invalid option: {0}")]
    InvalidOption(String),
}

/// Chunk ids are unique only within one chunking strategy.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ChunkKey {
    pub chunking: ChunkingStrategy,
    pub chunk_id: String,
}

impl ChunkKey {
    pub fn new(chunking: ChunkingStrategy, chunk_id: impl Into<String>) -> Self {
        Self {
            chunking,
            chunk_id: chunk_id.into(),
        }
    }
}

impl fmt::Display for ChunkKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.chunking, self.chunk_id)
    }
}

/// Chunk text and category lookup across all chunking strategies.
#[derive(Debug, Clone, Default)]
pub struct ChunkCatalog {
    chunks: HashMap<ChunkKey, (String, String)>,
}

impl ChunkCatalog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, key: ChunkKey, text: impl Into<String>, category: impl Into<String>) {
        self.chunks.insert(key, (text.into(), category.into()));
    }

    pub fn extend_enriched(&mut self, chunking: ChunkingStrategy, enriched: &[EnrichedChunk]) {
        for e in enriched {
            self.insert(
                ChunkKey::new(chunking, e.chunk.chunk_id.clone()),
                e.chunk.text.clone(),
                e.metadata.primary_category.clone(),
            );
        }
    }

    pub fn text(&self, key: &ChunkKey) -> Option<&str> {
        self.chunks.get(key).map(|(t, _)| t.as_str())
    }

    pub fn category(&self, key: &ChunkKey) -> Option<&str> {
        self.chunks.get(key).map(|(_, c)| c.as_str())
    }

    pub fn len(&self) -> usize {
        self.chunks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chunks.is_empty()
    }
}
