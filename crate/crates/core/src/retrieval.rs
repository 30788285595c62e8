//! The 3×3 retriever matrix: every chunking strategy crossed with every
//! embedding strategy, plus query intent detection for prefix fusion.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chunking::ChunkingStrategy;
use crate::embedding::{
    embed_texts, fuse, render_query_prefix, EmbedOptions, EmbeddingError, EmbeddingStrategy, FusionWeights,
    TfidfModel,
};
use crate::index::{IndexError, VectorIndex};
use crate::metadata::Intent;
use crate::providers::EmbeddingProvider;

const HOW_TO: &[&str] = &["how do i", "how to", "steps", "configure", "set up", "enable"];
const DEBUGGING: &[&str] = &["error", "fail", "fix", "debug", "not working", "troubleshoot"];
const COMPARISON: &[&str] = &[" vs ", "difference", "compare", "versus", "better"];

/// First-match rule table over the lowercased text; `reference` otherwise.
pub fn detect_intent(text: &str) -> Intent {
    let lower = text.to_lowercase();
    let any = |needles: &[&str]| needles.iter().any(|n| lower.contains(n));
    if any(HOW_TO) {
        Intent::HowTo
    } else if any(DEBUGGING) {
        Intent::Debugging
    } else if any(COMPARISON) {
        Intent::Comparison
    } else {
        Intent::Reference
    }
}

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("missing index for {0}")]
    MissingIndex(Cell),
    #[error("missing tf-idf model for {0} chunking")]
    MissingModel(ChunkingStrategy),
    #[error("k must be at least 1")]
    ZeroK,
    #[error("query {query_id}: {source}")]
    Embedding {
        query_id: String,
        #[source]
        source: EmbeddingError,
    },
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error("{path}: {message}")]
    Queries { path: String, message: String },
}

/// One (chunking, embedding) combination.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub chunking: ChunkingStrategy,
    pub embedding: EmbeddingStrategy,
}

impl Cell {
    pub fn new(chunking: ChunkingStrategy, embedding: EmbeddingStrategy) -> Self {
        Self { chunking, embedding }
    }

    /// All nine cells, chunking-major in report column order.
    pub fn all() -> Vec<Cell> {
        ChunkingStrategy::ALL
            .into_iter()
            .flat_map(|c| EmbeddingStrategy::ALL.into_iter().map(move |e| Cell::new(c, e)))
            .collect()
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.chunking, self.embedding)
    }
}

impl FromStr for Cell {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (c, e) = s
            .split_once('/')
            .ok_or_else(|| format!("cell {s:?} is not of the form <chunking>/<embedding>"))?;
        Ok(Cell::new(c.parse()?, e.parse()?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetrieverConfig {
    pub cell: Cell,
    pub k: usize,
    /// Used by the TF-IDF retriever only.
    pub weights: FusionWeights,
}

impl RetrieverConfig {
    pub fn new(cell: Cell, k: usize) -> Self {
        Self {
            cell,
            k,
            weights: FusionWeights::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRecord {
    pub query_id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detected_intent: Option<Intent>,
}

impl QueryRecord {
    pub fn new(query_id: impl Into<String>, text: impl Into<String>) -> Self {
        let text = text.into();
        Self {
            query_id: query_id.into(),
            detected_intent: Some(detect_intent(&text)),
            text,
        }
    }

    pub fn intent(&self) -> Intent {
        self.detected_intent.unwrap_or_else(|| detect_intent(&self.text))
    }
}

/// Read `{query_id, text}` lines; intents are detected on load.
pub fn load_queries(path: &Path) -> Result<Vec<QueryRecord>, RetrievalError> {
    let err = |message: String| RetrievalError::Queries {
        path: path.display().to_string(),
        message,
    };
    let f = fs::File::open(path).map_err(|e| err(e.to_string()))?;
    let mut out: Vec<QueryRecord> = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| err(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let q: QueryRecord = serde_json::from_str(&line).map_err(|e| err(format!("line {}: {e}", i + 1)))?;
        if q.text.trim().is_empty() {
            return Err(err(format!("line {}: query {} has empty text", i + 1, q.query_id)));
        }
        if out.iter().any(|o| o.query_id == q.query_id) {
            return Err(err(format!("line {}: duplicate query_id {}", i + 1, q.query_id)));
        }
        out.push(QueryRecord::new(q.query_id, q.text));
    }
    if out.is_empty() {
        return Err(err("no queries".into()));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedHit {
    pub chunk_id: String,
    pub score: f64,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResult {
    pub query_id: String,
    pub chunking: ChunkingStrategy,
    pub embedding: EmbeddingStrategy,
    pub k: usize,
    pub hits: Vec<RankedHit>,
    /// Wall time of the index search alone.
    pub latency_micros: u64,
    /// Wall time of query embedding, amortized over the batch.
    pub embed_latency_micros: u64,
}

impl RetrievalResult {
    pub fn cell(&self) -> Cell {
        Cell::new(self.chunking, self.embedding)
    }
}

/// Read-only state needed to embed queries and search every cell.
pub struct Retriever<'a> {
    pub indexes: &'a BTreeMap<Cell, VectorIndex>,
    /// Fitted per chunking strategy.
    pub tfidf: &'a BTreeMap<ChunkingStrategy, TfidfModel>,
    pub provider: &'a dyn EmbeddingProvider,
    pub weights: FusionWeights,
    pub embed_options: EmbedOptions,
}

/// Provider input for a query under `strategy`.
pub fn query_input(query: &QueryRecord, strategy: EmbeddingStrategy) -> String {
    match strategy {
        EmbeddingStrategy::PrefixFusion => render_query_prefix(query.intent()) + query.text.trim(),
        _ => query.text.trim().to_string(),
    }
}

impl Retriever<'_> {
    /// Query vectors for one cell, in query order.
    pub fn embed_queries(&self, queries: &[QueryRecord], cell: Cell) -> Result<Vec<Vec<f64>>, RetrievalError> {
        let items: Vec<(String, String)> = queries
            .iter()
            .map(|q| (q.query_id.clone(), query_input(q, cell.embedding)))
            .collect();
        let wrap = |source: EmbeddingError| {
            let query_id = match &source {
                EmbeddingError::Provider { id, .. } | EmbeddingError::EmptyText(id) => id.clone(),
                _ => String::new(),
            };
            RetrievalError::Embedding { query_id, source }
        };
        let mut vectors = embed_texts(self.provider, &items, &self.embed_options).map_err(wrap)?;
        if cell.embedding == EmbeddingStrategy::TfidfWeighted {
            let model = self
                .tfidf
                .get(&cell.chunking)
                .ok_or(RetrievalError::MissingModel(cell.chunking))?;
            for (v, q) in vectors.iter_mut().zip(queries) {
                let t = model.tfidf_vector(&q.text);
                *v = fuse(v, t.as_deref(), self.weights)
                    .map_err(|source| RetrievalError::Embedding {
                        query_id: q.query_id.clone(),
                        source,
                    })?
                    .vector;
            }
        }
        Ok(vectors)
    }

    /// Single-query form of [`Retriever::embed_queries`].
    pub fn embed_query(&self, query: &QueryRecord, cell: Cell) -> Result<Vec<f64>, RetrievalError> {
        Ok(self
            .embed_queries(std::slice::from_ref(query), cell)?
            .pop()
            .expect("one query, one vector"))
    }

    pub fn run_cell(&self, queries: &[QueryRecord], cell: Cell, k: usize) -> Result<Vec<RetrievalResult>, RetrievalError> {
        if k == 0 {
            return Err(RetrievalError::ZeroK);
        }
        let index = self.indexes.get(&cell).ok_or(RetrievalError::MissingIndex(cell))?;
        let started = Instant::now();
        let vectors = self.embed_queries(queries, cell)?;
        let embed_latency_micros = (started.elapsed().as_micros() / queries.len().max(1) as u128) as u64;
        queries
            .iter()
            .zip(vectors)
            .map(|(q, v)| {
                let t = Instant::now();
                let hits = index.search(&v, k)?;
                let latency_micros = t.elapsed().as_micros() as u64;
                Ok(RetrievalResult {
                    query_id: q.query_id.clone(),
                    chunking: cell.chunking,
                    embedding: cell.embedding,
                    k,
                    hits: hits
                        .into_iter()
                        .enumerate()
                        .map(|(i, h)| RankedHit {
                            chunk_id: h.chunk_id,
                            score: h.score,
                            rank: i + 1,
                        })
                        .collect(),
                    latency_micros,
                    embed_latency_micros,
                })
            })
            .collect()
    }

    /// Every cell over every query, cell-major in [`Cell::all`] order then
    /// query order. Fails before searching if any cell lacks an index.
    pub fn run_matrix(&self, queries: &[QueryRecord], k: usize) -> Result<Vec<RetrievalResult>, RetrievalError> {
        self.run_cells(queries, &Cell::all(), k)
    }

    pub fn run_cells(&self, queries: &[QueryRecord], cells: &[Cell], k: usize) -> Result<Vec<RetrievalResult>, RetrievalError> {
        if k == 0 {
            return Err(RetrievalError::ZeroK);
        }
        for &cell in cells {
            if !self.indexes.contains_key(&cell) {
                return Err(RetrievalError::MissingIndex(cell));
            }
            if cell.embedding == EmbeddingStrategy::TfidfWeighted && !self.tfidf.contains_key(&cell.chunking) {
                return Err(RetrievalError::MissingModel(cell.chunking));
            }
        }
        let mut out = Vec::with_capacity(cells.len() * queries.len());
        for &cell in cells {
            out.extend(self.run_cell(queries, cell, k)?);
        }
        Ok(out)
    }
}
