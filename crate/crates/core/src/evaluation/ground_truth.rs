//! Candidate pooling, reranking and per-query normalization.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{ChunkCatalog, ChunkKey, EvalError};
use crate::chunking::ChunkingStrategy;
use crate::providers::RerankProvider;
use crate::retrieval::{Cell, QueryRecord, RetrievalResult};
use crate::vector::percentile;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelevanceJudgment {
    pub query_id: String,
    pub chunking: ChunkingStrategy,
    pub chunk_id: String,
    /// Index of the distinct candidate text within the query's pool.
    pub candidate: usize,
    pub raw_score: f64,
    pub normalized_score: f64,
    pub relevant: bool,
    pub highly_relevant: bool,
}

impl RelevanceJudgment {
    pub fn key(&self) -> ChunkKey {
        ChunkKey::new(self.chunking, self.chunk_id.clone())
    }
}

#[derive(Debug, Clone)]
pub struct GroundTruthOptions {
    pub pool_size: usize,
    /// Normalized score at or above which a chunk is relevant.
    pub tau: f64,
    /// Per-query percentile of normalized scores a chunk must exceed to be
    /// highly relevant.
    pub high_percentile: f64,
    pub batch_size: usize,
    pub max_retries: usize,
    /// JSONL file receiving each completed query; an existing file is resumed from.
    pub checkpoint: Option<PathBuf>,
    /// Require every query to have results from all nine cells.
    pub require_full_matrix: bool,
}

impl Default for GroundTruthOptions {
    fn default() -> Self {
        Self {
            pool_size: 50,
            tau: 0.8,
            high_percentile: 95.0,
            batch_size: 64,
            max_retries: 2,
            checkpoint: None,
            require_full_matrix: true,
        }
    }
}

/// Min-max to [0, 1]; a pool without spread maps to all 1.0.
fn min_max(raw: &[f64]) -> Vec<f64> {
    let lo = raw.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi - lo <= 0.0 {
        return vec![1.0; raw.len()];
    }
    raw.iter().map(|x| (x - lo) / (hi - lo)).collect()
}

pub fn load_judgments(path: &Path) -> Result<Vec<RelevanceJudgment>, EvalError> {
    let err = |message: String| EvalError::Io {
        path: path.display().to_string(),
        message,
    };
    let f = match fs::File::open(path) {
        Ok(f) => f,
        Err(e) => return Err(err(e.to_string())),
    };
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| err(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| err(format!("line {}: {e}", i + 1)))?);
    }
    Ok(out)
}

fn append(path: &Path, judgments: &[RelevanceJudgment]) -> Result<(), EvalError> {
    let err = |e: std::io::Error| EvalError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    };
    let mut f = fs::OpenOptions::new().create(true).append(true).open(path).map_err(err)?;
    for j in judgments {
        writeln!(f, "{}", serde_json::to_string(j).expect("judgment serializes")).map_err(err)?;
    }
    f.flush().map_err(err)
}

/// Pooled judgments for every query.
///
/// A query's pool is the union of the top `pool_size` hits of every cell,
/// deduplicated by chunk text: the same text reached through different
/// chunkings or retrievers is one candidate and is scored once. Raw scores
/// are min-max normalized per query; judgments are emitted for every pooled
/// chunk, in first-seen order.
pub fn build_ground_truth(
    queries: &[QueryRecord],
    results: &[RetrievalResult],
    catalog: &ChunkCatalog,
    reranker: &dyn RerankProvider,
    opts: &GroundTruthOptions,
) -> Result<Vec<RelevanceJudgment>, EvalError> {
    if queries.is_empty() {
        return Err(EvalError::NoQueries);
    }
    if opts.pool_size == 0 || opts.batch_size == 0 {
        return Err(EvalError::InvalidOption("pool_size and batch_size must be at least 1".into()));
    }
    let mut by_query: HashMap<&str, Vec<&RetrievalResult>> = HashMap::new();
    for r in results {
        by_query.entry(r.query_id.as_str()).or_default().push(r);
    }
    if opts.require_full_matrix {
        for q in queries {
            let have: BTreeSet<Cell> = by_query
                .get(q.query_id.as_str())
                .map(|rs| rs.iter().map(|r| r.cell()).collect())
                .unwrap_or_default();
            if let Some(cell) = Cell::all().into_iter().find(|c| !have.contains(c)) {
                return Err(EvalError::IncompletePool {
                    query_id: q.query_id.clone(),
                    cell: cell.to_string(),
                });
            }
        }
    }

    let mut judgments = match &opts.checkpoint {
        Some(p) if p.exists() => load_judgments(p)?,
        _ => Vec::new(),
    };
    let done: BTreeSet<String> = judgments.iter().map(|j| j.query_id.clone()).collect();

    for q in queries {
        if done.contains(&q.query_id) {
            continue;
        }
        let mut keys: Vec<ChunkKey> = Vec::new();
        let mut seen_keys: BTreeSet<ChunkKey> = BTreeSet::new();
        let mut texts: Vec<&str> = Vec::new();
        let mut candidate_of: HashMap<&str, usize> = HashMap::new();
        let mut key_candidate: Vec<usize> = Vec::new();
        for r in by_query.get(q.query_id.as_str()).into_iter().flatten() {
            for hit in r.hits.iter().take(opts.pool_size) {
                let key = ChunkKey::new(r.chunking, hit.chunk_id.clone());
                if !seen_keys.insert(key.clone()) {
                    continue;
                }
                let text = catalog.text(&key).ok_or_else(|| EvalError::UnknownChunk(key.clone()))?;
                let next = texts.len();
                let c = *candidate_of.entry(text).or_insert_with(|| {
                    texts.push(text);
                    next
                });
                key_candidate.push(c);
                keys.push(key);
            }
        }

        let mut raw = Vec::with_capacity(texts.len());
        for batch in texts.chunks(opts.batch_size) {
            let mut attempt = 0;
            let scores = loop {
                match reranker.score(&q.text, batch) {
                    Ok(s) if s.len() == batch.len() => break s,
                    Ok(s) => {
                        return Err(EvalError::Rerank {
                            query_id: q.query_id.clone(),
                            attempts: attempt + 1,
                            checkpoint: opts.checkpoint.clone(),
                            source: crate::providers::ProviderError::Protocol(format!(
                                "{} scores for {} documents",
                                s.len(),
                                batch.len()
                            )),
                        })
                    }
                    Err(e) if attempt >= opts.max_retries => {
                        return Err(EvalError::Rerank {
                            query_id: q.query_id.clone(),
                            attempts: attempt + 1,
                            checkpoint: opts.checkpoint.clone(),
                            source: e,
                        })
                    }
                    Err(e) => {
                        log::debug!("rerank attempt {} for {} failed: {e}", attempt + 1, q.query_id);
                        attempt += 1;
                    }
                }
            };
            raw.extend(scores);
        }
        let normalized = min_max(&raw);
        let threshold = percentile(&normalized, opts.high_percentile).unwrap_or(1.0);

        let query_judgments: Vec<RelevanceJudgment> = keys
            .into_iter()
            .zip(key_candidate)
            .map(|(key, c)| RelevanceJudgment {
                query_id: q.query_id.clone(),
                chunking: key.chunking,
                chunk_id: key.chunk_id,
                candidate: c,
                raw_score: raw[c],
                normalized_score: normalized[c],
                relevant: normalized[c] >= opts.tau,
                highly_relevant: normalized[c] > threshold,
            })
            .collect();
        if let Some(p) = &opts.checkpoint {
            append(p, &query_judgments)?;
        }
        judgments.extend(query_judgments);
    }

    // restore query order when some came from a checkpoint
    let order: HashMap<&str, usize> = queries.iter().enumerate().map(|(i, q)| (q.query_id.as_str(), i)).collect();
    judgments.sort_by_key(|j| order.get(j.query_id.as_str()).copied().unwrap_or(usize::MAX));
    if let Some(p) = &opts.checkpoint {
        let _ = fs::remove_file(p);
    }
    Ok(judgments)
}
