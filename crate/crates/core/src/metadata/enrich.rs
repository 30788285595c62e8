//! Batched, retrying, resumable enrichment driver.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use log::{debug, warn};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{build_prompt, mock_enrich, parse_metadata, EnrichedChunk, DEFAULT_PROMPT_BUDGET};
use crate::chunking::ChunkRecord;
use crate::providers::{ChatProvider, ChatRequest, ProviderError};
use crate::tokenizer::Tokenizer;

pub const FALLBACK_TAG: &str = "fallback-mock";

#[derive(Debug, Error)]
pub enum EnrichError {
    #[error("batch_size must be at least 1")]
    InvalidBatchSize,
    #[error("provider unreachable after {completed} chunks; progress saved to {checkpoint:?}: {source}")]
    Aborted {
        completed: usize,
        checkpoint: Option<PathBuf>,
        #[source]
        source: ProviderError,
    },
    #[error("checkpoint {path}: {message}")]
    Checkpoint { path: PathBuf, message: String },
}

#[derive(Debug, Clone)]
pub struct EnrichOptions {
    pub batch_size: usize,
    pub max_retries: usize,
    /// Upper bound on in-flight provider requests within a batch.
    pub parallelism: usize,
    pub temperature: f64,
    pub max_output_tokens: usize,
    pub prompt_budget: usize,
    /// JSONL file receiving each completed batch; an existing file is resumed from.
    pub checkpoint: Option<PathBuf>,
}

impl Default for EnrichOptions {
    fn default() -> Self {
        Self {
            batch_size: 16,
            max_retries: 2,
            parallelism: 4,
            temperature: 0.5,
            max_output_tokens: 1024,
            prompt_budget: DEFAULT_PROMPT_BUDGET,
            checkpoint: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnrichFailure {
    pub chunk_id: String,
    pub attempts: usize,
    pub last_error: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EnrichReport {
    pub total: usize,
    /// Chunks restored from a checkpoint instead of being requested again.
    pub resumed: usize,
    /// Sizes of the batches processed in this run.
    pub batches: Vec<usize>,
    pub retries: usize,
    pub failures: Vec<EnrichFailure>,
    pub warnings: Vec<String>,
}

#[derive(Debug)]
pub struct EnrichOutcome {
    pub enriched: Vec<EnrichedChunk>,
    pub report: EnrichReport,
}

#[allow(clippy::large_enum_variant)]
enum ChunkResult {
    Done {
        enriched: EnrichedChunk,
        retries: usize,
        warnings: Vec<String>,
        failure: Option<EnrichFailure>,
    },
    Unreachable(ProviderError),
}

fn enrich_one(
    chunk: &ChunkRecord,
    provider: &dyn ChatProvider,
    tokenizer: &dyn Tokenizer,
    opts: &EnrichOptions,
) -> ChunkResult {
    let prompt = build_prompt(chunk, tokenizer, opts.prompt_budget);
    let request = ChatRequest {
        system: prompt.system,
        user: prompt.user,
        temperature: opts.temperature,
        max_tokens: opts.max_output_tokens,
    };
    let attempts = opts.max_retries + 1;
    let mut last_error = String::new();
    for attempt in 0..attempts {
        match provider.complete(&request) {
            Ok(text) => match parse_metadata(&text) {
                Ok(parsed) => {
                    return ChunkResult::Done {
                        enriched: EnrichedChunk {
                            chunk: chunk.clone(),
                            metadata: parsed.metadata,
                            generator_tag: provider.name().to_string(),
                        },
                        retries: attempt,
                        warnings: parsed.warnings.into_iter().map(|w| format!("{}: {w}", chunk.chunk_id)).collect(),
                        failure: None,
                    }
                }
                Err(e) => last_error = e.to_string(),
            },
            Err(e @ ProviderError::Unreachable(_)) if attempt + 1 == attempts => return ChunkResult::Unreachable(e),
            Err(e) => last_error = e.to_string(),
        }
        debug!("{}: attempt {} failed: {last_error}", chunk.chunk_id, attempt + 1);
    }
    warn!("{}: falling back to heuristic metadata: {last_error}", chunk.chunk_id);
    ChunkResult::Done {
        enriched: EnrichedChunk {
            chunk: chunk.clone(),
            metadata: mock_enrich(chunk),
            generator_tag: FALLBACK_TAG.to_string(),
        },
        retries: opts.max_retries,
        warnings: Vec::new(),
        failure: Some(EnrichFailure {
            chunk_id: chunk.chunk_id.clone(),
            attempts,
            last_error,
        }),
    }
}

fn run_batch(
    batch: &[ChunkRecord],
    provider: &dyn ChatProvider,
    tokenizer: &dyn Tokenizer,
    opts: &EnrichOptions,
) -> Vec<ChunkResult> {
    let slots: Vec<Mutex<Option<ChunkResult>>> = batch.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = opts.parallelism.clamp(1, batch.len().max(1));
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= batch.len() {
                    break;
                }
                let r = enrich_one(&batch[i], provider, tokenizer, opts);
                *slots[i].lock().expect("slot lock") = Some(r);
            });
        }
    });
    slots
        .into_iter()
        .map(|m| m.into_inner().expect("slot lock").expect("every slot filled"))
        .collect()
}

fn load_checkpoint(path: &Path, chunks: &[ChunkRecord]) -> Result<Vec<EnrichedChunk>, EnrichError> {
    let err = |message: String| EnrichError::Checkpoint {
        path: path.to_path_buf(),
        message,
    };
    let file = match fs::File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(err(e.to_string())),
    };
    let mut done = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| err(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: EnrichedChunk = serde_json::from_str(&line).map_err(|e| err(format!("line {}: {e}", i + 1)))?;
        let expected = chunks.get(done.len()).map(|c| c.chunk_id.as_str());
        if expected != Some(rec.chunk.chunk_id.as_str()) {
            return Err(err(format!(
                "line {} holds {} but the input has {:?} at that position; delete the checkpoint to restart",
                i + 1,
                rec.chunk.chunk_id,
                expected
            )));
        }
        done.push(rec);
    }
    Ok(done)
}

fn append_checkpoint(path: &Path, records: &[EnrichedChunk]) -> Result<(), EnrichError> {
    let err = |e: std::io::Error| EnrichError::Checkpoint {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let mut f = fs::OpenOptions::new().create(true).append(true).open(path).map_err(err)?;
    for r in records {
        writeln!(f, "{}", serde_json::to_string(r).expect("record serializes")).map_err(err)?;
    }
    f.flush().map_err(err)
}

/// Enrich every chunk, in input order.
///
/// Chunks are grouped into batches of `batch_size`; within a batch up to
/// `parallelism` requests run concurrently. A chunk whose response cannot be
/// parsed, or whose request fails, is retried up to `max_retries` times and
/// then receives heuristic fallback metadata tagged `fallback-mock`. If the
/// provider is still unreachable after the retries the run aborts; completed
/// batches stay in the checkpoint file and a later call resumes from them.
/// The checkpoint is removed once every chunk is done.
pub fn enrich_chunks(
    chunks: &[ChunkRecord],
    provider: &dyn ChatProvider,
    tokenizer: &dyn Tokenizer,
    opts: &EnrichOptions,
) -> Result<EnrichOutcome, EnrichError> {
    if opts.batch_size == 0 {
        return Err(EnrichError::InvalidBatchSize);
    }
    let mut enriched = match &opts.checkpoint {
        Some(path) => load_checkpoint(path, chunks)?,
        None => Vec::new(),
    };
    let mut report = EnrichReport {
        total: chunks.len(),
        resumed: enriched.len(),
        ..EnrichReport::default()
    };

    for batch in chunks[enriched.len()..].chunks(opts.batch_size) {
        report.batches.push(batch.len());
        let mut done = Vec::with_capacity(batch.len());
        for result in run_batch(batch, provider, tokenizer, opts) {
            match result {
                ChunkResult::Done {
                    enriched,
                    retries,
                    warnings,
                    failure,
                } => {
                    report.retries += retries;
                    report.warnings.extend(warnings);
                    report.failures.extend(failure);
                    done.push(enriched);
                }
                ChunkResult::Unreachable(source) => {
                    return Err(EnrichError::Aborted {
                        completed: enriched.len(),
                        checkpoint: opts.checkpoint.clone(),
                        source,
                    })
                }
            }
        }
        if let Some(path) = &opts.checkpoint {
            append_checkpoint(path, &done)?;
        }
        enriched.extend(done);
    }

    if let Some(path) = &opts.checkpoint {
        let _ = fs::remove_file(path);
    }
    Ok(EnrichOutcome { enriched, report })
}
