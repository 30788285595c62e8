//! Unit-norm chunk and query vectors under three strategies: raw content,
//! content fused with projected metadata TF-IDF, and content with a rendered
//! metadata prefix.

mod mock;
mod tfidf;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metadata::{ChunkMetadata, EnrichedChunk};
use crate::providers::{EmbeddingProvider, ProviderError};
use crate::tokenizer::{truncate_tokens, Tokenizer};
use crate::vector::normalize;

pub use mock::{mock_embed, token_vector, MockEmbedder, DEFAULT_DIMENSION, DEFAULT_MOCK_SEED};
pub use tfidf::{smoothed_idf, terms, SparseProjection, TfidfModel, DEFAULT_PROJECTION_SEED};

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("{id}: {source}")]
    Provider {
        id: String,
        #[source]
        source: ProviderError,
    },
    #[error("{0}: nothing to embed")]
    EmptyText(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("{id}: metadata prefix is {prefix_tokens} tokens, over the provider budget of {budget}")]
    PrefixTooLong {
        id: String,
        prefix_tokens: usize,
        budget: usize,
    },
    #[error("invalid fusion weights: {0}")]
    InvalidWeights(String),
    #[error("tf-idf: {0}")]
    Tfidf(String),
    #[error("{0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingStrategy {
    Content,
    TfidfWeighted,
    PrefixFusion,
}

impl EmbeddingStrategy {
    /// Report row order.
    pub const ALL: [EmbeddingStrategy; 3] = [Self::Content, Self::PrefixFusion, Self::TfidfWeighted];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Content => "content",
            Self::TfidfWeighted => "tfidf_weighted",
            Self::PrefixFusion => "prefix_fusion",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Self::Content => "Content",
            Self::TfidfWeighted => "TF-IDF",
            Self::PrefixFusion => "Prefix-Fusion",
        }
    }
}

impl fmt::Display for EmbeddingStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EmbeddingStrategy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|e| e.as_str() == s)
            .ok_or_else(|| format!("unknown embedding strategy {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    /// Chunk id or query id.
    pub id: String,
    pub strategy: EmbeddingStrategy,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusionWeights {
    pub content_weight: f64,
    pub metadata_weight: f64,
}

impl Default for FusionWeights {
    fn default() -> Self {
        Self {
            content_weight: 0.7,
            metadata_weight: 0.3,
        }
    }
}

impl FusionWeights {
    pub fn new(content_weight: f64, metadata_weight: f64) -> Result<Self, EmbeddingError> {
        let w = Self {
            content_weight,
            metadata_weight,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<(), EmbeddingError> {
        let (c, m) = (self.content_weight, self.metadata_weight);
        if !(c >= 0.0 && m >= 0.0) {
            return Err(EmbeddingError::InvalidWeights(format!("negative weight in ({c}, {m})")));
        }
        if ((c + m) - 1.0).abs() > 1e-9 {
            return Err(EmbeddingError::InvalidWeights(format!("({c}, {m}) does not sum to 1")));
        }
        Ok(())
    }
}

/// Result of [`fuse`]: the unit vector and the norm before renormalizing.
#[derive(Debug, Clone, PartialEq)]
pub struct Fused {
    pub vector: Vec<f64>,
    pub pre_norm: f64,
}

/// `w_c·ĉ + w_m·t̂`, renormalized. Both inputs are normalized first; with no
/// TF-IDF component the result is `ĉ`.
pub fn fuse(content: &[f64], tfidf: Option<&[f64]>, weights: FusionWeights) -> Result<Fused, EmbeddingError> {
    weights.validate()?;
    let mut c = content.to_vec();
    normalize(&mut c);
    let Some(t) = tfidf else {
        return Ok(Fused {
            vector: c,
            pre_norm: 1.0,
        });
    };
    if t.len() != c.len() {
        return Err(EmbeddingError::DimensionMismatch {
            expected: c.len(),
            got: t.len(),
        });
    }
    let mut t = t.to_vec();
    normalize(&mut t);
    let mut v: Vec<f64> = c
        .iter()
        .zip(&t)
        .map(|(x, y)| weights.content_weight * x + weights.metadata_weight * y)
        .collect();
    let pre_norm = normalize(&mut v);
    if pre_norm == 0.0 {
        // ĉ = -t̂ with equal weights
        return Ok(Fused { vector: c, pre_norm });
    }
    Ok(Fused { vector: v, pre_norm })
}

fn csv_or_dash<T: AsRef<str>>(items: &[T]) -> String {
    if items.is_empty() {
        "-".to_string()
    } else {
        items.iter().map(AsRef::as_ref).collect::<Vec<_>>().join(", ")
    }
}

/// The metadata block prepended to chunk text for prefix fusion.
pub fn render_prefix(m: &ChunkMetadata) -> String {
    let intents: Vec<&str> = m.intents.iter().map(|i| i.as_str()).collect();
    format!(
        "[category: {} | type: {} | intents: {} | keywords: {}]\n{}\n---\n",
        m.primary_category,
        m.content_type,
        csv_or_dash(&intents),
        csv_or_dash(&m.keywords),
        m.summary
    )
}

/// Prefix used on queries for the prefix-fusion retriever.
pub fn render_query_prefix(intent: crate::metadata::Intent) -> String {
    format!("[intent: {intent}]\n")
}

/// Batching and retry policy for provider calls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmbedOptions {
    pub batch_size: usize,
    pub max_retries: usize,
    pub parallelism: usize,
}

impl Default for EmbedOptions {
    fn default() -> Self {
        Self {
            batch_size: 32,
            max_retries: 2,
            parallelism: 4,
        }
    }
}

fn check_dimension(provider: &dyn EmbeddingProvider, v: &[f64]) -> Result<(), EmbeddingError> {
    if v.len() != provider.dimension() {
        return Err(EmbeddingError::DimensionMismatch {
            expected: provider.dimension(),
            got: v.len(),
        });
    }
    Ok(())
}

fn with_retries<T>(retries: usize, mut f: impl FnMut() -> Result<T, ProviderError>) -> Result<T, ProviderError> {
    let mut attempt = 0;
    loop {
        match f() {
            Ok(v) => return Ok(v),
            Err(e) if attempt >= retries => return Err(e),
            Err(e) => {
                log::debug!("embedding attempt {} failed: {e}", attempt + 1);
                attempt += 1;
            }
        }
    }
}

/// Embed `(id, text)` pairs with batching, bounded concurrency and retries.
/// Output vectors are normalized and in input order.
pub fn embed_texts(
    provider: &dyn EmbeddingProvider,
    items: &[(String, String)],
    opts: &EmbedOptions,
) -> Result<Vec<Vec<f64>>, EmbeddingError> {
    for (id, text) in items {
        if text.trim().is_empty() {
            return Err(EmbeddingError::EmptyText(id.clone()));
        }
    }
    let batches: Vec<&[(String, String)]> = items.chunks(opts.batch_size.max(1)).collect();
    let run = |batch: &[(String, String)]| -> Result<Vec<Vec<f64>>, EmbeddingError> {
        let texts: Vec<&str> = batch.iter().map(|(_, t)| t.as_str()).collect();
        let out = with_retries(opts.max_retries, || provider.embed(&texts)).map_err(|source| {
            EmbeddingError::Provider {
                id: batch.first().map(|(id, _)| id.clone()).unwrap_or_default(),
                source,
            }
        })?;
        if out.len() != batch.len() {
            return Err(EmbeddingError::Provider {
                id: batch[0].0.clone(),
                source: ProviderError::Protocol(format!("{} vectors for {} inputs", out.len(), batch.len())),
            });
        }
        out.into_iter()
            .map(|mut v| {
                check_dimension(provider, &v)?;
                normalize(&mut v);
                Ok(v)
            })
            .collect()
    };

    let workers = opts.parallelism.clamp(1, batches.len().max(1));
    let mut results: Vec<Option<Result<Vec<Vec<f64>>, EmbeddingError>>> = (0..batches.len()).map(|_| None).collect();
    std::thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let batches = &batches;
                let run = &run;
                s.spawn(move || {
                    (w..batches.len())
                        .step_by(workers)
                        .map(|i| (i, run(batches[i])))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        for h in handles {
            for (i, r) in h.join().expect("embedding worker panicked") {
                results[i] = Some(r);
            }
        }
    });
    let mut out = Vec::with_capacity(items.len());
    for r in results {
        out.extend(r.expect("every batch ran")?);
    }
    Ok(out)
}

/// Content-only embedding of trimmed chunk text.
pub fn embed_content(id: &str, text: &str, provider: &dyn EmbeddingProvider) -> Result<EmbeddingVector, EmbeddingError> {
    let values = embed_texts(
        provider,
        &[(id.to_string(), text.trim().to_string())],
        &EmbedOptions::default(),
    )?
    .pop()
    .expect("one input, one vector");
    Ok(EmbeddingVector {
        id: id.to_string(),
        strategy: EmbeddingStrategy::Content,
        values,
    })
}

/// Metadata-text TF-IDF fused with the content embedding.
pub fn embed_tfidf_weighted(
    enriched: &EnrichedChunk,
    provider: &dyn EmbeddingProvider,
    model: &TfidfModel,
    weights: FusionWeights,
) -> Result<EmbeddingVector, EmbeddingError> {
    let c = embed_content(&enriched.chunk.chunk_id, &enriched.chunk.text, provider)?;
    let t = model.tfidf_vector(&enriched.metadata.tfidf_text());
    Ok(EmbeddingVector {
        id: c.id,
        strategy: EmbeddingStrategy::TfidfWeighted,
        values: fuse(&c.values, t.as_deref(), weights)?.vector,
    })
}

/// `render_prefix(metadata) + text`, cutting text so the whole input fits
/// the provider budget. The prefix is never cut.
pub fn prefix_input(enriched: &EnrichedChunk, tokenizer: &dyn Tokenizer, budget: usize) -> Result<String, EmbeddingError> {
    let prefix = render_prefix(&enriched.metadata);
    let prefix_tokens = tokenizer.count(&prefix);
    if prefix_tokens > budget {
        return Err(EmbeddingError::PrefixTooLong {
            id: enriched.chunk.chunk_id.clone(),
            prefix_tokens,
            budget,
        });
    }
    let (text, cut) = truncate_tokens(tokenizer, enriched.chunk.text.trim(), budget - prefix_tokens);
    if cut {
        log::debug!("{}: chunk text truncated to fit the embedding budget", enriched.chunk.chunk_id);
    }
    Ok(prefix + text)
}

pub fn embed_prefix_fusion(
    enriched: &EnrichedChunk,
    provider: &dyn EmbeddingProvider,
    tokenizer: &dyn Tokenizer,
) -> Result<EmbeddingVector, EmbeddingError> {
    let input = prefix_input(enriched, tokenizer, provider.token_budget())?;
    let id = enriched.chunk.chunk_id.clone();
    let values = embed_texts(provider, &[(id.clone(), input)], &EmbedOptions::default())?
        .pop()
        .expect("one input, one vector");
    Ok(EmbeddingVector {
        id,
        strategy: EmbeddingStrategy::PrefixFusion,
        values,
    })
}

/// Embed every enriched chunk under `strategy`, batching provider calls.
/// `model` is required for [`EmbeddingStrategy::TfidfWeighted`].
pub fn embed_chunks(
    enriched: &[EnrichedChunk],
    strategy: EmbeddingStrategy,
    provider: &dyn EmbeddingProvider,
    tokenizer: &dyn Tokenizer,
    model: Option<&TfidfModel>,
    weights: FusionWeights,
    opts: &EmbedOptions,
) -> Result<Vec<EmbeddingVector>, EmbeddingError> {
    let inputs: Vec<(String, String)> = match strategy {
        EmbeddingStrategy::Content | EmbeddingStrategy::TfidfWeighted => enriched
            .iter()
            .map(|e| (e.chunk.chunk_id.clone(), e.chunk.text.trim().to_string()))
            .collect(),
        EmbeddingStrategy::PrefixFusion => enriched
            .iter()
            .map(|e| Ok((e.chunk.chunk_id.clone(), prefix_input(e, tokenizer, provider.token_budget())?)))
            .collect::<Result<_, EmbeddingError>>()?,
    };
    let mut vectors = embed_texts(provider, &inputs, opts)?;
    if strategy == EmbeddingStrategy::TfidfWeighted {
        let model = model.ok_or_else(|| EmbeddingError::Tfidf("tfidf_weighted needs a fitted model".into()))?;
        if model.dimension() != provider.dimension() {
            return Err(EmbeddingError::DimensionMismatch {
                expected: provider.dimension(),
                got: model.dimension(),
            });
        }
        for (v, e) in vectors.iter_mut().zip(enriched) {
            let t = model.tfidf_vector(&e.metadata.tfidf_text());
            *v = fuse(v, t.as_deref(), weights)?.vector;
        }
    }
    Ok(inputs
        .into_iter()
        .zip(vectors)
        .map(|((id, _), values)| EmbeddingVector { id, strategy, values })
        .collect())
}
