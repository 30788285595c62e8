//! Embedding-driven segmentation.
//!
//! Sentences are embedded, a breakpoint is placed wherever the similarity of
//! two consecutive sentences falls strictly below the configured percentile
//! of all consecutive similarities in the document, groups are re-packed to
//! respect `max_tokens`, and undersized chunks are merged into their most
//! similar neighbour.

use std::ops::Range;

use super::{record_from_range, ChunkRecord, ChunkingConfig, ChunkingError};
use crate::corpus::Document;
use crate::providers::EmbeddingProvider;
use crate::tokenizer::{Token, Tokenizer};
use crate::vector::{cosine, percentile};

const EMBED_BATCH: usize = 64;

/// Sentence token ranges: a sentence ends at `.`, `!` or `?` followed by
/// whitespace, or at any newline.
pub fn sentence_spans(body: &str, tokens: &[Token<'_>]) -> Vec<Range<usize>> {
    let mut spans = Vec::new();
    if tokens.is_empty() {
        return spans;
    }
    let mut start = 0;
    for j in 1..tokens.len() {
        let prev = &tokens[j - 1];
        let gap = &body[prev.end..tokens[j].start];
        let terminated = prev.text.ends_with(['.', '!', '?']) && !gap.is_empty();
        if terminated || gap.contains('\n') {
            spans.push(start..j);
            start = j;
        }
    }
    spans.push(start..tokens.len());
    spans
}

fn range_text<'a>(body: &'a str, tokens: &[Token<'_>], r: &Range<usize>) -> &'a str {
    &body[tokens[r.start].start..tokens[r.end - 1].end]
}

fn embed_all(embedder: &dyn EmbeddingProvider, texts: &[&str]) -> Result<Vec<Vec<f64>>, ChunkingError> {
    let mut out = Vec::with_capacity(texts.len());
    for batch in texts.chunks(EMBED_BATCH) {
        let vecs = embedder.embed(batch)?;
        if vecs.len() != batch.len() {
            return Err(ChunkingError::Embedding(crate::providers::ProviderError::Protocol(format!(
                "asked for {} embeddings, got {}",
                batch.len(),
                vecs.len()
            ))));
        }
        out.extend(vecs);
    }
    let expected = embedder.dimension();
    if let Some(bad) = out.iter().find(|v| v.len() != expected) {
        return Err(ChunkingError::DimensionMismatch {
            expected,
            got: bad.len(),
        });
    }
    Ok(out)
}

/// Mean pairwise cosine similarity of a set of sentence embeddings; 1.0 for
/// fewer than two sentences.
pub fn coherence(embeddings: &[Vec<f64>]) -> f64 {
    if embeddings.len() < 2 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut pairs = 0usize;
    for i in 0..embeddings.len() {
        for j in i + 1..embeddings.len() {
            sum += cosine(&embeddings[i], &embeddings[j]);
            pairs += 1;
        }
    }
    sum / pairs as f64
}

fn centroid(embeddings: &[Vec<f64>], members: &Range<usize>) -> Vec<f64> {
    let mut c = vec![0.0; embeddings[members.start].len()];
    for e in &embeddings[members.clone()] {
        c.iter_mut().zip(e).for_each(|(a, b)| *a += b);
    }
    c
}

/// A chunk under construction: a run of consecutive sentences.
#[derive(Debug, Clone)]
struct Group {
    sentences: Range<usize>,
    tokens: usize,
}

pub fn chunk_semantic(
    doc: &Document,
    cfg: &ChunkingConfig,
    tokenizer: &dyn Tokenizer,
    embedder: &dyn EmbeddingProvider,
) -> Result<Vec<ChunkRecord>, ChunkingError> {
    let max = cfg.max_tokens;
    if max == 0 {
        return Err(ChunkingError::InvalidConfig("max_tokens must be at least 1".into()));
    }
    let body = doc.body.as_str();
    let tokens = tokenizer.tokenize(body);
    if tokens.is_empty() {
        return Ok(Vec::new());
    }

    // Sentences longer than the chunk limit are pre-split into windows so the
    // size bound can always be met at sentence granularity.
    let sentences: Vec<Range<usize>> = sentence_spans(body, &tokens)
        .into_iter()
        .flat_map(|r| {
            (r.start..r.end)
                .step_by(max)
                .map(move |s| s..(s + max).min(r.end))
                .collect::<Vec<_>>()
        })
        .collect();
    let texts: Vec<&str> = sentences.iter().map(|r| range_text(body, &tokens, r)).collect();
    let embeddings = embed_all(embedder, &texts)?;

    let sims: Vec<f64> = embeddings.windows(2).map(|w| cosine(&w[0], &w[1])).collect();
    let threshold = percentile(&sims, cfg.breakpoint_percentile);

    // breakpoints, then forced splits for size
    let mut groups: Vec<Group> = Vec::new();
    let mut current = Group {
        sentences: 0..0,
        tokens: 0,
    };
    for (i, s) in sentences.iter().enumerate() {
        let breakpoint = i > 0 && threshold.is_some_and(|t| sims[i - 1] < t);
        let overflow = current.tokens + s.len() > max;
        if !current.sentences.is_empty() && (breakpoint || overflow) {
            groups.push(current);
            current = Group {
                sentences: i..i,
                tokens: 0,
            };
        }
        current.sentences.end = i + 1;
        current.tokens += s.len();
    }
    groups.push(current);

    merge_small_groups(&mut groups, &embeddings, cfg.min_tokens, max);

    Ok(groups
        .iter()
        .enumerate()
        .map(|(i, g)| {
            let first = &sentences[g.sentences.start];
            let last = &sentences[g.sentences.end - 1];
            let mut rec = record_from_range(doc, &tokens, first.start..last.end, cfg.strategy, i);
            rec.coherence = Some(coherence(&embeddings[g.sentences.clone()]));
            rec
        })
        .collect())
}

/// Repeatedly fold the first undersized group into whichever neighbour has
/// the more similar centroid, as long as the result stays within `max`.
fn merge_small_groups(groups: &mut Vec<Group>, embeddings: &[Vec<f64>], min: usize, max: usize) {
    loop {
        let mut merged = false;
        for i in 0..groups.len() {
            if groups[i].tokens >= min || groups.len() < 2 {
                continue;
            }
            let own = centroid(embeddings, &groups[i].sentences);
            let candidate = |j: usize| -> Option<(usize, f64)> {
                let g = &groups[j];
                (g.tokens + groups[i].tokens <= max).then(|| (j, cosine(&own, &centroid(embeddings, &g.sentences))))
            };
            let left = i.checked_sub(1).and_then(candidate);
            let right = (i + 1 < groups.len()).then(|| candidate(i + 1)).flatten();
            let target = match (left, right) {
                (Some(l), Some(r)) => Some(if r.1 > l.1 { r.0 } else { l.0 }),
                (Some(l), None) => Some(l.0),
                (None, Some(r)) => Some(r.0),
                (None, None) => None,
            };
            if let Some(j) = target {
                let (lo, hi) = (i.min(j), i.max(j));
                let absorbed = groups.remove(hi);
                groups[lo].sentences.end = absorbed.sentences.end;
                groups[lo].tokens += absorbed.tokens;
                merged = true;
                break;
            }
        }
        if !merged {
            return;
        }
    }
}
