use super::{record_from_range, ChunkRecord, ChunkingConfig, ChunkingError};
use crate::corpus::Document;
use crate::tokenizer::Tokenizer;

/// Fixed-size, non-overlapping token windows. The last window may be short.
pub fn chunk_naive(
    doc: &Document,
    cfg: &ChunkingConfig,
    tokenizer: &dyn Tokenizer,
) -> Result<Vec<ChunkRecord>, ChunkingError> {
    if cfg.max_tokens == 0 {
        return Err(ChunkingError::InvalidConfig("max_tokens must be at least 1".into()));
    }
    let tokens = tokenizer.tokenize(&doc.body);
    let chunks = (0..tokens.len())
        .step_by(cfg.max_tokens)
        .enumerate()
        .map(|(i, start)| {
            let end = (start + cfg.max_tokens).min(tokens.len());
            record_from_range(doc, &tokens, start..end, cfg.strategy, i)
        })
        .collect();
    Ok(chunks)
}
