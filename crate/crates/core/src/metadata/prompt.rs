use crate::chunking::ChunkRecord;
use crate::tokenizer::{truncate_tokens, Tokenizer};

use super::{ContentType, Intent};

pub const DEFAULT_PROMPT_BUDGET: usize = 2048;
pub const TRUNCATION_MARKER: &str = "[TRUNCATED]";

pub(crate) const SOURCE_LINE: &str = "Source category: ";
pub(crate) const TEXT_HEADER: &str = "Chunk text:\n";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptPair {
    pub system: String,
    pub user: String,
}

fn quoted_list(values: impl IntoIterator<Item = &'static str>) -> String {
    values.into_iter().map(|v| format!("\"{v}\"")).collect::<Vec<_>>().join(", ")
}

fn system_prompt() -> String {
    format!(
        r#"You annotate chunks of technical documentation for a retrieval system.
Reply with a single JSON object and nothing else: no prose, no markdown.
The object must have exactly these fields:
  "content_type": one of {content_types}
  "keywords": array of up to 10 short lowercase keywords
  "entities": array of named entities (products, APIs, identifiers)
  "has_code": true if the chunk contains a code example, else false
  "primary_category": the main topic category of the chunk
  "secondary_categories": array of further categories
  "services": array of services mentioned
  "tools": array of technical tools referenced (CLIs, SDKs, consoles)
  "summary": one or two sentences summarising the chunk
  "intents": non-empty array drawn from {intents}
  "questions": array of up to 5 questions a user could ask that this chunk answers"#,
        content_types = quoted_list(ContentType::ALL.map(ContentType::as_str)),
        intents = quoted_list(Intent::ALL.map(Intent::as_str)),
    )
}

/// Prompt pair for one chunk. The chunk text is included verbatim, cut to
/// `budget` tokens; a cut prompt ends with [`TRUNCATION_MARKER`].
pub fn build_prompt(chunk: &ChunkRecord, tokenizer: &dyn Tokenizer, budget: usize) -> PromptPair {
    let (text, truncated) = truncate_tokens(tokenizer, &chunk.text, budget);
    let mut user = format!("{SOURCE_LINE}{}\n{TEXT_HEADER}{text}", chunk.source_tag);
    if truncated {
        user.push('\n');
        user.push_str(TRUNCATION_MARKER);
    }
    PromptPair {
        system: system_prompt(),
        user,
    }
}
