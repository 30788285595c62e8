//! Structured chunk metadata generated by a chat-completion provider.
//!
//! Three groups of fields are produced per chunk: content (type, keywords,
//! entities, code detection), technical (categories, services, tools) and
//! semantic (summary, intents, anticipated questions).

mod enrich;
mod mock;
mod parse;
mod prompt;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::chunking::ChunkRecord;

pub use enrich::{enrich_chunks, EnrichError, EnrichFailure, EnrichOptions, EnrichOutcome, EnrichReport, FALLBACK_TAG};
pub use mock::{mock_enrich, MockChatProvider};
pub use parse::{parse_metadata, ParsedMetadata, RetryableParseError, MAX_INTENTS, MAX_KEYWORDS, MAX_QUESTIONS};
pub use prompt::{build_prompt, PromptPair, DEFAULT_PROMPT_BUDGET, TRUNCATION_MARKER};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContentType {
    Procedural,
    Conceptual,
    Reference,
    Warning,
    Example,
}

impl ContentType {
    pub const ALL: [ContentType; 5] = [
        Self::Procedural,
        Self::Conceptual,
        Self::Reference,
        Self::Warning,
        Self::Example,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Procedural => "procedural",
            Self::Conceptual => "conceptual",
            Self::Reference => "reference",
            Self::Warning => "warning",
            Self::Example => "example",
        }
    }
}

impl fmt::Display for ContentType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ContentType {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown content_type {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Intent {
    #[serde(rename = "how-to")]
    HowTo,
    #[serde(rename = "debugging")]
    Debugging,
    #[serde(rename = "comparison")]
    Comparison,
    #[serde(rename = "reference")]
    Reference,
}

impl Intent {
    pub const ALL: [Intent; 4] = [Self::HowTo, Self::Debugging, Self::Comparison, Self::Reference];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::HowTo => "how-to",
            Self::Debugging => "debugging",
            Self::Comparison => "comparison",
            Self::Reference => "reference",
        }
    }
}

impl fmt::Display for Intent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Intent {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown intent {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChunkMetadata {
    // content
    pub content_type: ContentType,
    pub keywords: Vec<String>,
    pub entities: Vec<String>,
    pub has_code: bool,
    // technical
    pub primary_category: String,
    pub secondary_categories: Vec<String>,
    pub services: Vec<String>,
    pub tools: Vec<String>,
    // semantic
    pub summary: String,
    pub intents: Vec<Intent>,
    pub questions: Vec<String>,
}

impl ChunkMetadata {
    /// Schema check beyond what the type system already enforces.
    pub fn validate(&self) -> Result<(), String> {
        if self.summary.trim().is_empty() {
            return Err("summary is empty".into());
        }
        if self.intents.is_empty() {
            return Err("intents is empty".into());
        }
        if self.intents.len() > MAX_INTENTS {
            return Err(format!("more than {MAX_INTENTS} intents"));
        }
        if self.keywords.len() > MAX_KEYWORDS {
            return Err(format!("more than {MAX_KEYWORDS} keywords"));
        }
        if self.questions.len() > MAX_QUESTIONS {
            return Err(format!("more than {MAX_QUESTIONS} questions"));
        }
        for (i, k) in self.keywords.iter().enumerate() {
            if *k != k.to_lowercase() {
                return Err(format!("keyword {k:?} is not lowercase"));
            }
            if self.keywords[..i].contains(k) {
                return Err(format!("duplicate keyword {k:?}"));
            }
        }
        Ok(())
    }

    /// Text the TF-IDF model is fitted on: keywords, entities, categories,
    /// services, tools, intents and summary, space-joined.
    pub fn tfidf_text(&self) -> String {
        let mut parts: Vec<&str> = Vec::new();
        parts.extend(self.keywords.iter().map(String::as_str));
        parts.extend(self.entities.iter().map(String::as_str));
        parts.push(&self.primary_category);
        parts.extend(self.secondary_categories.iter().map(String::as_str));
        parts.extend(self.services.iter().map(String::as_str));
        parts.extend(self.tools.iter().map(String::as_str));
        parts.extend(self.intents.iter().map(|i| i.as_str()));
        parts.push(&self.summary);
        parts.join(" ")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnrichedChunk {
    #[serde(flatten)]
    pub chunk: ChunkRecord,
    pub metadata: ChunkMetadata,
    /// Model name, `"mock"`, or `"fallback-mock"`.
    pub generator_tag: String,
}
