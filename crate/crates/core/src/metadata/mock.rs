//! Deterministic heuristic metadata, used offline and as the fallback when
//! a provider cannot produce valid output.

use std::collections::HashMap;
use std::sync::OnceLock;

use regex::Regex;

use super::prompt::{SOURCE_LINE, TEXT_HEADER, TRUNCATION_MARKER};
use super::{ChunkMetadata, ContentType};
use crate::chunking::ChunkRecord;
use crate::providers::{ChatProvider, ChatRequest, ProviderError};
use crate::retrieval::detect_intent;
use crate::tokenizer::{truncate_tokens, Tokenizer, WordTokenizer};

const TOP_KEYWORDS: usize = 5;
const SUMMARY_TOKENS: usize = 30;
const MAX_ENTITIES: usize = 10;

const STOPWORDS: &[&str] = &[
    "a", "about", "after", "all", "also", "an", "and", "any", "are", "as", "at", "be", "because", "been", "before",
    "but", "by", "can", "could", "do", "does", "each", "for", "from", "had", "has", "have", "how", "i", "if", "in",
    "into", "is", "it", "its", "may", "more", "most", "must", "no", "not", "of", "on", "only", "or", "other", "our",
    "out", "over", "same", "should", "so", "some", "such", "than", "that", "the", "their", "them", "then", "there",
    "these", "they", "this", "those", "to", "up", "use", "used", "uses", "using", "was", "we", "were", "what",
    "when", "where", "which", "while", "who", "will", "with", "within", "would", "you", "your",
];

const IMPERATIVE_VERBS: &[&str] = &[
    "add", "apply", "attach", "call", "check", "choose", "click", "configure", "copy", "create", "define", "delete",
    "disable", "download", "edit", "enable", "enter", "follow", "go", "grant", "install", "make", "navigate", "open",
    "remove", "replace", "run", "save", "select", "send", "set", "sign", "specify", "start", "stop", "type",
    "update", "upload", "use", "verify",
];

/// Fraction of word tokens that look like API identifiers above which a
/// chunk counts as reference material.
const API_DENSITY: f64 = 0.1;

fn api_token_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    // PutObject, ListObjectsV2, x_amz_date, getBucketAcl
    RE.get_or_init(|| Regex::new(r"^(?:[A-Za-z][a-z0-9]+[A-Z][A-Za-z0-9]*|[A-Za-z0-9]+_[A-Za-z0-9_]+)$").expect("static regex"))
}

fn is_stopword(w: &str) -> bool {
    STOPWORDS.binary_search(&w).is_ok()
}

fn sentences(text: &str) -> Vec<&str> {
    let tokens = WordTokenizer.tokenize(text);
    crate::chunking::sentence_spans(text, &tokens)
        .into_iter()
        .map(|r| &text[tokens[r.start].start..tokens[r.end - 1].end])
        .collect()
}

fn has_code(text: &str) -> bool {
    text.contains('`')
        || text.contains("();")
        || text
            .lines()
            .any(|l| (l.starts_with("    ") || l.starts_with('\t')) && !l.trim().is_empty())
}

fn keywords(text: &str) -> Vec<String> {
    let mut counts: HashMap<String, (usize, usize)> = HashMap::new();
    for (pos, tok) in WordTokenizer.tokenize(text).iter().enumerate() {
        if !tok.is_word() || tok.text.len() < 2 || tok.text.chars().all(|c| c.is_ascii_digit()) {
            continue;
        }
        let w = tok.text.to_lowercase();
        if is_stopword(&w) {
            continue;
        }
        counts.entry(w).or_insert((0, pos)).0 += 1;
    }
    let mut ranked: Vec<(String, usize, usize)> = counts.into_iter().map(|(w, (n, first))| (w, n, first)).collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(&b.2)));
    ranked.into_iter().take(TOP_KEYWORDS).map(|(w, _, _)| w).collect()
}

fn entities(text: &str) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for tok in WordTokenizer.tokenize(text) {
        if !tok.is_word() {
            continue;
        }
        let t = tok.text;
        let upper = t.chars().filter(|c| c.is_uppercase()).count();
        let looks_named = upper >= 2 || (upper == 1 && !t.starts_with(char::is_uppercase));
        if looks_named && !out.iter().any(|e| e == t) {
            out.push(t.to_string());
            if out.len() == MAX_ENTITIES {
                break;
            }
        }
    }
    out
}

fn content_type(text: &str) -> ContentType {
    let sents = sentences(text);
    let imperative = sents
        .iter()
        .filter(|s| {
            WordTokenizer
                .tokenize(s)
                .first()
                .is_some_and(|t| IMPERATIVE_VERBS.contains(&t.text.to_lowercase().as_str()))
        })
        .count();
    let lower = text.to_lowercase();
    if !sents.is_empty() && imperative * 2 > sents.len() {
        return ContentType::Procedural;
    }
    if lower.contains("warning") || lower.contains("caution") {
        return ContentType::Warning;
    }
    if lower.contains("for example") {
        return ContentType::Example;
    }
    let words: Vec<_> = WordTokenizer.tokenize(text).into_iter().filter(|t| t.is_word()).collect();
    let api = words.iter().filter(|t| api_token_regex().is_match(t.text)).count();
    if !words.is_empty() && api as f64 / words.len() as f64 >= API_DENSITY {
        return ContentType::Reference;
    }
    ContentType::Conceptual
}

fn summary(text: &str) -> String {
    let first = sentences(text).into_iter().next().unwrap_or(text.trim());
    let (kept, _) = truncate_tokens(&WordTokenizer, first, SUMMARY_TOKENS);
    if kept.is_empty() {
        "(empty)".to_string()
    } else {
        kept.to_string()
    }
}

fn metadata_for(text: &str, source_tag: &str) -> ChunkMetadata {
    let keywords = keywords(text);
    let questions = keywords.iter().take(2).map(|k| format!("What should I know about {k}?")).collect();
    ChunkMetadata {
        content_type: content_type(text),
        keywords,
        entities: entities(text),
        has_code: has_code(text),
        primary_category: source_tag.to_string(),
        secondary_categories: Vec::new(),
        services: Vec::new(),
        tools: Vec::new(),
        summary: summary(text),
        intents: vec![detect_intent(text)],
        questions,
    }
}

/// Heuristic metadata computed from the chunk text alone.
pub fn mock_enrich(chunk: &ChunkRecord) -> ChunkMetadata {
    metadata_for(&chunk.text, &chunk.source_tag)
}

/// Chat provider that answers metadata prompts with [`mock_enrich`]-style
/// JSON, reading the source tag and chunk text back out of the user prompt.
#[derive(Debug, Clone, Default)]
pub struct MockChatProvider;

impl ChatProvider for MockChatProvider {
    fn name(&self) -> &str {
        "mock"
    }

    fn complete(&self, request: &ChatRequest) -> Result<String, ProviderError> {
        let user = request.user.as_str();
        let (head, text) = user
            .split_once(TEXT_HEADER)
            .ok_or_else(|| ProviderError::Protocol("prompt has no chunk text section".into()))?;
        let source = head
            .lines()
            .find_map(|l| l.strip_prefix(SOURCE_LINE))
            .unwrap_or("uncategorized");
        let text = text
            .strip_suffix(TRUNCATION_MARKER)
            .map_or(text, |t| t.strip_suffix('\n').unwrap_or(t));
        let metadata = metadata_for(text, source);
        Ok(serde_json::to_string(&metadata).expect("metadata serializes"))
    }
}
