//! Response parsing and schema normalisation.

use serde_json::{Map, Value};
use thiserror::Error;

use super::{ChunkMetadata, ContentType, Intent};

pub const MAX_KEYWORDS: usize = 10;
pub const MAX_QUESTIONS: usize = 5;
pub const MAX_INTENTS: usize = 4;

/// The response could not be turned into metadata; asking again may help.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("unparseable metadata response: {0}")]
pub struct RetryableParseError(pub String);

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedMetadata {
    pub metadata: ChunkMetadata,
    /// Coercions applied while normalising (unknown enum values and so on).
    pub warnings: Vec<String>,
}

fn strip_fences(text: &str) -> &str {
    let t = text.trim();
    let t = if let Some(rest) = t.strip_prefix("```") {
        // drop the info string ("json") on the opening fence line
        let rest = rest.split_once('\n').map_or("", |(_, body)| body);
        rest.trim_end().strip_suffix("```").unwrap_or(rest).trim()
    } else {
        t
    };
    match (t.find('{'), t.rfind('}')) {
        (Some(a), Some(b)) if a < b => &t[a..=b],
        _ => t,
    }
}

fn string_list(obj: &Map<String, Value>, key: &str) -> Result<Vec<String>, RetryableParseError> {
    match obj.get(key) {
        None | Some(Value::Null) => Ok(Vec::new()),
        Some(Value::Array(items)) => items
            .iter()
            .map(|v| match v {
                Value::String(s) => Ok(s.trim().to_string()),
                other => Err(RetryableParseError(format!("{key}: expected strings, found {other}"))),
            })
            .filter(|r| r.as_ref().map_or(true, |s| !s.is_empty()))
            .collect(),
        Some(Value::String(s)) => Ok(s
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(String::from)
            .collect()),
        Some(other) => Err(RetryableParseError(format!("{key}: expected an array, found {other}"))),
    }
}

fn string_field(obj: &Map<String, Value>, key: &str) -> Result<Option<String>, RetryableParseError> {
    match obj.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) => Ok(Some(s.trim().to_string()).filter(|s| !s.is_empty())),
        Some(other) => Err(RetryableParseError(format!("{key}: expected a string, found {other}"))),
    }
}

/// Keep first occurrences only.
fn dedup_in_order(items: Vec<String>) -> Vec<String> {
    let mut out: Vec<String> = Vec::with_capacity(items.len());
    for item in items {
        if !out.contains(&item) {
            out.push(item);
        }
    }
    out
}

/// Parse a chat response into validated metadata.
///
/// Markdown code fences are stripped. Keywords are lowercased, deduplicated
/// in first-seen order and capped at [`MAX_KEYWORDS`]; questions and intents
/// are capped likewise. Unknown `content_type` values become `reference` and
/// unknown intents are dropped, both with a recorded warning.
pub fn parse_metadata(response: &str) -> Result<ParsedMetadata, RetryableParseError> {
    let value: Value = serde_json::from_str(strip_fences(response)).map_err(|e| RetryableParseError(e.to_string()))?;
    let Value::Object(obj) = value else {
        return Err(RetryableParseError("response is not a JSON object".into()));
    };
    let mut warnings = Vec::new();

    let content_type = match string_field(&obj, "content_type")? {
        Some(raw) => raw.to_lowercase().parse::<ContentType>().unwrap_or_else(|_| {
            warnings.push(format!("unknown content_type {raw:?} coerced to \"reference\""));
            ContentType::Reference
        }),
        None => {
            warnings.push("missing content_type coerced to \"reference\"".into());
            ContentType::Reference
        }
    };

    let mut keywords = dedup_in_order(
        string_list(&obj, "keywords")?
            .into_iter()
            .map(|k| k.to_lowercase())
            .collect(),
    );
    keywords.truncate(MAX_KEYWORDS);

    let has_code = match obj.get("has_code") {
        Some(Value::Bool(b)) => *b,
        Some(Value::String(s)) if s.eq_ignore_ascii_case("true") => true,
        Some(Value::String(s)) if s.eq_ignore_ascii_case("false") => false,
        None | Some(Value::Null) => {
            warnings.push("missing has_code treated as false".into());
            false
        }
        Some(other) => return Err(RetryableParseError(format!("has_code: expected a boolean, found {other}"))),
    };

    let primary_category = string_field(&obj, "primary_category")?.unwrap_or_else(|| {
        warnings.push("missing primary_category set to \"uncategorized\"".into());
        "uncategorized".into()
    });

    let summary = string_field(&obj, "summary")?.ok_or_else(|| RetryableParseError("summary is missing or empty".into()))?;

    let mut intents: Vec<Intent> = Vec::new();
    for raw in string_list(&obj, "intents")? {
        match raw.to_lowercase().parse::<Intent>() {
            Ok(i) if !intents.contains(&i) => intents.push(i),
            Ok(_) => {}
            Err(_) => warnings.push(format!("unknown intent {raw:?} dropped")),
        }
    }
    if intents.is_empty() {
        warnings.push("no valid intents; defaulted to \"reference\"".into());
        intents.push(Intent::Reference);
    }
    intents.truncate(MAX_INTENTS);

    let mut questions = string_list(&obj, "questions")?;
    questions.truncate(MAX_QUESTIONS);

    let metadata = ChunkMetadata {
        content_type,
        keywords,
        entities: dedup_in_order(string_list(&obj, "entities")?),
        has_code,
        primary_category,
        secondary_categories: dedup_in_order(string_list(&obj, "secondary_categories")?),
        services: dedup_in_order(string_list(&obj, "services")?),
        tools: dedup_in_order(string_list(&obj, "tools")?),
        summary,
        intents,
        questions,
    };
    metadata.validate().map_err(RetryableParseError)?;
    Ok(ParsedMetadata { metadata, warnings })
}
