//! Deterministic word-and-punctuation tokenizer.
//!
//! Tokens are maximal runs of word characters or maximal runs of
//! non-space, non-word characters. Every size limit in the pipeline is
//! expressed in these tokens, so the same [`Tokenizer`] is shared by the
//! chunkers, the prompt builder, the TF-IDF model and the mock providers.

use std::ops::Range;
use std::sync::OnceLock;

use regex::Regex;

/// A token together with its byte span in the source text.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Token<'a> {
    pub text: &'a str,
    pub start: usize,
    pub end: usize,
}

impl Token<'_> {
    pub fn span(&self) -> Range<usize> {
        self.start..self.end
    }

    /// True for runs of word characters (letters, digits, underscore).
    pub fn is_word(&self) -> bool {
        self.text.chars().next().is_some_and(is_word_char)
    }
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

/// Tokenization contract used by every stage.
///
/// Implementations must satisfy `count(t) == tokenize(t).len()` and
/// `tokenize("") == []`. Token spans must be ascending, non-overlapping,
/// and retokenizing any substring cut at token boundaries must reproduce
/// the same tokens.
pub trait Tokenizer: Send + Sync {
    fn tokenize<'a>(&self, text: &'a str) -> Vec<Token<'a>>;

    fn count(&self, text: &str) -> usize {
        self.tokenize(text).len()
    }
}

/// The default regex tokenizer: `\w+|[^\w\s]+`.
#[derive(Debug, Clone, Copy, Default)]
pub struct WordTokenizer;

fn token_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\w+|[^\w\s]+").expect("static regex"))
}

impl Tokenizer for WordTokenizer {
    fn tokenize<'a>(&self, text: &'a str) -> Vec<Token<'a>> {
        token_regex()
            .find_iter(text)
            .map(|m| Token {
                text: m.as_str(),
                start: m.start(),
                end: m.end(),
            })
            .collect()
    }

    fn count(&self, text: &str) -> usize {
        token_regex().find_iter(text).count()
    }
}

/// Cut `text` after at most `budget` tokens. Returns the kept prefix and
/// whether anything was dropped.
pub fn truncate_tokens<'a>(tokenizer: &dyn Tokenizer, text: &'a str, budget: usize) -> (&'a str, bool) {
    let tokens = tokenizer.tokenize(text);
    if tokens.len() <= budget {
        return (text, false);
    }
    if budget == 0 {
        return ("", true);
    }
    (&text[..tokens[budget - 1].end], true)
}
