//! Hierarchical delimiter splitting with token overlap between chunks.
//!
//! A range that exceeds the budget is split on the current delimiter of
//! [`RECURSIVE_DELIMITERS`]; adjacent sibling pieces are merged back while
//! they fit, and oversized pieces descend to the next delimiter, ending in
//! hard token windows below the last level. Every chunk after the first is
//! prefixed with the trailing `overlap_tokens` tokens of its predecessor; a
//! segment that no longer fits once prefixed is re-split with the budget
//! reduced by the overlap.

use std::ops::Range;

use super::{record_from_range, ChunkRecord, ChunkingConfig, ChunkingError};
use crate::corpus::Document;
use crate::tokenizer::{Token, Tokenizer};

pub const RECURSIVE_DELIMITERS: [&str; 4] = ["\n\n", "\n", ". ", " "];

/// True when the boundary before token `j` is a split point at `level`.
fn is_boundary(body: &str, tokens: &[Token<'_>], j: usize, level: usize) -> bool {
    let prev = &tokens[j - 1];
    let gap = &body[prev.end..tokens[j].start];
    match RECURSIVE_DELIMITERS[level] {
        " " => !gap.is_empty(),
        ". " => prev.text.ends_with('.') && !gap.is_empty(),
        delim => gap.contains(delim),
    }
}

/// A token range plus the delimiter level it was formed at, so it can be
/// re-split later starting from the same level.
#[derive(Debug, Clone)]
struct Segment {
    range: Range<usize>,
    level: usize,
}

fn segment(body: &str, tokens: &[Token<'_>], range: Range<usize>, level: usize, budget: usize, out: &mut Vec<Segment>) {
    if range.len() <= budget {
        out.push(Segment { range, level });
        return;
    }
    if level == RECURSIVE_DELIMITERS.len() {
        // character-level fallback: hard token windows
        let mut s = range.start;
        while s < range.end {
            let e = (s + budget).min(range.end);
            out.push(Segment { range: s..e, level });
            s = e;
        }
        return;
    }

    let mut pieces = Vec::new();
    let mut start = range.start;
    for j in range.start + 1..range.end {
        if is_boundary(body, tokens, j, level) {
            pieces.push(start..j);
            start = j;
        }
    }
    pieces.push(start..range.end);

    let mut acc: Option<Range<usize>> = None;
    for piece in pieces {
        if piece.len() > budget {
            if let Some(a) = acc.take() {
                out.push(Segment { range: a, level });
            }
            segment(body, tokens, piece, level + 1, budget, out);
        } else {
            acc = match acc {
                Some(a) if piece.end - a.start <= budget => Some(a.start..piece.end),
                Some(a) => {
                    out.push(Segment { range: a, level });
                    Some(piece)
                }
                None => Some(piece),
            };
        }
    }
    if let Some(a) = acc {
        out.push(Segment { range: a, level });
    }
}

/// Token ranges of the recursive chunks of `body`, before conversion to records.
pub(crate) fn recursive_ranges(body: &str, tokens: &[Token<'_>], max: usize, overlap: usize) -> Vec<Range<usize>> {
    if tokens.is_empty() {
        return Vec::new();
    }
    let mut segments = Vec::new();
    segment(body, tokens, 0..tokens.len(), 0, max, &mut segments);

    let mut chunks: Vec<Range<usize>> = Vec::new();
    let push_with_overlap = |chunks: &mut Vec<Range<usize>>, end: usize| {
        let prev = chunks.last().expect("first chunk pushed separately");
        let ov = overlap.min(prev.len());
        chunks.push(prev.end - ov..end);
    };
    for seg in segments {
        let Some(prev) = chunks.last() else {
            chunks.push(seg.range);
            continue;
        };
        if overlap.min(prev.len()) + seg.range.len() <= max {
            push_with_overlap(&mut chunks, seg.range.end);
            continue;
        }
        let mut subs = Vec::new();
        segment(body, tokens, seg.range, seg.level, max - overlap, &mut subs);
        for sub in subs {
            push_with_overlap(&mut chunks, sub.range.end);
        }
    }
    chunks
}

pub fn chunk_recursive(
    doc: &Document,
    cfg: &ChunkingConfig,
    tokenizer: &dyn Tokenizer,
) -> Result<Vec<ChunkRecord>, ChunkingError> {
    if cfg.max_tokens == 0 || cfg.overlap_tokens >= cfg.max_tokens {
        return Err(ChunkingError::InvalidConfig(format!(
            "recursive chunking needs 0 <= overlap ({}) < max_tokens ({})",
            cfg.overlap_tokens, cfg.max_tokens
        )));
    }
    let tokens = tokenizer.tokenize(&doc.body);
    Ok(recursive_ranges(&doc.body, &tokens, cfg.max_tokens, cfg.overlap_tokens)
        .into_iter()
        .enumerate()
        .map(|(i, r)| record_from_range(doc, &tokens, r, cfg.strategy, i))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tokenizer::WordTokenizer;

    fn doc(body: String) -> Document {
        Document {
            doc_id: "d".into(),
            title: "d".into(),
            source_path: "d".into(),
            body,
            source_tag: "t".into(),
        }
    }

    /// Paragraph of `sentences` sentences, each `words` word tokens plus a period.
    fn paragraph(tag: &str, sentences: usize, words: usize) -> String {
        (0..sentences)
            .map(|s| {
                let w: Vec<String> = (0..words).map(|i| format!("{tag}{s}x{i}")).collect();
                format!("{}.", w.join(" "))
            })
            .collect::<Vec<_>>()
            .join(" ")
    }

    fn token_index(d: &Document, byte: usize) -> usize {
        WordTokenizer.tokenize(&d.body).iter().position(|t| t.start == byte).unwrap()
    }

    /// Independent check of the recursive invariants: size bound, contiguous
    /// coverage of the token stream, and token-exact overlap.
    fn check_invariants(d: &Document, chunks: &[ChunkRecord], max: usize, overlap: usize) {
        let all: Vec<&str> = WordTokenizer.tokenize(&d.body).iter().map(|t| t.text).collect();
        let mut covered = 0;
        let mut prev: Option<Vec<&str>> = None;
        for c in chunks {
            let toks: Vec<&str> = WordTokenizer.tokenize(&c.text).iter().map(|t| t.text).collect();
            assert_eq!(toks.len(), c.token_count);
            assert!(c.token_count <= max, "chunk of {} tokens", c.token_count);
            let start = token_index(d, c.char_span.0);
            assert_eq!(&all[start..start + toks.len()], &toks[..]);
            if let Some(p) = prev {
                let ov = overlap.min(p.len());
                assert_eq!(&toks[..ov], &p[p.len() - ov..]);
                assert_eq!(start, covered - ov);
            } else {
                assert_eq!(start, 0);
            }
            covered = start + toks.len();
            prev = Some(toks);
        }
        assert_eq!(covered, all.len());
    }

    #[test]
    fn small_doc_fits_one_chunk() {
        let body = (0..4).map(|p| paragraph(&format!("p{p}"), 4, 24)).collect::<Vec<_>>().join("\n\n");
        let d = doc(body);
        assert_eq!(WordTokenizer.count(&d.body), 400);
        let chunks = chunk_recursive(&d, &ChunkingConfig::recursive(), &WordTokenizer).unwrap();
        assert_eq!(chunks.len(), 1);
        assert_eq!(chunks[0].text, d.body);
    }

    #[test]
    fn two_long_paragraphs_split_at_sentence_level() {
        let p1 = paragraph("a", 10, 39);
        let p2 = paragraph("b", 10, 39);
        let d = doc(format!("{p1}\n\n{p2}"));
        assert_eq!(WordTokenizer.count(&p1), 400);
        let chunks = chunk_recursive(&d, &ChunkingConfig::recursive(), &WordTokenizer).unwrap();
        assert_eq!(chunks[0].text, p1);
        // second chunk opens with the tail of paragraph 1
        let p1_tail: Vec<&str> = WordTokenizer.tokenize(&p1)[400 - 128..].iter().map(|t| t.text).collect();
        let c1: Vec<&str> = WordTokenizer.tokenize(&chunks[1].text).iter().map(|t| t.text).collect();
        assert_eq!(&c1[..128], &p1_tail[..]);
        check_invariants(&d, &chunks, 512, 128);
    }

    #[test]
    fn single_sentence_uses_word_windows() {
        let d = doc((0..1000).map(|i| format!("w{i}")).collect::<Vec<_>>().join(" "));
        let chunks = chunk_recursive(&d, &ChunkingConfig::recursive(), &WordTokenizer).unwrap();
        let stride = 512 - 128;
        assert_eq!(chunks.len(), (1000usize - 512).div_ceil(stride) + 1);
        let ranges: Vec<(usize, usize)> = chunks
            .iter()
            .map(|c| {
                let s = token_index(&d, c.char_span.0);
                (s, s + c.token_count)
            })
            .collect();
        assert_eq!(ranges, [(0, 512), (384, 896), (768, 1000)]);
    }

    #[test]
    fn unbroken_token_run_falls_back_to_hard_split() {
        // "a.a.a.…" has no whitespace at all
        let d = doc("a.".repeat(700));
        let chunks = chunk_recursive(&d, &ChunkingConfig::recursive(), &WordTokenizer).unwrap();
        check_invariants(&d, &chunks, 512, 128);
    }

    #[test]
    fn rejects_overlap_not_below_max() {
        let cfg = ChunkingConfig::recursive().with_overlap(512);
        assert!(chunk_recursive(&doc("x".into()), &cfg, &WordTokenizer).is_err());
    }

    proptest::proptest! {
        #[test]
        fn invariants_hold(body in "[a-z]{1,5}([ .\n]{1,3}[a-z]{1,5}){0,300}", max in 2usize..60, ov_frac in 0.0f64..0.9) {
            let overlap = ((max as f64) * ov_frac) as usize;
            let overlap = overlap.min(max - 1);
            let d = doc(body);
            let cfg = ChunkingConfig::recursive().with_max_tokens(max).with_overlap(overlap);
            let chunks = chunk_recursive(&d, &cfg, &WordTokenizer).unwrap();
            check_invariants(&d, &chunks, max, overlap);
        }
    }
}
