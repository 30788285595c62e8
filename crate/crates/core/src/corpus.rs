//! Canonical document store.
//!
//! A [`Corpus`] is built once from a directory of `.txt` / `.jsonl` files and
//! persisted as JSONL: a header line followed by one document per line.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{path}: invalid UTF-8 at byte offset {offset}")]
    InvalidUtf8 { path: PathBuf, offset: usize },
    #[error("{path}:{line}: {message}")]
    Record { path: PathBuf, line: usize, message: String },
    #[error("no documents found in {0}")]
    NoDocuments(PathBuf),
    #[error("duplicate doc_id {0}")]
    DuplicateId(String),
    #[error("document {0} has an empty body")]
    EmptyBody(String),
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub title: String,
    pub source_path: String,
    pub body: String,
    pub source_tag: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct CorpusHeader {
    corpus_id: String,
    format: String,
    count: usize,
}

const CORPUS_FORMAT: &str = "ragforge-corpus/1";

/// Ordered, duplicate-free collection of documents.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Corpus {
    pub corpus_id: String,
    documents: Vec<Document>,
}

impl Corpus {
    pub fn new(corpus_id: impl Into<String>) -> Self {
        Self {
            corpus_id: corpus_id.into(),
            documents: Vec::new(),
        }
    }

    pub fn push(&mut self, doc: Document) -> Result<(), CorpusError> {
        if doc.body.trim().is_empty() {
            return Err(CorpusError::EmptyBody(doc.doc_id));
        }
        if self.documents.iter().any(|d| d.doc_id == doc.doc_id) {
            return Err(CorpusError::DuplicateId(doc.doc_id));
        }
        self.documents.push(doc);
        Ok(())
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn get(&self, doc_id: &str) -> Option<&Document> {
        self.documents.iter().find(|d| d.doc_id == doc_id)
    }

    /// Merge another corpus, keeping insertion order.
    pub fn extend(&mut self, other: Corpus) -> Result<(), CorpusError> {
        for doc in other.documents {
            self.push(doc)?;
        }
        Ok(())
    }
}

fn decode(path: &Path, bytes: Vec<u8>) -> Result<String, CorpusError> {
    String::from_utf8(bytes).map_err(|e| CorpusError::InvalidUtf8 {
        path: path.to_path_buf(),
        offset: e.utf8_error().valid_up_to(),
    })
}

fn collect_files(dir: &Path, out: &mut Vec<PathBuf>) -> Result<(), CorpusError> {
    let entries = fs::read_dir(dir).map_err(|source| CorpusError::Read {
        path: dir.to_path_buf(),
        source,
    })?;
    for entry in entries {
        let entry = entry.map_err(|source| CorpusError::Read {
            path: dir.to_path_buf(),
            source,
        })?;
        let path = entry.path();
        if path.is_dir() {
            collect_files(&path, out)?;
        } else if matches!(path.extension().and_then(|e| e.to_str()), Some("txt" | "jsonl")) {
            out.push(path);
        }
    }
    Ok(())
}

#[derive(Deserialize)]
struct JsonlInput {
    title: String,
    body: String,
}

fn title_from_body(body: &str) -> String {
    body.lines()
        .map(str::trim)
        .find(|l| !l.is_empty())
        .unwrap_or_default()
        .to_string()
}

/// Ingest every `.txt` and `.jsonl` file under `root`, in sorted path order.
///
/// `doc_id` is `source_tag/relative/path`, with `:<line>` appended for JSONL
/// records. Blank JSONL lines are skipped but still advance the line index.
pub fn ingest_directory(root: &Path, source_tag: &str) -> Result<Corpus, CorpusError> {
    let mut files = Vec::new();
    collect_files(root, &mut files)?;
    files.sort();

    let mut corpus = Corpus::new(source_tag);
    for path in files {
        let rel = path
            .strip_prefix(root)
            .unwrap_or(&path)
            .to_string_lossy()
            .replace('\\', "/");
        let bytes = fs::read(&path).map_err(|source| CorpusError::Read {
            path: path.clone(),
            source,
        })?;
        let text = decode(&path, bytes)?;
        let base_id = format!("{source_tag}/{rel}");

        if path.extension().and_then(|e| e.to_str()) == Some("jsonl") {
            for (idx, line) in text.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let rec: JsonlInput = serde_json::from_str(line).map_err(|e| CorpusError::Record {
                    path: path.clone(),
                    line: idx + 1,
                    message: e.to_string(),
                })?;
                corpus.push(Document {
                    doc_id: format!("{base_id}:{idx}"),
                    title: rec.title,
                    source_path: rel.clone(),
                    body: rec.body,
                    source_tag: source_tag.to_string(),
                })?;
            }
        } else {
            if text.trim().is_empty() {
                continue;
            }
            corpus.push(Document {
                doc_id: base_id,
                title: title_from_body(&text),
                source_path: rel,
                body: text,
                source_tag: source_tag.to_string(),
            })?;
        }
    }

    if corpus.is_empty() {
        return Err(CorpusError::NoDocuments(root.to_path_buf()));
    }
    Ok(corpus)
}

pub fn save_corpus(corpus: &Corpus, path: &Path) -> Result<(), CorpusError> {
    let werr = |source| CorpusError::Write {
        path: path.to_path_buf(),
        source,
    };
    let file = fs::File::create(path).map_err(werr)?;
    let mut w = BufWriter::new(file);
    let header = CorpusHeader {
        corpus_id: corpus.corpus_id.clone(),
        format: CORPUS_FORMAT.to_string(),
        count: corpus.len(),
    };
    writeln!(w, "{}", serde_json::to_string(&header).expect("header serializes")).map_err(werr)?;
    for doc in corpus.documents() {
        writeln!(w, "{}", serde_json::to_string(doc).expect("document serializes")).map_err(werr)?;
    }
    w.flush().map_err(werr)
}

pub fn load_corpus(path: &Path) -> Result<Corpus, CorpusError> {
    let file = fs::File::open(path).map_err(|source| CorpusError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let record_err = |line: usize, message: String| CorpusError::Record {
        path: path.to_path_buf(),
        line,
        message,
    };

    let mut lines = BufReader::new(file).lines();
    let header_line = lines
        .next()
        .ok_or_else(|| record_err(1, "missing header line".into()))?
        .map_err(|e| record_err(1, e.to_string()))?;
    let header: CorpusHeader = serde_json::from_str(&header_line).map_err(|e| record_err(1, e.to_string()))?;
    if header.format != CORPUS_FORMAT {
        return Err(record_err(1, format!("unsupported format {}", header.format)));
    }

    let mut corpus = Corpus::new(header.corpus_id);
    for (i, line) in lines.enumerate() {
        let lineno = i + 2;
        let line = line.map_err(|e| record_err(lineno, e.to_string()))?;
        if line.is_empty() {
            continue;
        }
        let doc: Document = serde_json::from_str(&line).map_err(|e| record_err(lineno, e.to_string()))?;
        corpus.push(doc).map_err(|e| record_err(lineno, e.to_string()))?;
    }
    if corpus.len() != header.count {
        return Err(record_err(
            corpus.len() + 2,
            format!("header declares {} documents, found {}", header.count, corpus.len()),
        ));
    }
    Ok(corpus)
}
