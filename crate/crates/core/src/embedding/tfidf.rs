//! TF-IDF over metadata text, projected into the embedding space.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::EmbeddingError;
use crate::metadata::EnrichedChunk;
use crate::tokenizer::{Tokenizer, WordTokenizer};
use crate::vector::normalize;

pub const DEFAULT_PROJECTION_SEED: u64 = 7;

/// Lowercased word tokens; punctuation runs are not terms.
pub fn terms(text: &str) -> impl Iterator<Item = String> + '_ {
    WordTokenizer
        .tokenize(text)
        .into_iter()
        .filter(|t| t.is_word())
        .map(|t| t.text.to_lowercase())
}

/// `ln((1 + n) / (1 + df)) + 1`
pub fn smoothed_idf(n: usize, df: usize) -> f64 {
    ((1 + n) as f64 / (1 + df) as f64).ln() + 1.0
}

/// Seeded sparse sign projection from `input_dim` to `dimension`.
///
/// Column `i` has `max(1, dimension / 32)` non-zero entries at distinct
/// positions, each `±1/√dimension`, drawn from a generator seeded by
/// `(seed, i)`. Columns depend only on their own index, so vocabularies of
/// any size project consistently.
#[derive(Debug, Clone)]
pub struct SparseProjection {
    dimension: usize,
    seed: u64,
    columns: Vec<Vec<(u32, f64)>>,
}

impl SparseProjection {
    pub fn new(input_dim: usize, dimension: usize, seed: u64) -> Self {
        let nnz = (dimension / 32).max(1).min(dimension);
        let value = 1.0 / (dimension as f64).sqrt();
        let columns = (0..input_dim)
            .map(|i| {
                let mut h = Sha256::new();
                h.update(seed.to_le_bytes());
                h.update((i as u64).to_le_bytes());
                let mut rng = ChaCha8Rng::from_seed(h.finalize().into());
                let mut positions: Vec<usize> = sample(&mut rng, dimension, nnz).into_vec();
                positions.sort_unstable();
                positions
                    .into_iter()
                    .map(|p| (p as u32, if rng.random::<bool>() { value } else { -value }))
                    .collect()
            })
            .collect();
        Self {
            dimension,
            seed,
            columns,
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn input_dim(&self) -> usize {
        self.columns.len()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn column(&self, i: usize) -> &[(u32, f64)] {
        &self.columns[i]
    }

    /// Project a sparse vector given as `(index, value)` pairs. Not normalized.
    pub fn project_sparse(&self, entries: &[(usize, f64)]) -> Vec<f64> {
        let mut out = vec![0.0; self.dimension];
        for &(i, x) in entries {
            for &(p, s) in &self.columns[i] {
                out[p as usize] += x * s;
            }
        }
        out
    }

    /// Project a dense `input_dim` vector. Not normalized.
    pub fn project_dense(&self, v: &[f64]) -> Vec<f64> {
        let entries: Vec<(usize, f64)> = v.iter().copied().enumerate().filter(|(_, x)| *x != 0.0).collect();
        self.project_sparse(&entries)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Persisted {
    format: String,
    n_chunks: usize,
    dimension: usize,
    projection_seed: u64,
    terms: Vec<String>,
    document_frequency: Vec<usize>,
}

const FORMAT: &str = "ragforge-tfidf/1";

/// Vocabulary, document frequencies and projection fitted on metadata text.
#[derive(Debug, Clone)]
pub struct TfidfModel {
    terms: Vec<String>,
    index: HashMap<String, usize>,
    document_frequency: Vec<usize>,
    n_chunks: usize,
    projection: SparseProjection,
}

impl TfidfModel {
    /// Fit on `texts`, one per chunk. The vocabulary is sorted lexicographically.
    pub fn fit_texts<S: AsRef<str>>(texts: &[S], dimension: usize, seed: u64) -> Result<Self, EmbeddingError> {
        if texts.is_empty() {
            return Err(EmbeddingError::Tfidf("no chunks to fit on".into()));
        }
        let mut df: BTreeMap<String, usize> = BTreeMap::new();
        for t in texts {
            let unique: BTreeSet<String> = terms(t.as_ref()).collect();
            for term in unique {
                *df.entry(term).or_insert(0) += 1;
            }
        }
        if df.is_empty() {
            return Err(EmbeddingError::Tfidf("empty metadata vocabulary".into()));
        }
        let (terms, document_frequency): (Vec<String>, Vec<usize>) = df.into_iter().unzip();
        Ok(Self::assemble(terms, document_frequency, texts.len(), dimension, seed))
    }

    /// Fit on the metadata text of enriched chunks.
    pub fn fit(enriched: &[EnrichedChunk], dimension: usize, seed: u64) -> Result<Self, EmbeddingError> {
        let texts: Vec<String> = enriched.iter().map(|e| e.metadata.tfidf_text()).collect();
        Self::fit_texts(&texts, dimension, seed)
    }

    fn assemble(terms: Vec<String>, document_frequency: Vec<usize>, n_chunks: usize, dimension: usize, seed: u64) -> Self {
        let index = terms.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        let projection = SparseProjection::new(terms.len(), dimension, seed);
        Self {
            terms,
            index,
            document_frequency,
            n_chunks,
            projection,
        }
    }

    pub fn vocabulary(&self) -> &[String] {
        &self.terms
    }

    pub fn document_frequency(&self) -> &[usize] {
        &self.document_frequency
    }

    pub fn n_chunks(&self) -> usize {
        self.n_chunks
    }

    pub fn dimension(&self) -> usize {
        self.projection.dimension()
    }

    pub fn projection(&self) -> &SparseProjection {
        &self.projection
    }

    pub fn idf(&self, term: &str) -> Option<f64> {
        self.index
            .get(term)
            .map(|&i| smoothed_idf(self.n_chunks, self.document_frequency[i]))
    }

    /// Raw count × idf over in-vocabulary terms, L2-normalized in vocabulary
    /// space, sorted by term index. Empty when every term is out of vocabulary.
    pub fn sparse_vector(&self, text: &str) -> Vec<(usize, f64)> {
        let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
        for t in terms(text) {
            if let Some(&i) = self.index.get(&t) {
                *counts.entry(i).or_insert(0) += 1;
            }
        }
        let mut v: Vec<(usize, f64)> = counts
            .into_iter()
            .map(|(i, n)| (i, n as f64 * smoothed_idf(self.n_chunks, self.document_frequency[i])))
            .collect();
        let n = v.iter().map(|(_, x)| x * x).sum::<f64>().sqrt();
        if n > 0.0 {
            v.iter_mut().for_each(|(_, x)| *x /= n);
        }
        v
    }

    /// Projected, normalized TF-IDF vector, or `None` for all-OOV text.
    pub fn tfidf_vector(&self, text: &str) -> Option<Vec<f64>> {
        let sparse = self.sparse_vector(text);
        if sparse.is_empty() {
            return None;
        }
        let mut v = self.projection.project_sparse(&sparse);
        // cancellation to exactly zero is possible in principle
        if normalize(&mut v) == 0.0 {
            return None;
        }
        Some(v)
    }

    pub fn save(&self, path: &Path) -> Result<(), EmbeddingError> {
        let p = Persisted {
            format: FORMAT.into(),
            n_chunks: self.n_chunks,
            dimension: self.dimension(),
            projection_seed: self.projection.seed(),
            terms: self.terms.clone(),
            document_frequency: self.document_frequency.clone(),
        };
        let json = serde_json::to_string_pretty(&p).expect("model serializes");
        fs::write(path, json).map_err(|e| EmbeddingError::Io(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self, EmbeddingError> {
        let raw = fs::read_to_string(path).map_err(|e| EmbeddingError::Io(format!("{}: {e}", path.display())))?;
        let p: Persisted =
            serde_json::from_str(&raw).map_err(|e| EmbeddingError::Io(format!("{}: {e}", path.display())))?;
        if p.format != FORMAT {
            return Err(EmbeddingError::Io(format!("{}: unsupported format {:?}", path.display(), p.format)));
        }
        if p.terms.len() != p.document_frequency.len() {
            return Err(EmbeddingError::Io(format!("{}: vocabulary and df lengths differ", path.display())));
        }
        Ok(Self::assemble(p.terms, p.document_frequency, p.n_chunks, p.dimension, p.projection_seed))
    }
}
