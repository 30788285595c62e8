//! Exact cosine-similarity search over unit vectors.
//!
//! Vectors are stored as `f32` rows; dot products accumulate in `f64`.
//! Rankings are by descending score, ties by ascending chunk id.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chunking::ChunkingStrategy;
use crate::embedding::{EmbeddingStrategy, EmbeddingVector};
use crate::vector::{norm, percentile};

pub const INDEX_FORMAT: &str = "ragforge-index";
pub const INDEX_VERSION: u32 = 1;

const UNIT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("cannot build an empty index")]
    Empty,
    #[error("duplicate chunk id {0:?}")]
    DuplicateId(String),
    #[error("{id}: dimension {got}, index dimension {expected}")]
    DimensionMismatch { id: String, expected: usize, got: usize },
    #[error("{id}: vector norm {norm} is not 1")]
    NotUnit { id: String, norm: f64 },
    #[error("k must be at least 1")]
    ZeroK,
    #[error("nearest-neighbour statistics need at least 2 vectors, index has {0}")]
    TooSmall(usize),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("{path}: unsupported index version {found} (expected {INDEX_VERSION})")]
    Version { path: String, found: u32 },
    #[error("{path}: truncated at byte {offset}: {message}")]
    Truncated { path: String, offset: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub chunk_id: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborStats {
    pub count: usize,
    pub avg_nn_distance: f64,
    pub min: f64,
    pub p25: f64,
    pub median: f64,
    pub p75: f64,
    pub max: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    dimension: usize,
    count: usize,
    chunking: ChunkingStrategy,
    embedding: EmbeddingStrategy,
}

#[derive(Debug, Clone)]
pub struct VectorIndex {
    dimension: usize,
    chunking: ChunkingStrategy,
    embedding: EmbeddingStrategy,
    ids: Vec<String>,
    rows: Vec<f32>,
    positions: HashMap<String, usize>,
}

/// Descending score, then ascending id.
pub fn rank_order(a: (&str, f64), b: (&str, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0))
}

impl VectorIndex {
    /// Build from unit vectors, preserving insertion order.
    pub fn build(
        chunking: ChunkingStrategy,
        embedding: EmbeddingStrategy,
        vectors: &[EmbeddingVector],
    ) -> Result<Self, IndexError> {
        let first = vectors.first().ok_or(IndexError::Empty)?;
        let dimension = first.values.len();
        let mut ids = Vec::with_capacity(vectors.len());
        let mut rows = Vec::with_capacity(vectors.len() * dimension);
        let mut positions = HashMap::with_capacity(vectors.len());
        for v in vectors {
            if v.values.len() != dimension {
                return Err(IndexError::DimensionMismatch {
                    id: v.id.clone(),
                    expected: dimension,
                    got: v.values.len(),
                });
            }
            let n = norm(&v.values);
            if (n - 1.0).abs() > UNIT_TOLERANCE {
                return Err(IndexError::NotUnit { id: v.id.clone(), norm: n });
            }
            if positions.insert(v.id.clone(), ids.len()).is_some() {
                return Err(IndexError::DuplicateId(v.id.clone()));
            }
            ids.push(v.id.clone());
            rows.extend(v.values.iter().map(|&x| x as f32));
        }
        Ok(Self {
            dimension,
            chunking,
            embedding,
            ids,
            rows,
            positions,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn chunking(&self) -> ChunkingStrategy {
        self.chunking
    }

    pub fn embedding(&self) -> EmbeddingStrategy {
        self.embedding
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn position(&self, chunk_id: &str) -> Option<usize> {
        self.positions.get(chunk_id).copied()
    }

    /// Stored (`f32`) row `i`.
    pub fn row(&self, i: usize) -> &[f32] {
        &self.rows[i * self.dimension..(i + 1) * self.dimension]
    }

    fn score_row(&self, i: usize, query: &[f64]) -> f64 {
        let s: f64 = self.row(i).iter().zip(query).map(|(&x, &q)| x as f64 * q).sum();
        s.clamp(-1.0, 1.0)
    }

    /// Top `k` entries by cosine similarity. `k` larger than the index
    /// returns every entry.
    pub fn search(&self, query: &[f64], k: usize) -> Result<Vec<Hit>, IndexError> {
        if k == 0 {
            return Err(IndexError::ZeroK);
        }
        if query.len() != self.dimension {
            return Err(IndexError::DimensionMismatch {
                id: "query".into(),
                expected: self.dimension,
                got: query.len(),
            });
        }
        let mut scored: Vec<(usize, f64)> = (0..self.len()).map(|i| (i, self.score_row(i, query))).collect();
        let cmp = |a: &(usize, f64), b: &(usize, f64)| rank_order((&self.ids[a.0], a.1), (&self.ids[b.0], b.1));
        if k < scored.len() {
            scored.select_nth_unstable_by(k - 1, cmp);
            scored.truncate(k);
        }
        scored.sort_unstable_by(cmp);
        Ok(scored
            .into_iter()
            .map(|(i, score)| Hit {
                chunk_id: self.ids[i].clone(),
                score,
            })
            .collect())
    }

    /// Per-vector cosine distance to the nearest other vector, summarized.
    pub fn nn_stats(&self) -> Result<NeighborStats, IndexError> {
        let n = self.len();
        if n < 2 {
            return Err(IndexError::TooSmall(n));
        }
        let rows: Vec<Vec<f64>> = (0..n).map(|i| self.row(i).iter().map(|&x| x as f64).collect()).collect();
        let workers = std::thread::available_parallelism().map_or(1, |p| p.get()).min(n);
        let mut dists = vec![0.0; n];
        std::thread::scope(|s| {
            for (w, out) in dists.chunks_mut(n.div_ceil(workers)).enumerate() {
                let rows = &rows;
                let base = w * n.div_ceil(workers);
                s.spawn(move || {
                    for (off, d) in out.iter_mut().enumerate() {
                        let i = base + off;
                        let best = (0..n)
                            .filter(|&j| j != i)
                            .map(|j| crate::vector::dot(&rows[i], &rows[j]))
                            .fold(f64::NEG_INFINITY, f64::max);
                        *d = (1.0 - best).clamp(0.0, 2.0);
                    }
                });
            }
        });
        let q = |p: f64| percentile(&dists, p).expect("non-empty");
        Ok(NeighborStats {
            count: n,
            avg_nn_distance: dists.iter().sum::<f64>() / n as f64,
            min: q(0.0),
            p25: q(25.0),
            median: q(50.0),
            p75: q(75.0),
            max: q(100.0),
        })
    }

    /// Header JSON line, little-endian `f32` rows, then the id table
    /// (`u32` byte length + UTF-8 per id).
    pub fn save(&self, path: &Path) -> Result<(), IndexError> {
        let io = |e: std::io::Error| IndexError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        };
        let header = Header {
            format: INDEX_FORMAT.into(),
            version: INDEX_VERSION,
            dimension: self.dimension,
            count: self.len(),
            chunking: self.chunking,
            embedding: self.embedding,
        };
        let mut buf = serde_json::to_vec(&header).expect("header serializes");
        buf.push(b'\n');
        buf.reserve(self.rows.len() * 4);
        for x in &self.rows {
            buf.extend_from_slice(&x.to_le_bytes());
        }
        for id in &self.ids {
            buf.extend_from_slice(&(id.len() as u32).to_le_bytes());
            buf.extend_from_slice(id.as_bytes());
        }
        let mut f = fs::File::create(path).map_err(io)?;
        f.write_all(&buf).map_err(io)?;
        f.flush().map_err(io)
    }

    pub fn load(path: &Path) -> Result<Self, IndexError> {
        let p = path.display().to_string();
        let bytes = fs::read(path).map_err(|e| IndexError::Io {
            path: p.clone(),
            message: e.to_string(),
        })?;
        let truncated = |offset: usize, message: &str| IndexError::Truncated {
            path: p.clone(),
            offset,
            message: message.into(),
        };
        let nl = bytes
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| truncated(bytes.len(), "no header line"))?;
        let header: Header = serde_json::from_slice(&bytes[..nl]).map_err(|e| IndexError::Io {
            path: p.clone(),
            message: format!("bad header: {e}"),
        })?;
        if header.format != INDEX_FORMAT {
            return Err(IndexError::Io {
                path: p.clone(),
                message: format!("not an index file (format {:?})", header.format),
            });
        }
        if header.version != INDEX_VERSION {
            return Err(IndexError::Version {
                path: p.clone(),
                found: header.version,
            });
        }
        let mut off = nl + 1;
        let row_bytes = header.count * header.dimension * 4;
        if bytes.len() < off + row_bytes {
            return Err(truncated(bytes.len(), "vector rows incomplete"));
        }
        let rows: Vec<f32> = bytes[off..off + row_bytes]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        off += row_bytes;
        let mut ids = Vec::with_capacity(header.count);
        let mut positions = HashMap::with_capacity(header.count);
        for _ in 0..header.count {
            let len_bytes = bytes.get(off..off + 4).ok_or_else(|| truncated(bytes.len(), "id length missing"))?;
            let len = u32::from_le_bytes(len_bytes.try_into().expect("4 bytes")) as usize;
            off += 4;
            let raw = bytes.get(off..off + len).ok_or_else(|| truncated(bytes.len(), "id bytes missing"))?;
            let id = String::from_utf8(raw.to_vec()).map_err(|e| IndexError::Io {
                path: p.clone(),
                message: format!("id at byte {off} is not UTF-8: {e}"),
            })?;
            off += len;
            if positions.insert(id.clone(), ids.len()).is_some() {
                return Err(IndexError::DuplicateId(id));
            }
            ids.push(id);
        }
        if off != bytes.len() {
            return Err(IndexError::Io {
                path: p,
                message: format!("{} trailing bytes after id table", bytes.len() - off),
            });
        }
        Ok(Self {
            dimension: header.dimension,
            chunking: header.chunking,
            embedding: header.embedding,
            ids,
            rows,
            positions,
        })
    }
}
