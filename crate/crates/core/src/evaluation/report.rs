//! The 3×3 metric report and its text rendering.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::metrics::query_consistency;
use super::{ChunkCatalog, EvalError, JudgmentSet, RelevanceJudgment};
use crate::chunking::{ChunkStats, ChunkingStrategy};
use crate::embedding::EmbeddingStrategy;
use crate::index::NeighborStats;
use crate::retrieval::{Cell, RetrievalResult};
use crate::vector::percentile;

pub const REPORT_FORMAT: &str = "ragforge-report/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    HitRate,
    MetadataConsistency,
    Precision,
    Mrr,
    Ndcg,
}

impl Metric {
    pub const ALL: [Metric; 5] = [
        Self::HitRate,
        Self::MetadataConsistency,
        Self::Precision,
        Self::Mrr,
        Self::Ndcg,
    ];

    pub fn title(self) -> &'static str {
        match self {
            Self::HitRate => "Hit Rate",
            Self::MetadataConsistency => "Metadata Consistency",
            Self::Precision => "Precision",
            Self::Mrr => "MRR",
            Self::Ndcg => "NDCG",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EvalOptions {
    /// Use the `relevant` flag as a 0/1 gain instead of the normalized score.
    pub binary_ndcg: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencySummary {
    pub mean_micros: f64,
    pub p50_micros: f64,
    pub p95_micros: f64,
    pub max_micros: f64,
    pub mean_embed_micros: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellMetrics {
    pub chunking: ChunkingStrategy,
    pub embedding: EmbeddingStrategy,
    pub k: usize,
    pub hit_rate: f64,
    pub metadata_consistency: f64,
    pub precision: f64,
    pub mrr: f64,
    pub ndcg: f64,
}

impl CellMetrics {
    pub fn get(&self, m: Metric) -> f64 {
        match m {
            Metric::HitRate => self.hit_rate,
            Metric::MetadataConsistency => self.metadata_consistency,
            Metric::Precision => self.precision,
            Metric::Mrr => self.mrr,
            Metric::Ndcg => self.ndcg,
        }
    }

    pub fn cell(&self) -> Cell {
        Cell::new(self.chunking, self.embedding)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryMetrics {
    pub query_id: String,
    pub chunking: ChunkingStrategy,
    pub embedding: EmbeddingStrategy,
    pub k: usize,
    pub hit: f64,
    pub metadata_consistency: f64,
    pub precision: f64,
    pub reciprocal_rank: f64,
    pub ndcg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub format: String,
    pub ks: Vec<usize>,
    pub query_count: usize,
    pub binary_ndcg: bool,
    /// One entry per (k, cell), k-major then [`Cell::all`] order.
    pub cells: Vec<CellMetrics>,
    pub per_query: Vec<QueryMetrics>,
    /// Keyed by cell name.
    pub latency: BTreeMap<String, LatencySummary>,
    /// Keyed by chunking strategy.
    #[serde(default)]
    pub chunk_stats: BTreeMap<String, ChunkStats>,
    /// Keyed by cell name.
    #[serde(default)]
    pub nn_stats: BTreeMap<String, NeighborStats>,
}

fn latency_summary(results: &[&RetrievalResult]) -> LatencySummary {
    let lat: Vec<f64> = results.iter().map(|r| r.latency_micros as f64).collect();
    let emb: Vec<f64> = results.iter().map(|r| r.embed_latency_micros as f64).collect();
    let mean = |v: &[f64]| if v.is_empty() { 0.0 } else { v.iter().sum::<f64>() / v.len() as f64 };
    LatencySummary {
        mean_micros: mean(&lat),
        p50_micros: percentile(&lat, 50.0).unwrap_or(0.0),
        p95_micros: percentile(&lat, 95.0).unwrap_or(0.0),
        max_micros: percentile(&lat, 100.0).unwrap_or(0.0),
        mean_embed_micros: mean(&emb),
    }
}

/// Every metric for every cell at every `k`.
///
/// Fails when any of the nine cells has no results, or when the cells do
/// not cover the same query set.
pub fn evaluate_all(
    results: &[RetrievalResult],
    judgments: &[RelevanceJudgment],
    catalog: &ChunkCatalog,
    ks: &[usize],
    opts: &EvalOptions,
) -> Result<MetricReport, EvalError> {
    if ks.is_empty() || ks.contains(&0) {
        return Err(EvalError::InvalidOption("k values must be non-empty and at least 1".into()));
    }
    let mut by_cell: BTreeMap<Cell, Vec<&RetrievalResult>> = BTreeMap::new();
    for r in results {
        by_cell.entry(r.cell()).or_default().push(r);
    }
    let missing: Vec<String> = Cell::all()
        .into_iter()
        .filter(|c| !by_cell.contains_key(c))
        .map(|c| c.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(EvalError::MissingCells(missing));
    }
    let reference: BTreeSet<&str> = by_cell[&Cell::all()[0]].iter().map(|r| r.query_id.as_str()).collect();
    if reference.is_empty() {
        return Err(EvalError::NoQueries);
    }
    for (cell, rs) in &by_cell {
        let qs: BTreeSet<&str> = rs.iter().map(|r| r.query_id.as_str()).collect();
        if qs != reference || qs.len() != rs.len() {
            return Err(EvalError::InvalidOption(format!("{cell} does not cover the same queries as the other cells")));
        }
    }

    let j = JudgmentSet::new(judgments);
    let mut cells = Vec::new();
    let mut per_query = Vec::new();
    for &k in ks {
        for cell in Cell::all() {
            let rs = &by_cell[&cell];
            let mut rows = Vec::with_capacity(rs.len());
            for r in rs {
                rows.push(QueryMetrics {
                    query_id: r.query_id.clone(),
                    chunking: cell.chunking,
                    embedding: cell.embedding,
                    k,
                    hit: j.query_hit(r, k),
                    metadata_consistency: query_consistency(catalog, r, k)?,
                    precision: j.query_precision(r, k),
                    reciprocal_rank: j.query_reciprocal_rank(r, k),
                    ndcg: j.query_ndcg(r, k, opts.binary_ndcg),
                });
            }
            let n = rows.len() as f64;
            let mean = |f: fn(&QueryMetrics) -> f64| rows.iter().map(f).sum::<f64>() / n;
            cells.push(CellMetrics {
                chunking: cell.chunking,
                embedding: cell.embedding,
                k,
                hit_rate: mean(|q| q.hit),
                metadata_consistency: mean(|q| q.metadata_consistency),
                precision: mean(|q| q.precision),
                mrr: mean(|q| q.reciprocal_rank),
                ndcg: mean(|q| q.ndcg),
            });
            per_query.extend(rows);
        }
    }
    let latency = by_cell
        .iter()
        .map(|(c, rs)| (c.to_string(), latency_summary(rs)))
        .collect();
    Ok(MetricReport {
        format: REPORT_FORMAT.into(),
        ks: ks.to_vec(),
        query_count: reference.len(),
        binary_ndcg: opts.binary_ndcg,
        cells,
        per_query,
        latency,
        chunk_stats: BTreeMap::new(),
        nn_stats: BTreeMap::new(),
    })
}

impl MetricReport {
    pub fn value(&self, cell: Cell, metric: Metric, k: usize) -> Option<f64> {
        self.cells
            .iter()
            .find(|c| c.cell() == cell && c.k == k)
            .map(|c| c.get(metric))
    }

    /// Cells of `(metric, k)` that have a value; always 9 for a report built
    /// by [`evaluate_all`].
    pub fn table(&self, metric: Metric, k: usize) -> BTreeMap<Cell, f64> {
        self.cells
            .iter()
            .filter(|c| c.k == k)
            .map(|c| (c.cell(), c.get(metric)))
            .collect()
    }

    /// One table: retriever rows, chunking columns.
    pub fn render_table(&self, metric: Metric, k: usize) -> String {
        let table = self.table(metric, k);
        let mut out = String::new();
        let _ = writeln!(out, "{} (@{k})", metric.title());
        let _ = write!(out, "{:<15}", "Retriever");
        for c in ChunkingStrategy::ALL {
            let _ = write!(out, " | {:>9}", c.title());
        }
        out.push('\n');
        let _ = writeln!(out, "{}", "-".repeat(15 + 12 * ChunkingStrategy::ALL.len()));
        for e in EmbeddingStrategy::ALL {
            let _ = write!(out, "{:<15}", e.title());
            for c in ChunkingStrategy::ALL {
                match table.get(&Cell::new(c, e)) {
                    Some(v) => {
                        let _ = write!(out, " | {:>9.3}", v);
                    }
                    None => {
                        let _ = write!(out, " | {:>9}", "n/a");
                    }
                }
            }
            out.push('\n');
        }
        out
    }

    /// Every metric table at every k, then chunk and neighbour statistics.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for &k in &self.ks {
            for m in Metric::ALL {
                out.push_str(&self.render_table(m, k));
                out.push('\n');
            }
        }
        if !self.chunk_stats.is_empty() {
            let _ = writeln!(out, "Chunk statistics");
            let _ = writeln!(out, "{:<10} | {:>6} | {:>6} | {:>8} | {:>5} | {:>5}", "Chunking", "Docs", "Chunks", "Mean tok", "Min", "Max");
            for c in ChunkingStrategy::ALL {
                if let Some(s) = self.chunk_stats.get(c.as_str()) {
                    let _ = writeln!(
                        out,
                        "{:<10} | {:>6} | {:>6} | {:>8.1} | {:>5} | {:>5}",
                        c.title(),
                        s.document_count,
                        s.chunk_count,
                        s.mean_tokens,
                        s.min_tokens,
                        s.max_tokens
                    );
                }
            }
            out.push('\n');
        }
        if !self.nn_stats.is_empty() {
            let _ = writeln!(out, "Nearest-neighbour cosine distance (mean over chunks)");
            let _ = write!(out, "{:<15}", "Retriever");
            for c in ChunkingStrategy::ALL {
                let _ = write!(out, " | {:>9}", c.title());
            }
            out.push('\n');
            for e in EmbeddingStrategy::ALL {
                let _ = write!(out, "{:<15}", e.title());
                for c in ChunkingStrategy::ALL {
                    match self.nn_stats.get(&Cell::new(c, e).to_string()) {
                        Some(s) => {
                            let _ = write!(out, " | {:>9.4}", s.avg_nn_distance);
                        }
                        None => {
                            let _ = write!(out, " | {:>9}", "n/a");
                        }
                    }
                }
                out.push('\n');
            }
        }
        out
    }
}

const VOLATILE_KEYS: [&str; 5] = ["latency", "latency_micros", "embed_latency_micros", "generated_at", "elapsed_ms"];

fn strip(v: &mut Value) {
    match v {
        Value::Object(map) => {
            for k in VOLATILE_KEYS {
                map.remove(k);
            }
            map.values_mut().for_each(strip);
        }
        Value::Array(items) => items.iter_mut().for_each(strip),
        _ => {}
    }
}

/// Pretty JSON with timing fields removed, for byte comparison across runs.
pub fn canonical_json<T: Serialize>(value: &T) -> String {
    let mut v = serde_json::to_value(value).expect("report serializes");
    strip(&mut v);
    serde_json::to_string_pretty(&v).expect("value serializes")
}
