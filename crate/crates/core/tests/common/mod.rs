//! Oracles and fixtures shared by the integration tests. The oracles are
//! deliberately naive: linear scans, full sorts, no shared code with the
//! library beyond its data types.

#![allow(dead_code)]

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use ragforge::chunking::ChunkingStrategy;
use ragforge::config::PipelineConfig;
use ragforge::embedding::{EmbeddingStrategy, EmbeddingVector};
use ragforge::evaluation::RelevanceJudgment;
use ragforge::index::VectorIndex;
use ragforge::retrieval::{RankedHit, RetrievalResult};

pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/synthetic")
}

/// The bundled pipeline config, writing into `workspace`.
pub fn fixture_config(workspace: &Path) -> PipelineConfig {
    let mut cfg = PipelineConfig::load(&fixture_dir().join("pipeline.json")).expect("fixture config loads");
    cfg.workspace = workspace.to_path_buf();
    cfg
}

pub fn random_unit(rng: &mut impl Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-9 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `n` random unit vectors, a few of them exact duplicates so ties occur.
pub fn random_vectors(rng: &mut impl Rng, n: usize, dim: usize) -> Vec<EmbeddingVector> {
    let mut out: Vec<EmbeddingVector> = Vec::with_capacity(n);
    for i in 0..n {
        let values = if i > 0 && rng.random_bool(0.05) {
            out[rng.random_range(0..i)].values.clone()
        } else {
            random_unit(rng, dim)
        };
        out.push(EmbeddingVector {
            id: format!("v{:05}", rng.random_range(0..1_000_000u32) * 10 + (i as u32 % 10)),
            strategy: EmbeddingStrategy::Content,
            values,
        });
    }
    out.sort_by(|a, b| a.id.cmp(&b.id));
    out.dedup_by(|a, b| a.id == b.id);
    out
}

/// Score every row, sort everything, take the first `k`.
pub fn brute_force_search(index: &VectorIndex, query: &[f64], k: usize) -> Vec<(String, f64)> {
    let mut all: Vec<(String, f64)> = Vec::new();
    for (i, id) in index.ids().iter().enumerate() {
        let mut s = 0.0f64;
        for (x, q) in index.row(i).iter().zip(query) {
            s += f64::from(*x) * q;
        }
        all.push((id.clone(), s.clamp(-1.0, 1.0)));
    }
    all.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    all.truncate(k);
    all
}

fn label<'a>(judgments: &'a [RelevanceJudgment], r: &RetrievalResult, chunk_id: &str) -> Option<&'a RelevanceJudgment> {
    judgments
        .iter()
        .find(|j| j.query_id == r.query_id && j.chunking == r.chunking && j.chunk_id == chunk_id)
}

fn top_k(r: &RetrievalResult, k: usize) -> &[RankedHit] {
    &r.hits[..k.min(r.hits.len())]
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn oracle_hit_rate(j: &[RelevanceJudgment], rs: &[RetrievalResult], k: usize) -> f64 {
    let per: Vec<f64> = rs
        .iter()
        .map(|r| {
            let mut found = false;
            for h in top_k(r, k) {
                if let Some(l) = label(j, r, &h.chunk_id) {
                    if l.highly_relevant {
                        found = true;
                    }
                }
            }
            if found {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    mean(&per)
}

pub fn oracle_precision(j: &[RelevanceJudgment], rs: &[RetrievalResult], k: usize) -> f64 {
    let per: Vec<f64> = rs
        .iter()
        .map(|r| {
            let mut n = 0;
            for h in top_k(r, k) {
                if label(j, r, &h.chunk_id).is_some_and(|l| l.relevant) {
                    n += 1;
                }
            }
            n as f64 / k as f64
        })
        .collect();
    mean(&per)
}

pub fn oracle_mrr(j: &[RelevanceJudgment], rs: &[RetrievalResult], k: usize) -> f64 {
    let per: Vec<f64> = rs
        .iter()
        .map(|r| {
            for (i, h) in top_k(r, k).iter().enumerate() {
                if label(j, r, &h.chunk_id).is_some_and(|l| l.relevant) {
                    return 1.0 / (i as f64 + 1.0);
                }
            }
            0.0
        })
        .collect();
    mean(&per)
}

pub fn oracle_ndcg(j: &[RelevanceJudgment], rs: &[RetrievalResult], k: usize, binary: bool) -> f64 {
    let gain = |l: &RelevanceJudgment| {
        if binary {
            if l.relevant {
                1.0
            } else {
                0.0
            }
        } else {
            l.normalized_score
        }
    };
    let per: Vec<f64> = rs
        .iter()
        .map(|r| {
            // a candidate already credited earlier in the list earns nothing
            let mut dcg = 0.0;
            let mut credited: Vec<usize> = Vec::new();
            for (i, h) in top_k(r, k).iter().enumerate() {
                let g = match label(j, r, &h.chunk_id) {
                    Some(l) if !credited.contains(&l.candidate) => {
                        credited.push(l.candidate);
                        gain(l)
                    }
                    _ => 0.0,
                };
                dcg += g / ((i + 2) as f64).log2();
            }
            // one gain per distinct pooled candidate of this query
            let mut seen: Vec<usize> = Vec::new();
            let mut ideal: Vec<f64> = Vec::new();
            for l in j.iter().filter(|l| l.query_id == r.query_id) {
                if !seen.contains(&l.candidate) {
                    seen.push(l.candidate);
                    ideal.push(gain(l));
                }
            }
            ideal.sort_by(|a, b| b.partial_cmp(a).unwrap());
            let mut idcg = 0.0;
            for (i, g) in ideal.iter().take(k).enumerate() {
                idcg += g / ((i + 2) as f64).log2();
            }
            if idcg == 0.0 {
                0.0
            } else {
                dcg / idcg
            }
        })
        .collect();
    mean(&per)
}

/// `category_of(chunking, chunk_id)` supplies the primary category.
pub fn oracle_consistency(rs: &[RetrievalResult], k: usize, category_of: impl Fn(ChunkingStrategy, &str) -> String) -> f64 {
    let per: Vec<f64> = rs
        .iter()
        .map(|r| {
            let cats: Vec<String> = top_k(r, k).iter().map(|h| category_of(r.chunking, &h.chunk_id)).collect();
            if cats.is_empty() {
                return 0.0;
            }
            let mut best = 0;
            for c in &cats {
                best = best.max(cats.iter().filter(|x| *x == c).count());
            }
            best as f64 / cats.len() as f64
        })
        .collect();
    mean(&per)
}

/// A random judged retrieval fixture: up to 20 chunks, up to 8 queries.
pub struct MetricFixture {
    pub chunks: Vec<(String, String)>,
    pub judgments: Vec<RelevanceJudgment>,
    pub results: Vec<RetrievalResult>,
}

impl MetricFixture {
    pub fn category(&self, id: &str) -> String {
        self.chunks.iter().find(|(c, _)| c == id).expect("known chunk").1.clone()
    }
}

pub fn random_metric_fixture(rng: &mut impl Rng) -> MetricFixture {
    let n_chunks = rng.random_range(1..=20);
    let n_queries = rng.random_range(1..=8);
    let cats = ["A", "B", "C", "D"];
    let chunks: Vec<(String, String)> = (0..n_chunks)
        .map(|i| (format!("c{i:02}"), cats[rng.random_range(0..cats.len())].to_string()))
        .collect();
    let mut judgments = Vec::new();
    let mut results = Vec::new();
    for q in 0..n_queries {
        let qid = format!("q{q}");
        // random judged subset with graded scores, some candidates shared
        let mut cand = 0;
        for (id, _) in &chunks {
            if rng.random_bool(0.7) {
                let s: f64 = if rng.random_bool(0.2) { 1.0 } else { rng.random() };
                judgments.push(RelevanceJudgment {
                    query_id: qid.clone(),
                    chunking: ChunkingStrategy::Naive,
                    chunk_id: id.clone(),
                    candidate: if cand > 0 && rng.random_bool(0.1) { cand - 1 } else { cand },
                    raw_score: s * 10.0,
                    normalized_score: s,
                    relevant: s >= 0.8,
                    highly_relevant: s > 0.95,
                });
                cand += 1;
            }
        }
        // fix shared-candidate gains so a candidate has one score
        let start = judgments.len() - cand.min(judgments.len());
        for i in start + 1..judgments.len() {
            if judgments[i].candidate == judgments[i - 1].candidate {
                let prev = judgments[i - 1].clone();
                judgments[i].normalized_score = prev.normalized_score;
                judgments[i].raw_score = prev.raw_score;
                judgments[i].relevant = prev.relevant;
                judgments[i].highly_relevant = prev.highly_relevant;
            }
        }
        let mut ids: Vec<String> = chunks.iter().map(|c| c.0.clone()).collect();
        let len = rng.random_range(0..=ids.len());
        for i in (1..ids.len()).rev() {
            ids.swap(i, rng.random_range(0..=i));
        }
        ids.truncate(len);
        results.push(RetrievalResult {
            query_id: qid,
            chunking: ChunkingStrategy::Naive,
            embedding: EmbeddingStrategy::Content,
            k: 10,
            hits: ids
                .into_iter()
                .enumerate()
                .map(|(i, chunk_id)| RankedHit {
                    chunk_id,
                    score: 1.0 - i as f64 * 0.01,
                    rank: i + 1,
                })
                .collect(),
            latency_micros: 0,
            embed_latency_micros: 0,
        });
    }
    MetricFixture {
        chunks,
        judgments,
        results,
    }
}
