//! Per-query and aggregate ranking metrics.
//!
//! Unjudged hits count as non-relevant with zero gain. Every aggregate is
//! the plain mean over the queries in the result list.

use std::collections::HashMap;

use super::{ChunkCatalog, ChunkKey, EvalError, RelevanceJudgment};
use crate::retrieval::RetrievalResult;

#[derive(Debug, Clone, Copy)]
struct Label {
    candidate: usize,
    gain: f64,
    relevant: bool,
    highly: bool,
}

/// Judgments indexed for metric lookups.
#[derive(Debug, Clone, Default)]
pub struct JudgmentSet {
    labels: HashMap<(String, ChunkKey), Label>,
    /// Distinct-candidate (gain, relevant) pairs per query, gain descending.
    ideal: HashMap<String, Vec<(f64, bool)>>,
}

impl JudgmentSet {
    pub fn new(judgments: &[RelevanceJudgment]) -> Self {
        let mut labels = HashMap::new();
        let mut candidates: HashMap<String, HashMap<usize, (f64, bool)>> = HashMap::new();
        for j in judgments {
            labels.insert(
                (j.query_id.clone(), j.key()),
                Label {
                    candidate: j.candidate,
                    gain: j.normalized_score,
                    relevant: j.relevant,
                    highly: j.highly_relevant,
                },
            );
            candidates
                .entry(j.query_id.clone())
                .or_default()
                .insert(j.candidate, (j.normalized_score, j.relevant));
        }
        let ideal = candidates
            .into_iter()
            .map(|(q, c)| {
                let mut v: Vec<(f64, bool)> = c.into_values().collect();
                v.sort_by(|a, b| b.0.total_cmp(&a.0));
                (q, v)
            })
            .collect();
        Self { labels, ideal }
    }

    fn labels_at_k(&self, r: &RetrievalResult, k: usize) -> Vec<Option<Label>> {
        r.hits
            .iter()
            .take(k)
            .map(|h| {
                self.labels
                    .get(&(r.query_id.clone(), ChunkKey::new(r.chunking, h.chunk_id.clone())))
                    .copied()
            })
            .collect()
    }

    pub fn query_hit(&self, r: &RetrievalResult, k: usize) -> f64 {
        let hit = self.labels_at_k(r, k).into_iter().flatten().any(|l| l.highly);
        if hit {
            1.0
        } else {
            0.0
        }
    }

    pub fn query_precision(&self, r: &RetrievalResult, k: usize) -> f64 {
        let n = self.labels_at_k(r, k).into_iter().flatten().filter(|l| l.relevant).count();
        n as f64 / k as f64
    }

    pub fn query_reciprocal_rank(&self, r: &RetrievalResult, k: usize) -> f64 {
        self.labels_at_k(r, k)
            .into_iter()
            .position(|l| l.is_some_and(|l| l.relevant))
            .map_or(0.0, |i| 1.0 / (i + 1) as f64)
    }

    /// Graded gains are normalized scores; binary gains are the `relevant` flag.
    /// A pooled candidate earns its gain once: a later hit with the same text
    /// scores zero, which keeps the ratio within [0, 1].
    pub fn query_ndcg(&self, r: &RetrievalResult, k: usize, binary: bool) -> f64 {
        let gain = |g: f64, rel: bool| if binary { f64::from(u8::from(rel)) } else { g };
        let mut credited = std::collections::HashSet::new();
        let gains: Vec<f64> = self
            .labels_at_k(r, k)
            .into_iter()
            .map(|l| match l {
                Some(l) if credited.insert(l.candidate) => gain(l.gain, l.relevant),
                _ => 0.0,
            })
            .collect();
        let mut ideal: Vec<f64> = self
            .ideal
            .get(&r.query_id)
            .map(|v| v.iter().map(|&(g, rel)| gain(g, rel)).collect())
            .unwrap_or_default();
        ideal.sort_by(|a, b| b.total_cmp(a));
        ideal.truncate(k);
        let idcg = dcg(&ideal);
        if idcg == 0.0 {
            0.0
        } else {
            dcg(&gains) / idcg
        }
    }
}

/// `Σ gain_i / log2(i + 1)` over 1-based positions.
pub fn dcg(gains: &[f64]) -> f64 {
    gains
        .iter()
        .enumerate()
        .map(|(i, g)| g / ((i + 2) as f64).log2())
        .sum()
}

/// Modal-category count over list length; 0.0 for an empty list.
pub fn metadata_consistency(categories: &[&str]) -> f64 {
    if categories.is_empty() {
        return 0.0;
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for c in categories {
        *counts.entry(c).or_insert(0) += 1;
    }
    let modal = counts.values().copied().max().unwrap_or(0);
    modal as f64 / categories.len() as f64
}

fn mean_over(results: &[RetrievalResult], f: impl Fn(&RetrievalResult) -> Result<f64, EvalError>) -> Result<f64, EvalError> {
    if results.is_empty() {
        return Err(EvalError::NoQueries);
    }
    let mut sum = 0.0;
    for r in results {
        sum += f(r)?;
    }
    Ok(sum / results.len() as f64)
}

fn check_k(k: usize) -> Result<(), EvalError> {
    if k == 0 {
        Err(EvalError::InvalidOption("k must be at least 1".into()))
    } else {
        Ok(())
    }
}

/// Fraction of queries with a highly relevant chunk in the top `k`.
pub fn hit_rate_at_k(j: &JudgmentSet, results: &[RetrievalResult], k: usize) -> Result<f64, EvalError> {
    check_k(k)?;
    mean_over(results, |r| Ok(j.query_hit(r, k)))
}

/// Relevant hits in the top `k` over `k`, averaged. Missing slots count as
/// non-relevant.
pub fn precision_at_k(j: &JudgmentSet, results: &[RetrievalResult], k: usize) -> Result<f64, EvalError> {
    check_k(k)?;
    mean_over(results, |r| Ok(j.query_precision(r, k)))
}

pub fn mrr_at_k(j: &JudgmentSet, results: &[RetrievalResult], k: usize) -> Result<f64, EvalError> {
    check_k(k)?;
    mean_over(results, |r| Ok(j.query_reciprocal_rank(r, k)))
}

/// The ideal ranking is the query's distinct pooled candidates by gain.
pub fn ndcg_at_k(j: &JudgmentSet, results: &[RetrievalResult], k: usize, binary: bool) -> Result<f64, EvalError> {
    check_k(k)?;
    mean_over(results, |r| Ok(j.query_ndcg(r, k, binary)))
}

pub fn query_consistency(catalog: &ChunkCatalog, r: &RetrievalResult, k: usize) -> Result<f64, EvalError> {
    let cats = r
        .hits
        .iter()
        .take(k)
        .map(|h| {
            let key = ChunkKey::new(r.chunking, h.chunk_id.clone());
            catalog.category(&key).ok_or(EvalError::UnknownChunk(key))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(metadata_consistency(&cats))
}

pub fn metadata_consistency_at_k(catalog: &ChunkCatalog, results: &[RetrievalResult], k: usize) -> Result<f64, EvalError> {
    check_k(k)?;
    mean_over(results, |r| query_consistency(catalog, r, k))
}
