mod common;

use proptest::prelude::*;
use ragforge::chunking::ChunkingStrategy;
use ragforge::evaluation::{
    build_ground_truth, hit_rate_at_k, metadata_consistency_at_k, mrr_at_k, ndcg_at_k, precision_at_k, ChunkCatalog,
    ChunkKey, GroundTruthOptions, JudgmentSet,
};
use ragforge::providers::{ProviderError, RerankProvider};
use ragforge::retrieval::{Cell, QueryRecord, RankedHit, RetrievalResult};

fn catalog_for(fx: &common::MetricFixture) -> ChunkCatalog {
    let mut c = ChunkCatalog::new();
    for (id, cat) in &fx.chunks {
        c.insert(ChunkKey::new(ChunkingStrategy::Naive, id.clone()), id.clone(), cat.clone());
    }
    c
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn metrics_in_unit_range_monotone_and_match_oracle(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let fx = common::random_metric_fixture(&mut rng);
        let set = JudgmentSet::new(&fx.judgments);
        let catalog = catalog_for(&fx);
        let (j, r) = (&fx.judgments, &fx.results);
        let mut prev_hit = 0.0;
        for k in 1..=12 {
            let hit = hit_rate_at_k(&set, r, k).unwrap();
            let prec = precision_at_k(&set, r, k).unwrap();
            let mrr = mrr_at_k(&set, r, k).unwrap();
            let ndcg = ndcg_at_k(&set, r, k, false).unwrap();
            let cons = metadata_consistency_at_k(&catalog, r, k).unwrap();
            for v in [hit, prec, mrr, ndcg, cons] {
                prop_assert!((0.0..=1.0).contains(&v), "value {v} at k={k}");
            }
            prop_assert!(hit >= prev_hit);
            prev_hit = hit;
            // precision counts relevant hits, which can only grow with k
            let count = |k: usize| precision_at_k(&set, r, k).unwrap() * k as f64;
            prop_assert!(count(k + 1) + 1e-12 >= count(k));
            prop_assert!((hit - common::oracle_hit_rate(j, r, k)).abs() <= 1e-12);
            prop_assert!((prec - common::oracle_precision(j, r, k)).abs() <= 1e-12);
            prop_assert!((mrr - common::oracle_mrr(j, r, k)).abs() <= 1e-12);
            prop_assert!((ndcg - common::oracle_ndcg(j, r, k, false)).abs() <= 1e-12);
            prop_assert!((cons - common::oracle_consistency(r, k, |_, id| fx.category(id))).abs() <= 1e-12);
        }
    }

    #[test]
    fn judgment_pools_span_zero_to_one(scores in prop::collection::vec(-10.0f64..10.0, 2..30), n_queries in 1usize..4) {
        struct Table(Vec<f64>);
        impl RerankProvider for Table {
            fn name(&self) -> &str { "table" }
            fn score(&self, _q: &str, docs: &[&str]) -> Result<Vec<f64>, ProviderError> {
                Ok(docs.iter().map(|d| self.0[d.trim_start_matches("text ").parse::<usize>().unwrap()]).collect())
            }
        }
        let mut catalog = ChunkCatalog::new();
        for s in ChunkingStrategy::ALL {
            for i in 0..scores.len() {
                catalog.insert(ChunkKey::new(s, format!("{s}{i}")), format!("text {i}"), "c");
            }
        }
        let queries: Vec<QueryRecord> = (0..n_queries).map(|q| QueryRecord::new(format!("q{q}"), "anything")).collect();
        let mut results = Vec::new();
        for q in &queries {
            for cell in Cell::all() {
                results.push(RetrievalResult {
                    query_id: q.query_id.clone(),
                    chunking: cell.chunking,
                    embedding: cell.embedding,
                    k: scores.len(),
                    hits: (0..scores.len()).map(|i| RankedHit { chunk_id: format!("{}{i}", cell.chunking), score: 0.0, rank: i + 1 }).collect(),
                    latency_micros: 0,
                    embed_latency_micros: 0,
                });
            }
        }
        let opts = GroundTruthOptions { pool_size: scores.len(), ..GroundTruthOptions::default() };
        let js = build_ground_truth(&queries, &results, &catalog, &Table(scores.clone()), &opts).unwrap();
        prop_assert_eq!(js.len(), n_queries * 3 * scores.len());
        let lo = scores.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for q in &queries {
            let norms: Vec<f64> = js.iter().filter(|j| j.query_id == q.query_id).map(|j| j.normalized_score).collect();
            let nmin = norms.iter().copied().fold(f64::INFINITY, f64::min);
            let nmax = norms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if hi > lo {
                prop_assert_eq!((nmin, nmax), (0.0, 1.0));
            } else {
                prop_assert!(norms.iter().all(|&n| n == 1.0));
            }
        }
    }
}
