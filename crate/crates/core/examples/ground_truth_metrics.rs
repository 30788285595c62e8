//! Pool the nine configurations' results, judge them with the mock
//! reranker, and score one cell by hand.
//!
//! cargo run --example ground_truth_metrics

use std::path::Path;

use ragforge::config::PipelineConfig;
use ragforge::evaluation::{
    build_ground_truth, hit_rate_at_k, metadata_consistency_at_k, mrr_at_k, ndcg_at_k, precision_at_k, ChunkCatalog,
    GroundTruthOptions, JudgmentSet, MockReranker,
};
use ragforge::chunking::ChunkingStrategy;
use ragforge::metadata::EnrichedChunk;
use ragforge::pipeline::{read_jsonl, Pipeline, Stage};
use ragforge::retrieval::{load_queries, Cell, RetrievalResult};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fixture = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/synthetic");
    let mut cfg = PipelineConfig::load(&fixture.join("pipeline.json"))?;
    cfg.workspace = std::env::temp_dir().join("ragforge-ground-truth");
    let queries_path = cfg.queries.clone();
    let pipeline = Pipeline::new(cfg)?;
    for s in [Stage::Ingest, Stage::Chunk, Stage::Enrich, Stage::Embed, Stage::Index, Stage::Retrieve] {
        pipeline.run(s)?;
    }
    let ws = pipeline.workspace();
    let results: Vec<RetrievalResult> = read_jsonl(&ws.results())?;
    let mut catalog = ChunkCatalog::new();
    for s in ChunkingStrategy::ALL {
        let enriched: Vec<EnrichedChunk> = read_jsonl(&ws.enriched(s))?;
        catalog.extend_enriched(s, &enriched);
    }

    let queries = load_queries(&queries_path)?;
    let judgments = build_ground_truth(&queries, &results, &catalog, &MockReranker::default(), &GroundTruthOptions::default())?;
    let relevant = judgments.iter().filter(|j| j.relevant).count();
    let high = judgments.iter().filter(|j| j.highly_relevant).count();
    println!("{} judgments, {relevant} relevant, {high} highly relevant", judgments.len());

    let cell: Cell = "recursive/tfidf_weighted".parse()?;
    let mine: Vec<RetrievalResult> = results.into_iter().filter(|r| r.cell() == cell).collect();
    let set = JudgmentSet::new(&judgments);
    let k = 10;
    println!("\n{cell} @{k}");
    println!("  hit rate      {:.3}", hit_rate_at_k(&set, &mine, k)?);
    println!("  precision     {:.3}", precision_at_k(&set, &mine, k)?);
    println!("  mrr           {:.3}", mrr_at_k(&set, &mine, k)?);
    println!("  ndcg          {:.3}", ndcg_at_k(&set, &mine, k, false)?);
    println!("  consistency   {:.3}", metadata_consistency_at_k(&catalog, &mine, k)?);
    Ok(())
}
