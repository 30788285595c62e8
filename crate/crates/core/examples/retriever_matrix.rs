//! Run the nine retriever configurations over an indexed copy of the
//! bundled fixture and show the top hits of each for one query.
//!
//! cargo run --example retriever_matrix

use std::path::Path;

use ragforge::config::PipelineConfig;
use ragforge::pipeline::{Pipeline, Stage};
use ragforge::retrieval::{detect_intent, Cell};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fixture = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/synthetic");
    let mut cfg = PipelineConfig::load(&fixture.join("pipeline.json"))?;
    cfg.workspace = std::env::temp_dir().join("ragforge-retriever-matrix");
    let pipeline = Pipeline::new(cfg)?;
    for s in [Stage::Ingest, Stage::Chunk, Stage::Enrich, Stage::Embed, Stage::Index] {
        pipeline.run(s)?;
    }

    let query = "How to configure lifecycle expiration rules";
    let queries = std::env::temp_dir().join("ragforge-one-query.jsonl");
    std::fs::write(&queries, format!("{{\"query_id\":\"demo\",\"text\":\"{query}\"}}\n"))?;
    println!("query: {query} (intent: {})\n", detect_intent(query));

    for r in pipeline.retrieve_cells(&queries, &Cell::all(), 3)? {
        let top: Vec<String> = r.hits.iter().map(|h| format!("{} ({:.3})", h.chunk_id, h.score)).collect();
        println!("{:<28} {}", r.cell().to_string(), top.join(", "));
    }
    Ok(())
}
