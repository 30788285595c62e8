//! Enrich chunks with the offline mock provider and show the prefix that
//! prefix fusion embeds.
//!
//! cargo run --example metadata_enrichment

use std::path::Path;

use ragforge::chunking::{chunk_corpus, ChunkingConfig};
use ragforge::corpus::ingest_directory;
use ragforge::embedding::render_prefix;
use ragforge::metadata::{enrich_chunks, EnrichOptions, MockChatProvider};
use ragforge::tokenizer::WordTokenizer;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/synthetic/corpus/security");
    let corpus = ingest_directory(&dir, "security")?;
    let chunks = chunk_corpus(&corpus, &ChunkingConfig::naive(), &WordTokenizer, None)?.chunks;

    let opts = EnrichOptions {
        batch_size: 4,
        ..EnrichOptions::default()
    };
    let out = enrich_chunks(&chunks, &MockChatProvider, &WordTokenizer, &opts)?;
    println!(
        "enriched {} chunks in {} batches ({} retries, {} fallbacks)",
        out.report.total,
        out.report.batches.len(),
        out.report.retries,
        out.report.failures.len()
    );

    let first = &out.enriched[0];
    println!("\n{}", serde_json::to_string_pretty(&first.metadata)?);
    println!("\nprefix:\n{}", render_prefix(&first.metadata));
    println!("tf-idf text: {}", first.metadata.tfidf_text());
    Ok(())
}
