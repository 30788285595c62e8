//! Chunk the bundled corpus with all three strategies and compare sizes.
//!
//! cargo run --example chunking_strategies

use std::path::Path;

use ragforge::chunking::{chunk_corpus, ChunkingConfig, ChunkingStrategy};
use ragforge::corpus::ingest_directory;
use ragforge::embedding::MockEmbedder;
use ragforge::tokenizer::WordTokenizer;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/synthetic/corpus/storage");
    let corpus = ingest_directory(&dir, "storage")?;
    let embedder = MockEmbedder::default();
    println!("{} documents", corpus.len());
    for s in ChunkingStrategy::ALL {
        let set = chunk_corpus(&corpus, &ChunkingConfig::for_strategy(s), &WordTokenizer, Some(&embedder))?;
        let st = &set.stats;
        println!(
            "{:<10} chunks={:<4} mean_tokens={:<8.1} max_tokens={}",
            s.title(),
            st.chunk_count,
            st.mean_tokens,
            st.max_tokens
        );
    }

    // a tighter recursive window makes the overlap visible
    let cfg = ChunkingConfig::recursive().with_max_tokens(64).with_overlap(16);
    let doc = &corpus.documents()[0];
    let set = chunk_corpus(&corpus, &cfg, &WordTokenizer, None)?;
    for c in set.chunks.iter().filter(|c| c.doc_id == doc.doc_id).take(3) {
        println!("\n{} {:?} ({} tokens)\n  {}", c.chunk_id, c.char_span, c.token_count, c.text.replace('\n', " "));
    }
    Ok(())
}
