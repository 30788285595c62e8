//! The three embedding strategies for one chunk, and the fusion arithmetic.
//!
//! cargo run --example embedding_fusion

use std::path::Path;

use ragforge::chunking::{chunk_corpus, ChunkingConfig};
use ragforge::corpus::ingest_directory;
use ragforge::embedding::{
    embed_chunks, fuse, EmbedOptions, EmbeddingStrategy, FusionWeights, MockEmbedder, TfidfModel,
};
use ragforge::metadata::{enrich_chunks, EnrichOptions, MockChatProvider};
use ragforge::tokenizer::WordTokenizer;
use ragforge::vector::{cosine, norm};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/synthetic/corpus/billing");
    let corpus = ingest_directory(&dir, "billing")?;
    let chunks = chunk_corpus(&corpus, &ChunkingConfig::naive(), &WordTokenizer, None)?.chunks;
    let enriched = enrich_chunks(&chunks, &MockChatProvider, &WordTokenizer, &EnrichOptions::default())?.enriched;

    let dim = 256;
    let embedder = MockEmbedder::new(dim, 42);
    let model = TfidfModel::fit(&enriched, dim, 7)?;
    println!("tf-idf vocabulary: {} terms over {} chunks", model.vocabulary().len(), model.n_chunks());

    let weights = FusionWeights::default();
    let opts = EmbedOptions::default();
    let mut by_strategy = Vec::new();
    for s in EmbeddingStrategy::ALL {
        let v = embed_chunks(&enriched, s, &embedder, &WordTokenizer, Some(&model), weights, &opts)?;
        by_strategy.push((s, v));
    }
    let content = &by_strategy[0].1[0].values;
    for (s, vs) in &by_strategy {
        let v = &vs[0].values;
        println!("{:<14} norm={:.6} cos(content)={:.4}", s.title(), norm(v), cosine(v, content));
    }

    // orthogonal unit inputs: the fused norm before renormalizing is sqrt(0.7² + 0.3²)
    let mut a = vec![0.0; 4];
    let mut b = vec![0.0; 4];
    a[0] = 1.0;
    b[1] = 1.0;
    let f = fuse(&a, Some(&b), weights)?;
    println!("\northogonal fusion: pre_norm={:.12} sqrt(0.58)={:.12}", f.pre_norm, 0.58f64.sqrt());
    let only_content = fuse(&a, Some(&b), FusionWeights::new(1.0, 0.0)?)?;
    println!("weights (1, 0) reproduce content: {:?}", only_content.vector);
    Ok(())
}
