//! Build an exact cosine index over random unit vectors, search it, and
//! round-trip it through the on-disk format.
//!
//! cargo run --example exact_search

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use ragforge::chunking::ChunkingStrategy;
use ragforge::embedding::{EmbeddingStrategy, EmbeddingVector};
use ragforge::index::VectorIndex;
use ragforge::vector::normalized;

fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
    normalized(v)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let dim = 128;
    let vectors: Vec<EmbeddingVector> = (0..2000)
        .map(|i| EmbeddingVector {
            id: format!("chunk-{i:04}"),
            strategy: EmbeddingStrategy::Content,
            values: random_unit(&mut rng, dim),
        })
        .collect();
    let index = VectorIndex::build(ChunkingStrategy::Naive, EmbeddingStrategy::Content, &vectors)?;

    let query = vectors[17].values.clone();
    for hit in index.search(&query, 5)? {
        println!("{:<12} {:.4}", hit.chunk_id, hit.score);
    }

    let stats = index.nn_stats()?;
    println!(
        "\nnearest-neighbor distance: mean={:.4} min={:.4} median={:.4} max={:.4}",
        stats.avg_nn_distance, stats.min, stats.median, stats.max
    );

    let path = std::env::temp_dir().join("ragforge-exact-search.idx");
    index.save(&path)?;
    let loaded = VectorIndex::load(&path)?;
    println!("reloaded {} vectors of dimension {}", loaded.len(), loaded.dimension());
    assert_eq!(loaded.search(&query, 5)?, index.search(&query, 5)?);
    std::fs::remove_file(&path)?;
    Ok(())
}
