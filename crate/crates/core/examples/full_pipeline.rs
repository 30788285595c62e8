//! Every stage on the bundled fixture, then the 3×3 tables.
//!
//! cargo run --release --example full_pipeline [workspace]

use std::path::{Path, PathBuf};

use ragforge::config::PipelineConfig;
use ragforge::pipeline::{load_report, Pipeline};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let fixture = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/synthetic");
    let mut cfg = PipelineConfig::load(&fixture.join("pipeline.json"))?;
    cfg.workspace = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("ragforge-full-pipeline"));
    let pipeline = Pipeline::new(cfg)?;
    for (stage, status) in pipeline.run_all()? {
        println!("{stage:<12} {status:?}");
    }
    let report = load_report(pipeline.workspace().root())?;
    print!("\n{}", report.render());
    Ok(())
}
