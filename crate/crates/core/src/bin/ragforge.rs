use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ragforge::pipeline::{load_report, write_jsonl, Pipeline, Stage};
use ragforge::retrieval::Cell;

#[derive(Parser)]
#[command(name = "ragforge", version, about = "Metadata-enriched retrieval pipeline and evaluation harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one stage, or `all`.
    Run {
        /// ingest, chunk, enrich, embed, index, retrieve, groundtruth, evaluate or all
        stage: String,
        #[arg(long)]
        config: PathBuf,
        /// Re-run even when the stage is up to date.
        #[arg(long)]
        force: bool,
    },
    /// Print the 3×3 metric tables of a finished workspace.
    Report {
        workspace: PathBuf,
        /// Print report.json instead of tables.
        #[arg(long)]
        json: bool,
    },
    /// Ad-hoc retrieval against an indexed workspace.
    Retrieve {
        /// A cell such as `naive/tfidf_weighted`, or `all`.
        #[arg(long)]
        config: String,
        #[arg(long, default_value_t = 10)]
        k: usize,
        #[arg(long)]
        queries: PathBuf,
        /// Pipeline config naming the workspace and providers.
        #[arg(long)]
        pipeline: PathBuf,
        /// Write results here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), Box<dyn std::error::Error>> {
    match cli.command {
        Command::Run { stage, config, force } => {
            let pipeline = Pipeline::from_path(&config)?.force(force);
            let stages: Vec<Stage> = if stage == "all" {
                Stage::ALL.to_vec()
            } else {
                vec![stage.parse()?]
            };
            for s in stages {
                pipeline.run(s)?;
            }
        }
        Command::Report { workspace, json } => {
            let report = load_report(&workspace)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&report)?);
            } else {
                print!("{}", report.render());
            }
        }
        Command::Retrieve {
            config,
            k,
            queries,
            pipeline,
            out,
        } => {
            let cells = if config == "all" {
                Cell::all()
            } else {
                vec![config.parse::<Cell>()?]
            };
            let pipeline = Pipeline::from_path(&pipeline)?;
            let results = pipeline.retrieve_cells(&queries, &cells, k)?;
            match out {
                Some(path) => write_jsonl(&path, &results)?,
                None => {
                    for r in &results {
                        println!("{}", serde_json::to_string(r)?);
                    }
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
