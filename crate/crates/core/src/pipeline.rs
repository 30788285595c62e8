//! Staged, resumable execution of the full pipeline.
//!
//! Each stage reads its predecessor's artifacts from the workspace and
//! writes its own. A stamp records a hash of the stage's inputs and
//! outputs; re-running a stage whose inputs and outputs are unchanged is a
//! no-op.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use log::info;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::chunking::{chunk_corpus, ChunkRecord, ChunkStats, ChunkingError, ChunkingStrategy};
use crate::config::{ConfigError, PipelineConfig};
use crate::corpus::{ingest_directory, load_corpus, save_corpus, Corpus, CorpusError};
use crate::embedding::{embed_chunks, EmbeddingError, EmbeddingStrategy, TfidfModel};
use crate::evaluation::{
    build_ground_truth, canonical_json, evaluate_all, load_judgments, ChunkCatalog, EvalError, Metric, MetricReport,
    RelevanceJudgment,
};
use crate::index::{IndexError, NeighborStats, VectorIndex};
use crate::metadata::{enrich_chunks, EnrichError, EnrichReport, EnrichedChunk};
use crate::retrieval::{load_queries, Cell, RetrievalError, RetrievalResult, Retriever};
use crate::tokenizer::WordTokenizer;

/// Every cell's index plus the TF-IDF model of each chunking.
pub type RetrievalState = (BTreeMap<Cell, VectorIndex>, BTreeMap<ChunkingStrategy, TfidfModel>);

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Chunking(#[from] ChunkingError),
    #[error(transparent)]
    Enrich(#[from] EnrichError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("{stage} artifacts missing ({path}); run `ragforge run {stage}` first")]
    MissingArtifacts { stage: Stage, path: String },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("report incomplete: {0}")]
    Incomplete(String),
}

fn io_err(path: &Path, e: impl fmt::Display) -> PipelineError {
    PipelineError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Ingest,
    Chunk,
    Enrich,
    Embed,
    Index,
    Retrieve,
    Groundtruth,
    Evaluate,
}

impl Stage {
    pub const ALL: [Stage; 8] = [
        Self::Ingest,
        Self::Chunk,
        Self::Enrich,
        Self::Embed,
        Self::Index,
        Self::Retrieve,
        Self::Groundtruth,
        Self::Evaluate,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Ingest => "ingest",
            Self::Chunk => "chunk",
            Self::Enrich => "enrich",
            Self::Embed => "embed",
            Self::Index => "index",
            Self::Retrieve => "retrieve",
            Self::Groundtruth => "groundtruth",
            Self::Evaluate => "evaluate",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Stage {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| format!("unknown stage {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StageStatus {
    Ran,
    UpToDate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct Stamp {
    input_hash: String,
    outputs: BTreeMap<String, String>,
}

/// Artifact layout under a workspace directory.
#[derive(Debug, Clone)]
pub struct Workspace {
    root: PathBuf,
}

fn cell_file(cell: Cell, ext: &str) -> String {
    format!("{}__{}.{ext}", cell.chunking, cell.embedding)
}

impl Workspace {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn corpus(&self) -> PathBuf {
        self.root.join("corpus.jsonl")
    }
    pub fn chunks(&self, s: ChunkingStrategy) -> PathBuf {
        self.root.join("chunks").join(format!("{s}.jsonl"))
    }
    pub fn chunk_stats(&self) -> PathBuf {
        self.root.join("chunk_stats.json")
    }
    pub fn enriched(&self, s: ChunkingStrategy) -> PathBuf {
        self.root.join("enriched").join(format!("{s}.jsonl"))
    }
    pub fn enrich_checkpoint(&self, s: ChunkingStrategy) -> PathBuf {
        self.root.join("enriched").join(format!("{s}.ckpt.jsonl"))
    }
    pub fn enrich_report(&self) -> PathBuf {
        self.root.join("enrich_report.json")
    }
    pub fn tfidf(&self, s: ChunkingStrategy) -> PathBuf {
        self.root.join("tfidf").join(format!("{s}.json"))
    }
    pub fn embeddings(&self, cell: Cell) -> PathBuf {
        self.root.join("embeddings").join(cell_file(cell, "vec"))
    }
    pub fn index(&self, cell: Cell) -> PathBuf {
        self.root.join("index").join(cell_file(cell, "idx"))
    }
    pub fn index_stats(&self) -> PathBuf {
        self.root.join("index_stats.json")
    }
    pub fn results(&self) -> PathBuf {
        self.root.join("results.jsonl")
    }
    pub fn judgments(&self) -> PathBuf {
        self.root.join("judgments.jsonl")
    }
    pub fn judgments_checkpoint(&self) -> PathBuf {
        self.root.join("judgments.ckpt.jsonl")
    }
    pub fn report_json(&self) -> PathBuf {
        self.root.join("report.json")
    }
    pub fn report_txt(&self) -> PathBuf {
        self.root.join("report.txt")
    }
    fn stamp(&self, stage: Stage) -> PathBuf {
        self.root.join("stamps").join(format!("{stage}.json"))
    }

    /// Files a stage writes.
    pub fn outputs(&self, stage: Stage) -> Vec<PathBuf> {
        match stage {
            Stage::Ingest => vec![self.corpus()],
            Stage::Chunk => ChunkingStrategy::ALL
                .into_iter()
                .map(|s| self.chunks(s))
                .chain([self.chunk_stats()])
                .collect(),
            Stage::Enrich => ChunkingStrategy::ALL
                .into_iter()
                .map(|s| self.enriched(s))
                .chain([self.enrich_report()])
                .collect(),
            Stage::Embed => ChunkingStrategy::ALL
                .into_iter()
                .map(|s| self.tfidf(s))
                .chain(Cell::all().into_iter().map(|c| self.embeddings(c)))
                .collect(),
            Stage::Index => Cell::all()
                .into_iter()
                .map(|c| self.index(c))
                .chain([self.index_stats()])
                .collect(),
            Stage::Retrieve => vec![self.results()],
            Stage::Groundtruth => vec![self.judgments()],
            Stage::Evaluate => vec![self.report_json(), self.report_txt()],
        }
    }

    /// Error naming `stage` when any of its outputs is absent.
    pub fn require(&self, stage: Stage) -> Result<(), PipelineError> {
        for p in self.outputs(stage) {
            if !p.exists() {
                return Err(PipelineError::MissingArtifacts {
                    stage,
                    path: p.display().to_string(),
                });
            }
        }
        Ok(())
    }
}

fn ensure_parent(path: &Path) -> Result<(), PipelineError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    Ok(())
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), PipelineError> {
    ensure_parent(path)?;
    let f = fs::File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(f);
    for item in items {
        serde_json::to_writer(&mut w, item).map_err(|e| io_err(path, e))?;
        w.write_all(b"\n").map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, PipelineError> {
    let f = fs::File::open(path).map_err(|e| io_err(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| io_err(path, format!("line {}: {e}", i + 1)))?);
    }
    Ok(out)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
    ensure_parent(path)?;
    let text = serde_json::to_string_pretty(value).expect("value serializes");
    fs::write(path, text + "\n").map_err(|e| io_err(path, e))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, PipelineError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| io_err(path, e))
}

fn hash_file(path: &Path) -> Result<String, PipelineError> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    Ok(hex(&Sha256::digest(&bytes)))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn hash_tree(root: &Path, h: &mut Sha256) -> Result<(), PipelineError> {
    let mut entries: Vec<PathBuf> = fs::read_dir(root)
        .map_err(|e| io_err(root, e))?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()
        .map_err(|e| io_err(root, e))?;
    entries.sort();
    for p in entries {
        if p.is_dir() {
            hash_tree(&p, h)?;
        } else {
            h.update(p.to_string_lossy().as_bytes());
            h.update(fs::read(&p).map_err(|e| io_err(&p, e))?);
        }
    }
    Ok(())
}

/// A configured pipeline bound to its workspace.
pub struct Pipeline {
    config: PipelineConfig,
    workspace: Workspace,
    force: bool,
}

impl Pipeline {
    /// Validates provider credentials before anything else runs.
    pub fn new(config: PipelineConfig) -> Result<Self, PipelineError> {
        config.check_credentials()?;
        let workspace = Workspace::new(config.workspace.clone());
        Ok(Self {
            config,
            workspace,
            force: false,
        })
    }

    pub fn from_path(path: &Path) -> Result<Self, PipelineError> {
        Self::new(PipelineConfig::load(path)?)
    }

    /// Re-run stages even when their stamps match.
    pub fn force(mut self, force: bool) -> Self {
        self.force = force;
        self
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn workspace(&self) -> &Workspace {
        &self.workspace
    }

    /// Run every stage in order.
    pub fn run_all(&self) -> Result<Vec<(Stage, StageStatus)>, PipelineError> {
        Stage::ALL.into_iter().map(|s| Ok((s, self.run(s)?))).collect()
    }

    fn input_hash(&self, stage: Stage) -> Result<String, PipelineError> {
        let ws = &self.workspace;
        let cfg = &self.config;
        let mut h = Sha256::new();
        h.update(stage.as_str());
        let mut add_json = |v: &dyn erased::Json| h.update(v.json());
        match stage {
            Stage::Ingest => add_json(&cfg.corpus.iter().map(|s| s.tag.clone()).collect::<Vec<_>>()),
            Stage::Chunk => {
                add_json(&cfg.chunking);
                add_json(&cfg.tokenizer);
                add_json(&cfg.providers.embedding);
                add_json(&cfg.embedding.dimension);
            }
            Stage::Enrich => {
                add_json(&cfg.providers.chat);
                add_json(&cfg.enrichment);
            }
            Stage::Embed => {
                add_json(&cfg.providers.embedding);
                add_json(&cfg.embedding);
            }
            Stage::Index => {}
            Stage::Retrieve => {
                add_json(&cfg.providers.embedding);
                add_json(&cfg.embedding);
                add_json(&cfg.retrieval_depth());
            }
            Stage::Groundtruth => {
                add_json(&cfg.providers.rerank);
                add_json(&(cfg.evaluation.pool_size, cfg.evaluation.tau, cfg.evaluation.high_percentile));
            }
            Stage::Evaluate => {
                add_json(&(&cfg.evaluation.ks, cfg.evaluation.binary_ndcg));
            }
        }
        match stage {
            Stage::Ingest => {
                for s in &cfg.corpus {
                    h.update(s.tag.as_bytes());
                    hash_tree(&s.dir, &mut h)?;
                }
            }
            Stage::Retrieve => {
                h.update(hash_file(&cfg.queries)?);
                for p in ws.outputs(Stage::Index).iter().chain(&ws.outputs(Stage::Embed)) {
                    h.update(hash_file(p)?);
                }
            }
            Stage::Evaluate => {
                // categories and stats come from these as well
                for p in ws
                    .outputs(Stage::Groundtruth)
                    .iter()
                    .chain(&ws.outputs(Stage::Retrieve))
                    .chain(&ws.outputs(Stage::Enrich))
                    .chain(&ws.outputs(Stage::Chunk))
                    .chain(&ws.outputs(Stage::Index))
                {
                    h.update(hash_file(p)?);
                }
            }
            Stage::Groundtruth => {
                h.update(hash_file(&cfg.queries)?);
                for p in ws.outputs(Stage::Retrieve).iter().chain(&ws.outputs(Stage::Enrich)) {
                    h.update(hash_file(p)?);
                }
            }
            _ => {
                let prev = Stage::ALL[Stage::ALL.iter().position(|s| *s == stage).expect("known stage") - 1];
                for p in ws.outputs(prev) {
                    h.update(hash_file(&p)?);
                }
            }
        }
        Ok(hex(&h.finalize()))
    }

    fn predecessors(stage: Stage) -> &'static [Stage] {
        match stage {
            Stage::Ingest => &[],
            Stage::Chunk => &[Stage::Ingest],
            Stage::Enrich => &[Stage::Chunk],
            Stage::Embed => &[Stage::Enrich],
            Stage::Index => &[Stage::Embed],
            Stage::Retrieve => &[Stage::Index, Stage::Embed],
            Stage::Groundtruth => &[Stage::Retrieve, Stage::Enrich],
            Stage::Evaluate => &[Stage::Groundtruth, Stage::Retrieve, Stage::Enrich, Stage::Chunk, Stage::Index],
        }
    }

    fn current_stamp(&self, stage: Stage, input_hash: &str) -> Result<Option<Stamp>, PipelineError> {
        let path = self.workspace.stamp(stage);
        if !path.exists() {
            return Ok(None);
        }
        let stamp: Stamp = read_json(&path)?;
        if stamp.input_hash != input_hash {
            return Ok(None);
        }
        for p in self.workspace.outputs(stage) {
            let key = p.display().to_string();
            if !p.exists() || stamp.outputs.get(&key) != Some(&hash_file(&p)?) {
                return Ok(None);
            }
        }
        Ok(Some(stamp))
    }

    /// Run one stage unless its stamp shows it is up to date.
    pub fn run(&self, stage: Stage) -> Result<StageStatus, PipelineError> {
        for &p in Self::predecessors(stage) {
            self.workspace.require(p)?;
        }
        let input_hash = self.input_hash(stage)?;
        if !self.force && self.current_stamp(stage, &input_hash)?.is_some() {
            info!("{stage}: up to date");
            return Ok(StageStatus::UpToDate);
        }
        info!("{stage}: running");
        match stage {
            Stage::Ingest => self.ingest()?,
            Stage::Chunk => self.chunk()?,
            Stage::Enrich => self.enrich()?,
            Stage::Embed => self.embed()?,
            Stage::Index => self.index()?,
            Stage::Retrieve => self.retrieve()?,
            Stage::Groundtruth => self.groundtruth()?,
            Stage::Evaluate => self.evaluate()?,
        }
        let mut outputs = BTreeMap::new();
        for p in self.workspace.outputs(stage) {
            outputs.insert(p.display().to_string(), hash_file(&p)?);
        }
        write_json(&self.workspace.stamp(stage), &Stamp { input_hash, outputs })?;
        info!("{stage}: done");
        Ok(StageStatus::Ran)
    }

    fn ingest(&self) -> Result<(), PipelineError> {
        let mut corpus = Corpus::new("corpus");
        for s in &self.config.corpus {
            corpus.extend(ingest_directory(&s.dir, &s.tag)?)?;
        }
        info!("ingest: {} documents", corpus.len());
        let path = self.workspace.corpus();
        ensure_parent(&path)?;
        save_corpus(&corpus, &path)?;
        Ok(())
    }

    fn chunk(&self) -> Result<(), PipelineError> {
        let corpus = load_corpus(&self.workspace.corpus())?;
        let embedder = self.config.embedding_provider()?;
        let mut stats = BTreeMap::new();
        for s in ChunkingStrategy::ALL {
            let set = chunk_corpus(&corpus, self.config.chunking.get(s), &WordTokenizer, Some(embedder.as_ref()))?;
            info!("chunk: {s}: {} chunks", set.chunks.len());
            write_jsonl(&self.workspace.chunks(s), &set.chunks)?;
            stats.insert(s.as_str().to_string(), set.stats);
        }
        write_json(&self.workspace.chunk_stats(), &stats)
    }

    fn enrich(&self) -> Result<(), PipelineError> {
        let chat = self.config.chat_provider()?;
        let mut reports: BTreeMap<String, EnrichReport> = BTreeMap::new();
        for s in ChunkingStrategy::ALL {
            let chunks: Vec<ChunkRecord> = read_jsonl(&self.workspace.chunks(s))?;
            let mut opts = self.config.enrich_options();
            let ckpt = self.workspace.enrich_checkpoint(s);
            ensure_parent(&ckpt)?;
            opts.checkpoint = Some(ckpt);
            let out = enrich_chunks(&chunks, chat.as_ref(), &WordTokenizer, &opts)?;
            info!(
                "enrich: {s}: {} chunks, {} retries, {} fallbacks",
                out.enriched.len(),
                out.report.retries,
                out.report.failures.len()
            );
            write_jsonl(&self.workspace.enriched(s), &out.enriched)?;
            reports.insert(s.as_str().to_string(), out.report);
        }
        write_json(&self.workspace.enrich_report(), &reports)
    }

    fn embed(&self) -> Result<(), PipelineError> {
        let provider = self.config.embedding_provider()?;
        let e = &self.config.embedding;
        for s in ChunkingStrategy::ALL {
            let enriched: Vec<EnrichedChunk> = read_jsonl(&self.workspace.enriched(s))?;
            let model = TfidfModel::fit(&enriched, e.dimension, e.projection_seed)?;
            let tf_path = self.workspace.tfidf(s);
            ensure_parent(&tf_path)?;
            model.save(&tf_path)?;
            for strategy in EmbeddingStrategy::ALL {
                let vectors = embed_chunks(
                    &enriched,
                    strategy,
                    provider.as_ref(),
                    &WordTokenizer,
                    Some(&model),
                    e.weights,
                    &self.config.embed_options(),
                )?;
                let cell = Cell::new(s, strategy);
                let store = VectorIndex::build(s, strategy, &vectors)?;
                let path = self.workspace.embeddings(cell);
                ensure_parent(&path)?;
                store.save(&path)?;
                info!("embed: {cell}: {} vectors", vectors.len());
            }
        }
        Ok(())
    }

    fn index(&self) -> Result<(), PipelineError> {
        let mut stats: BTreeMap<String, NeighborStats> = BTreeMap::new();
        for cell in Cell::all() {
            let idx = VectorIndex::load(&self.workspace.embeddings(cell))?;
            if (idx.chunking(), idx.embedding()) != (cell.chunking, cell.embedding) {
                return Err(io_err(&self.workspace.embeddings(cell), "strategy tags do not match file name"));
            }
            if idx.len() >= 2 {
                stats.insert(cell.to_string(), idx.nn_stats()?);
            }
            let path = self.workspace.index(cell);
            ensure_parent(&path)?;
            idx.save(&path)?;
        }
        write_json(&self.workspace.index_stats(), &stats)
    }

    /// Indexes and TF-IDF models written by earlier stages.
    pub fn load_retrieval_state(&self) -> Result<RetrievalState, PipelineError> {
        self.workspace.require(Stage::Index)?;
        self.workspace.require(Stage::Embed)?;
        let mut indexes = BTreeMap::new();
        for cell in Cell::all() {
            indexes.insert(cell, VectorIndex::load(&self.workspace.index(cell))?);
        }
        let mut tfidf = BTreeMap::new();
        for s in ChunkingStrategy::ALL {
            tfidf.insert(s, TfidfModel::load(&self.workspace.tfidf(s))?);
        }
        Ok((indexes, tfidf))
    }

    /// Retrieve for `cells` from an indexed workspace, outside the staged flow.
    pub fn retrieve_cells(&self, queries_path: &Path, cells: &[Cell], k: usize) -> Result<Vec<RetrievalResult>, PipelineError> {
        let queries = load_queries(queries_path)?;
        let (indexes, tfidf) = self.load_retrieval_state()?;
        let provider = self.config.embedding_provider()?;
        let r = Retriever {
            indexes: &indexes,
            tfidf: &tfidf,
            provider: provider.as_ref(),
            weights: self.config.embedding.weights,
            embed_options: self.config.embed_options(),
        };
        Ok(r.run_cells(&queries, cells, k)?)
    }

    fn retrieve(&self) -> Result<(), PipelineError> {
        let results = self.retrieve_cells(&self.config.queries, &Cell::all(), self.config.retrieval_depth())?;
        write_jsonl(&self.workspace.results(), &results)
    }

    fn catalog(&self) -> Result<ChunkCatalog, PipelineError> {
        let mut catalog = ChunkCatalog::new();
        for s in ChunkingStrategy::ALL {
            let enriched: Vec<EnrichedChunk> = read_jsonl(&self.workspace.enriched(s))?;
            catalog.extend_enriched(s, &enriched);
        }
        Ok(catalog)
    }

    fn groundtruth(&self) -> Result<(), PipelineError> {
        let queries = load_queries(&self.config.queries)?;
        let results: Vec<RetrievalResult> = read_jsonl(&self.workspace.results())?;
        let reranker = self.config.rerank_provider()?;
        let mut opts = self.config.ground_truth_options();
        opts.checkpoint = Some(self.workspace.judgments_checkpoint());
        let judgments = build_ground_truth(&queries, &results, &self.catalog()?, reranker.as_ref(), &opts)?;
        write_jsonl(&self.workspace.judgments(), &judgments)
    }

    fn evaluate(&self) -> Result<(), PipelineError> {
        let results: Vec<RetrievalResult> = read_jsonl(&self.workspace.results())?;
        let judgments: Vec<RelevanceJudgment> = load_judgments(&self.workspace.judgments())?;
        let mut report = evaluate_all(
            &results,
            &judgments,
            &self.catalog()?,
            &self.config.evaluation.ks,
            &self.config.eval_options(),
        )?;
        report.chunk_stats = read_json::<BTreeMap<String, ChunkStats>>(&self.workspace.chunk_stats())?;
        report.nn_stats = read_json::<BTreeMap<String, NeighborStats>>(&self.workspace.index_stats())?;
        write_json(&self.workspace.report_json(), &report)?;
        let text = report.render();
        fs::write(self.workspace.report_txt(), &text).map_err(|e| io_err(&self.workspace.report_txt(), e))
    }
}

/// Load and check a finished workspace's report: every metric table must
/// have all nine cells, and the stored results must cover all nine cells.
pub fn load_report(workspace: &Path) -> Result<MetricReport, PipelineError> {
    let ws = Workspace::new(workspace);
    let results_path = ws.results();
    if !results_path.exists() {
        return Err(PipelineError::MissingArtifacts {
            stage: Stage::Retrieve,
            path: results_path.display().to_string(),
        });
    }
    let results: Vec<RetrievalResult> = read_jsonl(&results_path)?;
    let present: std::collections::BTreeSet<Cell> = results.iter().map(RetrievalResult::cell).collect();
    let missing: Vec<String> = Cell::all()
        .into_iter()
        .filter(|c| !present.contains(c))
        .map(|c| c.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(PipelineError::Incomplete(format!("missing results for cells: {}", missing.join(", "))));
    }
    let path = ws.report_json();
    if !path.exists() {
        return Err(PipelineError::MissingArtifacts {
            stage: Stage::Evaluate,
            path: path.display().to_string(),
        });
    }
    let report: MetricReport = read_json(&path)?;
    for &k in &report.ks {
        for m in Metric::ALL {
            let t = report.table(m, k);
            let missing: Vec<String> = Cell::all()
                .into_iter()
                .filter(|c| !t.contains_key(c))
                .map(|c| c.to_string())
                .collect();
            if !missing.is_empty() {
                return Err(PipelineError::Incomplete(format!(
                    "{} (@{k}) lacks cells: {}",
                    m.title(),
                    missing.join(", ")
                )));
            }
        }
    }
    Ok(report)
}

/// `report.json` of a workspace with timing fields removed.
pub fn canonical_report(workspace: &Path) -> Result<String, PipelineError> {
    Ok(canonical_json(&load_report(workspace)?))
}

mod erased {
    use serde::Serialize;

    /// Object-safe "serialize to JSON bytes".
    pub trait Json {
        fn json(&self) -> Vec<u8>;
    }

    impl<T: Serialize> Json for T {
        fn json(&self) -> Vec<u8> {
            serde_json::to_vec(self).expect("config serializes")
        }
    }
}
