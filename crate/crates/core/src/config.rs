//! Pipeline configuration: a JSON file with `${VAR}` interpolation.
//!
//! Relative paths resolve against the directory holding the config file.
//! Every field has a default, so `{}` plus a corpus list is a valid config.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::chunking::{ChunkingConfig, ChunkingStrategy};
use crate::embedding::{EmbedOptions, FusionWeights, MockEmbedder, DEFAULT_DIMENSION, DEFAULT_MOCK_SEED, DEFAULT_PROJECTION_SEED};
use crate::evaluation::{EvalOptions, GroundTruthOptions, MockReranker, DEFAULT_RERANK_SEED};
use crate::metadata::{EnrichOptions, MockChatProvider, DEFAULT_PROMPT_BUDGET};
use crate::providers::http::{HttpChatProvider, HttpEmbeddingProvider, HttpEndpoint, HttpRerankProvider};
use crate::providers::{ChatProvider, EmbeddingProvider, ProviderError, RerankProvider};

pub const API_KEY_VAR: &str = "RAGFORGE_API_KEY";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    Read { path: String, message: String },
    #[error("environment variable {0} is not set")]
    MissingVar(String),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Credentials(#[from] ProviderError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceConfig {
    pub dir: PathBuf,
    pub tag: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChunkingSection {
    #[serde(default = "ChunkingConfig::naive")]
    pub naive: ChunkingConfig,
    #[serde(default = "ChunkingConfig::recursive")]
    pub recursive: ChunkingConfig,
    #[serde(default = "ChunkingConfig::semantic")]
    pub semantic: ChunkingConfig,
}

impl Default for ChunkingSection {
    fn default() -> Self {
        Self {
            naive: ChunkingConfig::naive(),
            recursive: ChunkingConfig::recursive(),
            semantic: ChunkingConfig::semantic(),
        }
    }
}

impl ChunkingSection {
    pub fn get(&self, s: ChunkingStrategy) -> &ChunkingConfig {
        match s {
            ChunkingStrategy::Naive => &self.naive,
            ChunkingStrategy::Recursive => &self.recursive,
            ChunkingStrategy::Semantic => &self.semantic,
        }
    }
}

/// `mock` or an HTTP endpoint. API keys come from `api_key` (usually
/// `"${RAGFORGE_API_KEY}"`), then `RAGFORGE_<ROLE>_API_KEY`, then
/// `RAGFORGE_API_KEY`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ProviderConfig {
    Mock {
        #[serde(default)]
        seed: Option<u64>,
    },
    Http {
        url: String,
        model: String,
        #[serde(default, skip_serializing)]
        api_key: Option<String>,
        #[serde(default = "default_timeout")]
        timeout_secs: u64,
    },
}

fn default_timeout() -> u64 {
    60
}

impl Default for ProviderConfig {
    fn default() -> Self {
        Self::Mock { seed: None }
    }
}

impl ProviderConfig {
    pub fn is_mock(&self) -> bool {
        matches!(self, Self::Mock { .. })
    }

    fn endpoint(&self, role: &str) -> Result<Option<HttpEndpoint>, ProviderError> {
        let Self::Http {
            url,
            model,
            api_key,
            timeout_secs,
        } = self
        else {
            return Ok(None);
        };
        let role_var = format!("RAGFORGE_{}_API_KEY", role.to_uppercase());
        let key = api_key
            .clone()
            .filter(|k| !k.is_empty())
            .or_else(|| std::env::var(&role_var).ok().filter(|k| !k.is_empty()))
            .or_else(|| std::env::var(API_KEY_VAR).ok().filter(|k| !k.is_empty()))
            .ok_or_else(|| {
                ProviderError::MissingCredentials(format!("{role} provider needs {API_KEY_VAR} or {role_var}"))
            })?;
        Ok(Some(HttpEndpoint {
            url: url.clone(),
            model: model.clone(),
            api_key: Some(key),
            timeout_secs: *timeout_secs,
        }))
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProvidersSection {
    pub chat: ProviderConfig,
    pub embedding: ProviderConfig,
    pub rerank: ProviderConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnrichmentSection {
    pub batch_size: usize,
    pub max_retries: usize,
    pub temperature: f64,
    pub max_output_tokens: usize,
    pub prompt_budget: usize,
}

impl Default for EnrichmentSection {
    fn default() -> Self {
        Self {
            batch_size: 16,
            max_retries: 2,
            temperature: 0.5,
            max_output_tokens: 1024,
            prompt_budget: DEFAULT_PROMPT_BUDGET,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingSection {
    pub dimension: usize,
    pub token_budget: usize,
    pub weights: FusionWeights,
    pub projection_seed: u64,
    pub batch_size: usize,
    pub max_retries: usize,
}

impl Default for EmbeddingSection {
    fn default() -> Self {
        Self {
            dimension: DEFAULT_DIMENSION,
            token_budget: 8192,
            weights: FusionWeights::default(),
            projection_seed: DEFAULT_PROJECTION_SEED,
            batch_size: 32,
            max_retries: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationSection {
    pub ks: Vec<usize>,
    pub tau: f64,
    pub pool_size: usize,
    pub high_percentile: f64,
    pub binary_ndcg: bool,
    pub batch_size: usize,
    pub max_retries: usize,
}

impl Default for EvaluationSection {
    fn default() -> Self {
        Self {
            ks: vec![1, 5, 10],
            tau: 0.8,
            pool_size: 50,
            high_percentile: 95.0,
            binary_ndcg: false,
            batch_size: 64,
            max_retries: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TokenizerChoice {
    Word,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub corpus: Vec<SourceConfig>,
    #[serde(default = "default_workspace")]
    pub workspace: PathBuf,
    #[serde(default = "default_queries")]
    pub queries: PathBuf,
    #[serde(default = "default_tokenizer")]
    pub tokenizer: TokenizerChoice,
    #[serde(default)]
    pub chunking: ChunkingSection,
    #[serde(default)]
    pub providers: ProvidersSection,
    #[serde(default)]
    pub enrichment: EnrichmentSection,
    #[serde(default)]
    pub embedding: EmbeddingSection,
    #[serde(default)]
    pub evaluation: EvaluationSection,
    /// Bound on concurrent provider requests within a stage.
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
}

fn default_workspace() -> PathBuf {
    PathBuf::from("workspace")
}

fn default_queries() -> PathBuf {
    PathBuf::from("queries.jsonl")
}

fn default_tokenizer() -> TokenizerChoice {
    TokenizerChoice::Word
}

fn default_parallelism() -> usize {
    4
}

fn var_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\$\{([A-Za-z_][A-Za-z0-9_]*)\}").expect("static regex"))
}

/// Replace `${VAR}` in every string value. `lookup` returns `None` for unset
/// variables, which is an error.
pub fn interpolate(v: &mut Value, lookup: &dyn Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
    match v {
        Value::String(s) => {
            let mut missing = None;
            let replaced = var_regex().replace_all(s, |c: &regex::Captures<'_>| match lookup(&c[1]) {
                Some(val) => val,
                None => {
                    missing.get_or_insert_with(|| c[1].to_string());
                    String::new()
                }
            });
            if let Some(name) = missing {
                return Err(ConfigError::MissingVar(name));
            }
            *s = replaced.into_owned();
            Ok(())
        }
        Value::Array(items) => items.iter_mut().try_for_each(|x| interpolate(x, lookup)),
        Value::Object(map) => map.values_mut().try_for_each(|x| interpolate(x, lookup)),
        _ => Ok(()),
    }
}

impl PipelineConfig {
    /// Parse, interpolate from the process environment, resolve paths
    /// against `base_dir`, and validate.
    pub fn from_json(text: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        Self::from_json_with(text, base_dir, &|name| std::env::var(name).ok())
    }

    pub fn from_json_with(
        text: &str,
        base_dir: &Path,
        lookup: &dyn Fn(&str) -> Option<String>,
    ) -> Result<Self, ConfigError> {
        let mut v: Value = serde_json::from_str(text).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        interpolate(&mut v, lookup)?;
        let mut cfg: PipelineConfig = serde_json::from_value(v).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base_dir.join(&*p);
            }
        };
        resolve(&mut cfg.workspace);
        resolve(&mut cfg.queries);
        cfg.corpus.iter_mut().for_each(|s| resolve(&mut s.dir));
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|e| ConfigError::Read {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_json(&text, &base)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.corpus.is_empty() {
            return bad("corpus must list at least one source directory".into());
        }
        for s in ChunkingStrategy::ALL {
            let c = self.chunking.get(s);
            if c.strategy != s {
                return bad(format!("chunking.{s} has strategy {}", c.strategy));
            }
            c.validate().map_err(|e| ConfigError::Invalid(format!("chunking.{s}: {e}")))?;
        }
        self.embedding
            .weights
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.embedding.dimension < 8 {
            return bad("embedding.dimension must be at least 8".into());
        }
        let ev = &self.evaluation;
        if ev.ks.is_empty() || ev.ks.contains(&0) {
            return bad("evaluation.ks must be non-empty and positive".into());
        }
        if !(0.0..=1.0).contains(&ev.tau) {
            return bad("evaluation.tau must be in [0, 1]".into());
        }
        if !(0.0..=100.0).contains(&ev.high_percentile) {
            return bad("evaluation.high_percentile must be in [0, 100]".into());
        }
        if ev.pool_size == 0 || self.parallelism == 0 || self.enrichment.batch_size == 0 {
            return bad("pool_size, parallelism and batch sizes must be at least 1".into());
        }
        Ok(())
    }

    /// Fails when an HTTP provider has no API key, before any work is done.
    pub fn check_credentials(&self) -> Result<(), ConfigError> {
        self.providers.chat.endpoint("chat")?;
        self.providers.embedding.endpoint("embedding")?;
        self.providers.rerank.endpoint("rerank")?;
        Ok(())
    }

    pub fn chat_provider(&self) -> Result<Box<dyn ChatProvider>, ConfigError> {
        Ok(match self.providers.chat.endpoint("chat")? {
            Some(e) => Box::new(HttpChatProvider::new(e)),
            None => Box::new(MockChatProvider),
        })
    }

    pub fn embedding_provider(&self) -> Result<Box<dyn EmbeddingProvider>, ConfigError> {
        let e = &self.embedding;
        Ok(match self.providers.embedding.endpoint("embedding")? {
            Some(ep) => Box::new(HttpEmbeddingProvider::new(ep, e.dimension, e.token_budget)),
            None => {
                let seed = match self.providers.embedding {
                    ProviderConfig::Mock { seed } => seed.unwrap_or(DEFAULT_MOCK_SEED),
                    _ => DEFAULT_MOCK_SEED,
                };
                Box::new(MockEmbedder::new(e.dimension, seed).with_token_budget(e.token_budget))
            }
        })
    }

    pub fn rerank_provider(&self) -> Result<Box<dyn RerankProvider>, ConfigError> {
        Ok(match self.providers.rerank.endpoint("rerank")? {
            Some(e) => Box::new(HttpRerankProvider::new(e)),
            None => {
                let seed = match self.providers.rerank {
                    ProviderConfig::Mock { seed } => seed.unwrap_or(DEFAULT_RERANK_SEED),
                    _ => DEFAULT_RERANK_SEED,
                };
                Box::new(MockReranker::new(seed))
            }
        })
    }

    pub fn enrich_options(&self) -> EnrichOptions {
        let e = &self.enrichment;
        EnrichOptions {
            batch_size: e.batch_size,
            max_retries: e.max_retries,
            parallelism: self.parallelism,
            temperature: e.temperature,
            max_output_tokens: e.max_output_tokens,
            prompt_budget: e.prompt_budget,
            checkpoint: None,
        }
    }

    pub fn embed_options(&self) -> EmbedOptions {
        EmbedOptions {
            batch_size: self.embedding.batch_size,
            max_retries: self.embedding.max_retries,
            parallelism: self.parallelism,
        }
    }

    pub fn ground_truth_options(&self) -> GroundTruthOptions {
        let e = &self.evaluation;
        GroundTruthOptions {
            pool_size: e.pool_size,
            tau: e.tau,
            high_percentile: e.high_percentile,
            batch_size: e.batch_size,
            max_retries: e.max_retries,
            checkpoint: None,
            require_full_matrix: true,
        }
    }

    pub fn eval_options(&self) -> EvalOptions {
        EvalOptions {
            binary_ndcg: self.evaluation.binary_ndcg,
        }
    }

    /// Depth of the stored retrieval results: enough for pooling and for
    /// every reported cutoff.
    pub fn retrieval_depth(&self) -> usize {
        let max_k = self.evaluation.ks.iter().copied().max().unwrap_or(1);
        self.evaluation.pool_size.max(max_k)
    }
}
