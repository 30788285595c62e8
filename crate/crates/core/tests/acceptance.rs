//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest
//! harness so every criterion reports even when an earlier one fails.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::{Duration, Instant};

use rand::Rng;
use ragforge::chunking::{chunk_corpus, ChunkRecord, ChunkingConfig, ChunkingStrategy};
use ragforge::corpus::{load_corpus, Corpus, Document};
use ragforge::embedding::{
    embed_chunks, fuse, EmbedOptions, EmbeddingStrategy, FusionWeights, MockEmbedder,
    SparseProjection, TfidfModel,
};
use ragforge::evaluation::{
    build_ground_truth, evaluate_all, hit_rate_at_k, metadata_consistency_at_k, mrr_at_k, ndcg_at_k,
    precision_at_k, ChunkCatalog, ChunkKey, EvalError, EvalOptions, GroundTruthOptions, JudgmentSet, Metric,
    MockReranker, RelevanceJudgment,
};
use ragforge::index::VectorIndex;
use ragforge::metadata::EnrichedChunk;
use ragforge::pipeline::{canonical_report, load_report, read_jsonl, Pipeline};
use ragforge::providers::{ProviderError, RerankProvider};
use ragforge::retrieval::{load_queries, Cell, QueryRecord, RankedHit, RetrievalResult, Retriever};
use ragforge::tokenizer::{Tokenizer, WordTokenizer};
use ragforge::vector::{cosine, norm};

type Outcome = Result<String, String>;

// negated so that NaN fails the check
macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

// ---------------------------------------------------------------- 1

fn metric_oracle_equivalence() -> Outcome {
    let mut rng = common::rng(101);
    let mut checks = 0usize;
    let mut worst = 0.0f64;
    for case in 0..100 {
        let fx = common::random_metric_fixture(&mut rng);
        let set = JudgmentSet::new(&fx.judgments);
        let mut catalog = ChunkCatalog::new();
        for (id, cat) in &fx.chunks {
            catalog.insert(ChunkKey::new(ChunkingStrategy::Naive, id.clone()), format!("text {id}"), cat.clone());
        }
        for k in [1, 3, 5, 10] {
            let j = &fx.judgments;
            let r = &fx.results;
            let pairs = [
                ("hit_rate", hit_rate_at_k(&set, r, k), common::oracle_hit_rate(j, r, k)),
                ("precision", precision_at_k(&set, r, k), common::oracle_precision(j, r, k)),
                ("mrr", mrr_at_k(&set, r, k), common::oracle_mrr(j, r, k)),
                ("ndcg", ndcg_at_k(&set, r, k, false), common::oracle_ndcg(j, r, k, false)),
                ("ndcg_binary", ndcg_at_k(&set, r, k, true), common::oracle_ndcg(j, r, k, true)),
                (
                    "consistency",
                    metadata_consistency_at_k(&catalog, r, k),
                    common::oracle_consistency(r, k, |_, id| fx.category(id)),
                ),
            ];
            for (name, got, want) in pairs {
                let got = got.map_err(|e| format!("case {case} {name}@{k}: {e}"))?;
                let d = (got - want).abs();
                worst = worst.max(d);
                ensure!(d <= 1e-12, "case {case} {name}@{k}: {got} vs oracle {want}");
                checks += 1;
            }
        }
    }
    Ok(format!("{checks} metric values, max |diff| {worst:.1e}"))
}

// ---------------------------------------------------------------- 2

fn exact_search_correctness() -> Outcome {
    let mut rng = common::rng(202);
    let mut pairs = 0;
    // 8 indexes × 25 queries
    for (i, dim) in [64, 1536, 64, 1536, 64, 1536, 64, 1536].into_iter().enumerate() {
        let n = if i < 2 { 2000 } else { rng.random_range(1..=2000) };
        let vectors = common::random_vectors(&mut rng, n, dim);
        let index = VectorIndex::build(ChunkingStrategy::Naive, EmbeddingStrategy::Content, &vectors)
            .map_err(|e| e.to_string())?;
        for q in 0..25 {
            // some queries are stored vectors, so exact ties with duplicates occur
            let query = if q % 5 == 0 {
                vectors[rng.random_range(0..vectors.len())].values.clone()
            } else {
                common::random_unit(&mut rng, dim)
            };
            let k = match q % 4 {
                0 => 1,
                1 => 10,
                2 => rng.random_range(1..=index.len()),
                _ => index.len() + 3,
            };
            let got = index.search(&query, k).map_err(|e| e.to_string())?;
            let want = common::brute_force_search(&index, &query, k);
            ensure!(got.len() == want.len(), "index {i} query {q}: {} hits vs {}", got.len(), want.len());
            for (g, w) in got.iter().zip(&want) {
                ensure!(
                    g.chunk_id == w.0 && (g.score - w.1).abs() <= 1e-12,
                    "index {i} query {q}: {:?} vs oracle {:?}",
                    (&g.chunk_id, g.score),
                    w
                );
            }
            pairs += 1;
        }
    }
    Ok(format!("{pairs} (index, query) pairs, N ≤ 2000, D ∈ {{64, 1536}}"))
}

// ---------------------------------------------------------------- 3

fn random_document(rng: &mut impl Rng, i: usize) -> Document {
    let words = ["alpha", "beta", "gamma", "delta", "bucket", "policy", "key", "x", "región", "数据"];
    let mut body = String::new();
    let paragraphs = rng.random_range(1..12);
    for p in 0..paragraphs {
        if p > 0 {
            body.push_str(if rng.random_bool(0.8) { "\n\n" } else { "\n" });
        }
        let sentences = rng.random_range(1..40);
        for s in 0..sentences {
            if s > 0 {
                body.push(' ');
            }
            if rng.random_bool(0.03) {
                // long run with no whitespace at all
                let n = rng.random_range(100..700);
                body.push_str(&"ab.".repeat(n));
                continue;
            }
            let n = rng.random_range(1..60);
            for w in 0..n {
                if w > 0 {
                    body.push(if rng.random_bool(0.05) { '\n' } else { ' ' });
                }
                body.push_str(words[rng.random_range(0..words.len())]);
                if rng.random_bool(0.05) {
                    body.push_str(",;");
                }
            }
            body.push_str([".", "!", "?", ""][rng.random_range(0..4)]);
        }
    }
    Document {
        doc_id: format!("r{i:03}"),
        title: format!("r{i}"),
        source_path: format!("r{i}.txt"),
        body,
        source_tag: "random".into(),
    }
}

fn token_texts<'a>(tok: &dyn Tokenizer, s: &'a str) -> Vec<&'a str> {
    tok.tokenize(s).iter().map(|t| t.text).collect()
}

fn check_chunks(corpus: &Corpus, embedder: &MockEmbedder) -> Result<(usize, usize), String> {
    let tok = WordTokenizer;
    let by_doc = |chunks: &[ChunkRecord]| {
        let mut m: BTreeMap<String, Vec<ChunkRecord>> = BTreeMap::new();
        for c in chunks {
            m.entry(c.doc_id.clone()).or_default().push(c.clone());
        }
        m
    };
    let naive = chunk_corpus(corpus, &ChunkingConfig::naive(), &tok, None).map_err(|e| e.to_string())?;
    let recursive = chunk_corpus(corpus, &ChunkingConfig::recursive(), &tok, None).map_err(|e| e.to_string())?;
    let semantic = chunk_corpus(corpus, &ChunkingConfig::semantic(), &tok, Some(embedder)).map_err(|e| e.to_string())?;
    let (naive, recursive, semantic) = (by_doc(&naive.chunks), by_doc(&recursive.chunks), by_doc(&semantic.chunks));

    let mut forced = 0;
    for doc in corpus.documents() {
        let all = token_texts(&tok, &doc.body);
        // naive: concatenated chunk tokens are the document's tokens
        let joined: Vec<&str> = naive[&doc.doc_id].iter().flat_map(|c| token_texts(&tok, &c.text)).collect();
        ensure!(joined == all, "{}: naive chunks do not reconstruct the document", doc.doc_id);
        ensure!(
            naive[&doc.doc_id].iter().all(|c| c.token_count <= 1024),
            "{}: naive chunk over 1024",
            doc.doc_id
        );

        let rc = &recursive[&doc.doc_id];
        ensure!(rc.iter().all(|c| c.token_count <= 512), "{}: recursive chunk over 512", doc.doc_id);
        for w in rc.windows(2) {
            let a = token_texts(&tok, &w[0].text);
            let b = token_texts(&tok, &w[1].text);
            let ov = 128.min(a.len());
            ensure!(
                b.len() >= ov && b[..ov] == a[a.len() - ov..],
                "{}: overlap mismatch between {} and {}",
                doc.doc_id,
                w[0].chunk_id,
                w[1].chunk_id
            );
            if a.len() >= 128 {
                forced += 1;
            }
        }
        if all.len() > 512 {
            ensure!(rc.len() >= 2, "{}: {} tokens in one recursive chunk", doc.doc_id, all.len());
        }

        let sc = semantic.get(&doc.doc_id).map_or(&[][..], Vec::as_slice);
        ensure!(sc.iter().all(|c| c.token_count <= 1024), "{}: semantic chunk over 1024", doc.doc_id);
    }
    Ok((corpus.len(), forced))
}

fn chunker_invariants() -> Outcome {
    let mut rng = common::rng(303);
    let mut corpus = Corpus::new("random");
    for i in 0..200 {
        corpus.push(random_document(&mut rng, i)).map_err(|e| e.to_string())?;
    }
    let embedder = MockEmbedder::new(256, 42);
    let (n, forced_random) = check_chunks(&corpus, &embedder)?;

    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let pipeline = Pipeline::new(common::fixture_config(tmp.path())).map_err(|e| e.to_string())?;
    pipeline.run(ragforge::pipeline::Stage::Ingest).map_err(|e| e.to_string())?;
    let fixture = load_corpus(&pipeline.workspace().corpus()).map_err(|e| e.to_string())?;
    let (m, forced_fixture) = check_chunks(&fixture, &embedder)?;
    ensure!(forced_random > 0, "no forced recursive splits were exercised");
    Ok(format!(
        "{n} random + {m} fixture documents, {} overlapping recursive boundaries checked",
        forced_random + forced_fixture
    ))
}

// ---------------------------------------------------------------- 4

fn fixture_enriched(ws: &std::path::Path) -> Result<BTreeMap<ChunkingStrategy, Vec<EnrichedChunk>>, String> {
    let pipeline = Pipeline::new(common::fixture_config(ws)).map_err(|e| e.to_string())?;
    use ragforge::pipeline::Stage;
    for s in [Stage::Ingest, Stage::Chunk, Stage::Enrich] {
        pipeline.run(s).map_err(|e| e.to_string())?;
    }
    ChunkingStrategy::ALL
        .into_iter()
        .map(|s| Ok((s, read_jsonl(&pipeline.workspace().enriched(s)).map_err(|e| e.to_string())?)))
        .collect()
}

fn fusion_reductions() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let enriched = fixture_enriched(tmp.path())?;
    let dim = 1536;
    let provider = MockEmbedder::new(dim, 42);
    let opts = EmbedOptions::default();
    let tok = WordTokenizer;
    let identity = FusionWeights::new(1.0, 0.0).map_err(|e| e.to_string())?;

    let mut min_cos = f64::INFINITY;
    let mut worst_norm = 0.0f64;
    let mut vectors = 0;
    let mut all_models = BTreeMap::new();
    for (s, chunks) in &enriched {
        let model = TfidfModel::fit(chunks, dim, 7).map_err(|e| e.to_string())?;
        let content = embed_chunks(chunks, EmbeddingStrategy::Content, &provider, &tok, None, identity, &opts)
            .map_err(|e| e.to_string())?;
        let reduced = embed_chunks(chunks, EmbeddingStrategy::TfidfWeighted, &provider, &tok, Some(&model), identity, &opts)
            .map_err(|e| e.to_string())?;
        for (c, r) in content.iter().zip(&reduced) {
            ensure!(c.id == r.id, "id order differs");
            min_cos = min_cos.min(cosine(&c.values, &r.values));
        }
        for strategy in EmbeddingStrategy::ALL {
            let vs = embed_chunks(chunks, strategy, &provider, &tok, Some(&model), FusionWeights::default(), &opts)
                .map_err(|e| e.to_string())?;
            for v in vs.iter().chain(&content).chain(&reduced) {
                worst_norm = worst_norm.max((norm(&v.values) - 1.0).abs());
                vectors += 1;
            }
        }
        all_models.insert(*s, model);
    }
    ensure!(min_cos >= 1.0 - 1e-9, "weights (1, 0): min cosine to content {min_cos}");

    // query vectors under every cell
    let queries = load_queries(&common::fixture_dir().join("queries.jsonl")).map_err(|e| e.to_string())?;
    let indexes: BTreeMap<Cell, VectorIndex> = BTreeMap::new();
    let retriever = Retriever {
        indexes: &indexes,
        tfidf: &all_models,
        provider: &provider,
        weights: FusionWeights::default(),
        embed_options: opts,
    };
    for cell in Cell::all() {
        for v in retriever.embed_queries(&queries, cell).map_err(|e| e.to_string())? {
            worst_norm = worst_norm.max((norm(&v) - 1.0).abs());
            vectors += 1;
        }
    }
    ensure!(worst_norm <= 1e-6, "a vector deviates from unit norm by {worst_norm}");

    // orthogonal unit components: |0.7ĉ + 0.3t̂| = sqrt(0.49 + 0.09)
    let mut rng = common::rng(404);
    let mut worst_ortho = 0.0f64;
    for _ in 0..200 {
        let c = common::random_unit(&mut rng, 64);
        let r = common::random_unit(&mut rng, 64);
        let proj: f64 = c.iter().zip(&r).map(|(a, b)| a * b).sum();
        let t: Vec<f64> = r.iter().zip(&c).map(|(x, y)| x - proj * y).collect();
        let fused = fuse(&c, Some(&t), FusionWeights::default()).map_err(|e| e.to_string())?;
        worst_ortho = worst_ortho.max((fused.pre_norm - 0.58f64.sqrt()).abs());
        let tn = norm(&t);
        for i in 0..64 {
            let want = (0.7 * c[i] + 0.3 * t[i] / tn) / 0.58f64.sqrt();
            worst_ortho = worst_ortho.max((fused.vector[i] - want).abs());
        }
    }
    ensure!(worst_ortho <= 1e-9, "orthogonal case off by {worst_ortho}");
    Ok(format!(
        "min cos(1,0)={min_cos:.12}, {vectors} vectors max |‖v‖-1|={worst_norm:.1e}, orthogonal max err {worst_ortho:.1e}"
    ))
}

// ---------------------------------------------------------------- 5

fn projection_sanity() -> Outcome {
    let (v, d) = (2000, 1536);
    let proj = SparseProjection::new(v, d, 7);
    let mut rng = common::rng(505);
    let mut total = 0.0;
    let mut worst = 0.0f64;
    let pairs = 1000;
    for _ in 0..pairs {
        let x = common::random_unit(&mut rng, v);
        let z = common::random_unit(&mut rng, v);
        // correlation spread over [-1, 1] so the check covers more than near-orthogonal pairs
        let rho: f64 = rng.random_range(-1.0..=1.0);
        let y: Vec<f64> = x.iter().zip(&z).map(|(a, b)| rho * a + (1.0 - rho * rho).sqrt() * b).collect();
        let original = cosine(&x, &y);
        let projected = cosine(&proj.project_dense(&x), &proj.project_dense(&y));
        let d = (projected - original).abs();
        total += d;
        worst = worst.max(d);
    }
    let mean = total / pairs as f64;
    ensure!(mean <= 0.05, "mean cosine distortion {mean:.4} > 0.05");
    Ok(format!("mean |Δcos| {mean:.4} (max {worst:.4}) over {pairs} pairs, V={v}, D={d}"))
}

// ---------------------------------------------------------------- 6

struct CountingReranker {
    inner: MockReranker,
    scored: AtomicUsize,
}

impl RerankProvider for CountingReranker {
    fn name(&self) -> &str {
        "counting"
    }
    fn score(&self, query: &str, documents: &[&str]) -> Result<Vec<f64>, ProviderError> {
        self.scored.fetch_add(documents.len(), Ordering::SeqCst);
        self.inner.score(query, documents)
    }
}

fn check_normalization(judgments: &[RelevanceJudgment]) -> Result<usize, String> {
    let mut by_query: BTreeMap<&str, Vec<&RelevanceJudgment>> = BTreeMap::new();
    for j in judgments {
        by_query.entry(&j.query_id).or_default().push(j);
    }
    for (q, js) in &by_query {
        let raw: Vec<f64> = js.iter().map(|j| j.raw_score).collect();
        let lo = raw.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let norms: Vec<f64> = js.iter().map(|j| j.normalized_score).collect();
        if hi == lo {
            ensure!(norms.iter().all(|&n| n == 1.0), "{q}: degenerate pool not all 1.0");
        } else {
            let nmin = norms.iter().copied().fold(f64::INFINITY, f64::min);
            let nmax = norms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            ensure!(nmin == 0.0 && nmax == 1.0, "{q}: normalized range [{nmin}, {nmax}]");
            for j in js {
                let want = (j.raw_score - lo) / (hi - lo);
                ensure!((j.normalized_score - want).abs() <= 1e-12, "{q}: {} misnormalized", j.chunk_id);
            }
        }
        ensure!(js.iter().all(|j| j.relevant == (j.normalized_score >= 0.8)), "{q}: relevant flag inconsistent");
    }
    Ok(by_query.len())
}

fn ground_truth_normalization() -> Outcome {
    // pooled union dedup: nine configurations returning the same 50 chunks
    let texts: Vec<String> = (0..50).map(|i| format!("shared chunk number {i} about topic {}", i % 7)).collect();
    let mut catalog = ChunkCatalog::new();
    for s in ChunkingStrategy::ALL {
        for (i, t) in texts.iter().enumerate() {
            catalog.insert(ChunkKey::new(s, format!("doc#{i}")), t.clone(), "c");
        }
    }
    let queries = vec![QueryRecord::new("q1", "topic 3 chunk")];
    let results: Vec<RetrievalResult> = Cell::all()
        .into_iter()
        .map(|cell| RetrievalResult {
            query_id: "q1".into(),
            chunking: cell.chunking,
            embedding: cell.embedding,
            k: 50,
            hits: (0..50)
                .map(|i| RankedHit {
                    chunk_id: format!("doc#{i}"),
                    score: 0.0,
                    rank: i + 1,
                })
                .collect(),
            latency_micros: 0,
            embed_latency_micros: 0,
        })
        .collect();
    let reranker = CountingReranker {
        inner: MockReranker::default(),
        scored: AtomicUsize::new(0),
    };
    let judgments = build_ground_truth(&queries, &results, &catalog, &reranker, &GroundTruthOptions::default())
        .map_err(|e| e.to_string())?;
    let candidates: BTreeSet<usize> = judgments.iter().map(|j| j.candidate).collect();
    let scored = reranker.scored.load(Ordering::SeqCst);
    ensure!(candidates.len() == 50, "pool has {} candidates, expected 50", candidates.len());
    ensure!(scored == 50, "reranker scored {scored} pairs, expected 50");
    check_normalization(&judgments)?;

    // degenerate spread
    let flat_catalog = {
        let mut c = ChunkCatalog::new();
        for s in ChunkingStrategy::ALL {
            for i in 0..50 {
                c.insert(ChunkKey::new(s, format!("doc#{i}")), "identical text", "c");
            }
        }
        c
    };
    let flat = build_ground_truth(&queries, &results, &flat_catalog, &MockReranker::default(), &GroundTruthOptions::default())
        .map_err(|e| e.to_string())?;
    ensure!(flat.iter().all(|j| j.normalized_score == 1.0), "degenerate pool not mapped to 1.0");

    // every query pool of the bundled fixture
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let pipeline = Pipeline::new(common::fixture_config(tmp.path())).map_err(|e| e.to_string())?;
    use ragforge::pipeline::Stage;
    for s in [Stage::Ingest, Stage::Chunk, Stage::Enrich, Stage::Embed, Stage::Index, Stage::Retrieve, Stage::Groundtruth] {
        pipeline.run(s).map_err(|e| e.to_string())?;
    }
    let fixture: Vec<RelevanceJudgment> = read_jsonl(&pipeline.workspace().judgments()).map_err(|e| e.to_string())?;
    let nq = check_normalization(&fixture)?;
    Ok(format!(
        "9×50 identical → pool {} ({} rerank calls); {nq} fixture query pools span [0, 1]",
        candidates.len(),
        scored
    ))
}

// ---------------------------------------------------------------- 7, 8, 9

struct Runs {
    a: tempfile::TempDir,
    b: tempfile::TempDir,
    elapsed_a: Duration,
}

fn full_run(ws: &std::path::Path) -> Result<Duration, String> {
    let t = Instant::now();
    let pipeline = Pipeline::new(common::fixture_config(ws)).map_err(|e| e.to_string())?;
    pipeline.run_all().map_err(|e| e.to_string())?;
    Ok(t.elapsed())
}

fn directional_enrichment(runs: &Runs) -> Outcome {
    ensure!(runs.elapsed_a < Duration::from_secs(60), "full run took {:?}", runs.elapsed_a);
    let report = load_report(runs.a.path()).map_err(|e| e.to_string())?;
    let mut detail = Vec::new();
    let mut failures = Vec::new();
    for s in ChunkingStrategy::ALL {
        let hr = |e| report.value(Cell::new(s, e), Metric::HitRate, 10).expect("cell present");
        let (c, p, t) = (
            hr(EmbeddingStrategy::Content),
            hr(EmbeddingStrategy::PrefixFusion),
            hr(EmbeddingStrategy::TfidfWeighted),
        );
        detail.push(format!("{s}: content {c:.3} prefix {p:.3} tfidf {t:.3}"));
        if p < c || t < c {
            failures.push(s.to_string());
        }
    }
    ensure!(failures.is_empty(), "enriched below content on {}: {}", failures.join(", "), detail.join("; "));
    Ok(format!("Hit Rate@10 {} (full run {:.2?})", detail.join("; "), runs.elapsed_a))
}

fn end_to_end_determinism(runs: &Runs) -> Outcome {
    let a = canonical_report(runs.a.path()).map_err(|e| e.to_string())?;
    let b = canonical_report(runs.b.path()).map_err(|e| e.to_string())?;
    ensure!(a == b, "canonical reports differ");
    let ja: Vec<RelevanceJudgment> = read_jsonl(&runs.a.path().join("judgments.jsonl")).map_err(|e| e.to_string())?;
    let jb: Vec<RelevanceJudgment> = read_jsonl(&runs.b.path().join("judgments.jsonl")).map_err(|e| e.to_string())?;
    ensure!(ja == jb, "judgments differ between runs");
    Ok(format!("two runs, canonical report.json identical ({} bytes)", a.len()))
}

fn matrix_completeness(runs: &Runs) -> Outcome {
    let report = load_report(runs.a.path()).map_err(|e| e.to_string())?;
    let mut tables = 0;
    for &k in &report.ks {
        for m in Metric::ALL {
            let t = report.table(m, k);
            ensure!(t.len() == 9, "{} @{k}: {} cells", m.title(), t.len());
            ensure!(t.values().all(|v| (0.0..=1.0).contains(v) && v.is_finite()), "{} @{k}: value out of range", m.title());
            let text = report.render_table(m, k);
            let lines: Vec<&str> = text.lines().collect();
            let header: Vec<&str> = lines[1].split('|').map(str::trim).collect();
            ensure!(header == ["Retriever", "Semantic", "Naive", "Recursive"], "header {:?}", header);
            let rows: Vec<&str> = lines
                .iter()
                .skip(3)
                .take(3)
                .map(|l| l.split('|').next().unwrap_or("").trim())
                .collect();
            ensure!(rows == ["Content", "Prefix-Fusion", "TF-IDF"], "rows {:?}", rows);
            // each rendered value matches the table entry
            for (row, e) in lines.iter().skip(3).take(3).zip([
                EmbeddingStrategy::Content,
                EmbeddingStrategy::PrefixFusion,
                EmbeddingStrategy::TfidfWeighted,
            ]) {
                let cells: Vec<&str> = row.split('|').skip(1).map(str::trim).collect();
                for (cell_text, c) in cells.iter().zip(ChunkingStrategy::ALL) {
                    let want = format!("{:.3}", t[&Cell::new(c, e)]);
                    ensure!(*cell_text == want, "{} @{k} {c}/{e}: rendered {cell_text}, value {want}", m.title());
                }
            }
            tables += 1;
        }
    }

    // a missing cell is an error naming it
    let results: Vec<RetrievalResult> = read_jsonl(&runs.a.path().join("results.jsonl")).map_err(|e| e.to_string())?;
    let judgments: Vec<RelevanceJudgment> = read_jsonl(&runs.a.path().join("judgments.jsonl")).map_err(|e| e.to_string())?;
    let mut catalog = ChunkCatalog::new();
    for s in ChunkingStrategy::ALL {
        let e: Vec<EnrichedChunk> = read_jsonl(&runs.a.path().join("enriched").join(format!("{s}.jsonl"))).map_err(|e| e.to_string())?;
        catalog.extend_enriched(s, &e);
    }
    let dropped: Cell = "recursive/prefix_fusion".parse().map_err(|e: String| e)?;
    let partial: Vec<RetrievalResult> = results.into_iter().filter(|r| r.cell() != dropped).collect();
    match evaluate_all(&partial, &judgments, &catalog, &[10], &EvalOptions::default()) {
        Err(EvalError::MissingCells(cells)) => {
            ensure!(cells == [dropped.to_string()], "missing cells reported as {cells:?}")
        }
        other => return Err(format!("expected MissingCells, got {:?}", other.map(|_| ()))),
    }
    Ok(format!("{tables} tables of 9 cells in Content/Prefix-Fusion/TF-IDF × Semantic/Naive/Recursive layout"))
}

// ----------------------------------------------------------------

fn run(n: usize, name: &str, limit: Option<Duration>, f: impl FnOnce() -> Outcome) -> bool {
    let t = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        Err(p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panicked".into()))
    });
    let elapsed = t.elapsed();
    let outcome = match (outcome, limit) {
        (Ok(_), Some(l)) if elapsed > l => Err(format!("took {elapsed:.2?}, limit {l:?}")),
        (o, _) => o,
    };
    let ok = outcome.is_ok();
    let (tag, detail) = match outcome {
        Ok(d) => ("PASS", d),
        Err(d) => ("FAIL", d),
    };
    println!("{tag} [{n}] {name} ({elapsed:.2?}): {detail}");
    ok
}

fn main() -> ExitCode {
    let mut ok = true;
    ok &= run(1, "metric oracle equivalence", Some(Duration::from_secs(5)), metric_oracle_equivalence);
    ok &= run(2, "exact-search correctness", Some(Duration::from_secs(30)), exact_search_correctness);
    ok &= run(3, "chunker invariants", Some(Duration::from_secs(10)), chunker_invariants);
    ok &= run(4, "fusion reductions", None, fusion_reductions);
    ok &= run(5, "projection sanity", None, projection_sanity);
    ok &= run(6, "ground-truth normalization", None, ground_truth_normalization);

    let runs = (|| -> Result<Runs, String> {
        let a = tempfile::tempdir().map_err(|e| e.to_string())?;
        let b = tempfile::tempdir().map_err(|e| e.to_string())?;
        let elapsed_a = full_run(a.path())?;
        full_run(b.path())?;
        Ok(Runs { a, b, elapsed_a })
    })();
    match runs {
        Ok(runs) => {
            ok &= run(7, "directional enrichment check", None, || directional_enrichment(&runs));
            ok &= run(8, "end-to-end determinism", None, || end_to_end_determinism(&runs));
            ok &= run(9, "3×3 completeness", None, || matrix_completeness(&runs));
        }
        Err(e) => {
            for (n, name) in [(7, "directional enrichment check"), (8, "end-to-end determinism"), (9, "3×3 completeness")] {
                println!("FAIL [{n}] {name}: full pipeline run failed: {e}");
            }
            ok = false;
        }
    }
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
