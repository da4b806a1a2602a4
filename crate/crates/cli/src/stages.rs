//! One function per pipeline stage. Each reads its upstream artifacts from
//! the output directory, writes its own, and appends a manifest entry.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use gut_core::corpus::{
    enumerate_pairs, load_constructs, load_gold_partition, load_relations, pairs_within, split_indices,
    write_constructs, write_partition, write_relations, ConstructSet, Partition,
};
use gut_core::embeddings::{align, read_embeddings, write_embeddings};
use gut_core::metrics::{ami, best_threshold_f1, pairwise_f1, roc_auc, EvaluationReport};
use gut_core::objective::{
    generate_candidates, read_json, resolve_relations, write_json, ArtifactSources, CandidatePool,
    CandidateRecord, SignedEdge, SweepArtifact,
};
use gut_core::projection::{
    concat_inputs, grid_search, read_model, score_pairs, train_on_inputs, write_model, CellResult, TrainConfig,
};
use gut_core::simgraph::{normalize01, pairwise_similarities, read_similarity, write_similarity};
use gut_core::synth::generate;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::manifest::Recorder;

pub const MODEL: &str = "model.gutprj";
pub const SPLIT: &str = "split.json";
pub const TRAIN_REPORT: &str = "train.json";
pub const SIMILARITY: &str = "similarity.gutsim";
pub const CANDIDATES: &str = "candidates.json";
pub const PARTITIONS: &str = "partitions";
pub const SWEEP: &str = "sweep.json";
pub const EVALUATION: &str = "evaluation.json";

fn runtime(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

/// Fails with a pointer to the stage that produces `path` when it is absent.
fn require(path: &Path, stage: &str) -> Result<(), CliError> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::Runtime(format!(
            "missing {}: run `gut {stage}` first",
            path.display()
        )))
    }
}

fn create_out(out: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(out).map_err(|e| runtime(out, e))
}

/// `path` relative to `out` when inside it, else absolute.
fn relative_to(out: &Path, path: &Path) -> Result<String, CliError> {
    let abs_out = std::path::absolute(out).map_err(|e| runtime(out, e))?;
    let abs = std::path::absolute(path).map_err(|e| runtime(path, e))?;
    let rel = abs.strip_prefix(&abs_out).map(Path::to_path_buf).unwrap_or(abs);
    Ok(rel.to_string_lossy().replace('\\', "/"))
}

struct Corpus {
    constructs: ConstructSet,
    gold: Partition,
    /// Concatenated name and definition embeddings per construct.
    inputs: Vec<Vec<f64>>,
}

fn load_corpus(cfg: &RunConfig, rec: &mut Recorder) -> Result<Corpus, CliError> {
    let i = &cfg.inputs;
    for path in [&i.constructs, &i.gold, &i.name_embeddings, &i.definition_embeddings] {
        require(path, "synth")?;
        rec.input(path)?;
    }
    let constructs = load_constructs(&i.constructs)?;
    let gold = load_gold_partition(&i.gold, &constructs)?;
    let name = read_embeddings(&i.name_embeddings)?;
    let definition = read_embeddings(&i.definition_embeddings)?;
    align(&name, &definition, &constructs)?;
    let inputs = concat_inputs(&name, &definition)?;
    Ok(Corpus { constructs, gold, inputs })
}

pub fn synth(cfg: &RunConfig) -> Result<(), CliError> {
    let params = cfg.synth_params();
    params.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let mut rec = Recorder::new("synth", cfg.seed, &cfg.out);
    let corpus = generate(&params)?;
    create_out(&cfg.out)?;
    let i = &cfg.inputs;
    for path in [&i.name_embeddings, &i.definition_embeddings] {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| runtime(dir, e))?;
        }
    }
    write_constructs(&corpus.constructs, &i.constructs)?;
    write_partition(&corpus.gold, &corpus.constructs, &i.gold)?;
    write_relations(&corpus.relations, &i.relations)?;
    write_embeddings(&corpus.name, &i.name_embeddings)?;
    write_embeddings(&corpus.definition, &i.definition_embeddings)?;
    for path in [&i.constructs, &i.gold, &i.relations, &i.name_embeddings, &i.definition_embeddings] {
        rec.output(path)?;
    }
    rec.finish()?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SplitFile {
    pub seed: u64,
    pub fractions: (f64, f64, f64),
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
}

#[derive(Debug, Serialize)]
struct TrainReport {
    config: TrainConfig,
    fit_on: &'static str,
    train_pairs: usize,
    val_pairs: usize,
    test_pairs: usize,
    epoch_loss: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    grid: Option<Vec<CellResult>>,
}

pub fn train(cfg: &RunConfig) -> Result<(), CliError> {
    cfg.train.base.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let mut rec = Recorder::new("train", cfg.seed, &cfg.out);
    let corpus = load_corpus(cfg, &mut rec)?;
    let split = split_indices(corpus.constructs.len(), cfg.split, cfg.seed)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let train_pairs = pairs_within(&corpus.gold, &split.train);
    let val_pairs = pairs_within(&corpus.gold, &split.val);
    let test_pairs = pairs_within(&corpus.gold, &split.test);

    let (config, grid) = match &cfg.train.grid {
        Some(spec) => {
            let result = grid_search(
                &corpus.inputs,
                &train_pairs,
                &val_pairs,
                spec,
                &cfg.train.base,
                cfg.train.repeats,
            )?;
            (result.best, Some(result.cells))
        }
        None => (cfg.train.base.clone(), None),
    };
    let fit: Vec<usize> = split.train.iter().chain(&split.val).copied().collect();
    let fit_pairs = pairs_within(&corpus.gold, &fit);
    let (model, log) = train_on_inputs(&corpus.inputs, &fit_pairs, &config)?;

    create_out(&cfg.out)?;
    let ids = |positions: &[usize]| -> Vec<String> {
        positions
            .iter()
            .map(|&p| corpus.constructs.get(p).expect("in range").id.clone())
            .collect()
    };
    let split_file = SplitFile {
        seed: cfg.seed,
        fractions: cfg.split,
        train: ids(&split.train),
        val: ids(&split.val),
        test: ids(&split.test),
    };
    let (model_path, split_path, report_path) =
        (cfg.out.join(MODEL), cfg.out.join(SPLIT), cfg.out.join(TRAIN_REPORT));
    write_model(&model, &model_path)?;
    write_json(&split_file, &split_path)?;
    write_json(
        &TrainReport {
            config,
            fit_on: "train+val",
            train_pairs: train_pairs.len(),
            val_pairs: val_pairs.len(),
            test_pairs: test_pairs.len(),
            epoch_loss: log.epoch_loss,
            grid,
        },
        &report_path,
    )?;
    for path in [&model_path, &split_path, &report_path] {
        rec.output(path)?;
    }
    rec.finish()?;
    Ok(())
}

/// Writes the similarity matrix from projected embeddings, or from the
/// pretrained embeddings when `raw` is set.
pub fn similarity(cfg: &RunConfig, raw: bool) -> Result<(), CliError> {
    let mut rec = Recorder::new("similarity", cfg.seed, &cfg.out);
    let corpus = load_corpus(cfg, &mut rec)?;
    let vectors = if raw {
        corpus.inputs
    } else {
        let model_path = cfg.out.join(MODEL);
        require(&model_path, "train")?;
        rec.input(&model_path)?;
        read_model(&model_path)?.project_all(&corpus.inputs)?
    };
    let ids: Vec<String> = corpus.constructs.ids().map(String::from).collect();
    let s = pairwise_similarities(&ids, &vectors)?;
    let path = cfg.out.join(SIMILARITY);
    write_similarity(&s, &path)?;
    rec.output(&path)?;
    rec.finish()?;
    Ok(())
}

fn load_edges(cfg: &RunConfig, constructs: &ConstructSet, rec: &mut Recorder) -> Result<Option<Vec<SignedEdge>>, CliError> {
    let path = &cfg.inputs.relations;
    if !path.exists() {
        if cfg.inputs.relations_explicit {
            return Err(CliError::Runtime(format!("missing relations file {}", path.display())));
        }
        return Ok(None);
    }
    rec.input(path)?;
    let relations = load_relations(path, constructs, cfg.significant_only)?;
    Ok(Some(resolve_relations(&relations, constructs)?))
}

pub fn candidates(cfg: &RunConfig) -> Result<(), CliError> {
    for spec in cfg.candidates.cells() {
        spec.validate()
            .map_err(|e| CliError::Usage(format!("{}: {e}", spec.summary())))?;
    }
    let mut rec = Recorder::new("candidates", cfg.seed, &cfg.out);
    require(&cfg.inputs.constructs, "synth")?;
    rec.input(&cfg.inputs.constructs)?;
    let constructs = load_constructs(&cfg.inputs.constructs)?;
    let sim_path = cfg.out.join(SIMILARITY);
    require(&sim_path, "similarity")?;
    rec.input(&sim_path)?;
    let raw = read_similarity(&sim_path)?;
    if !raw.ids().iter().map(String::as_str).eq(constructs.ids()) {
        return Err(CliError::Runtime(format!(
            "{} does not match the construct set; rerun `gut similarity`",
            sim_path.display()
        )));
    }
    let edges = load_edges(cfg, &constructs, &mut rec)?;
    if edges.is_none() {
        eprintln!("note: no relations file at {}; relation purity is 0", cfg.inputs.relations.display());
    }
    let pool = generate_candidates(&normalize01(&raw), edges.as_deref().unwrap_or(&[]), &cfg.candidates)?;

    let dir = cfg.out.join(PARTITIONS);
    if dir.exists() {
        std::fs::remove_dir_all(&dir).map_err(|e| runtime(&dir, e))?;
    }
    std::fs::create_dir_all(&dir).map_err(|e| runtime(&dir, e))?;
    let mut records = Vec::with_capacity(pool.len());
    for (i, c) in pool.iter().enumerate() {
        let rel = format!("{PARTITIONS}/{i:04}.csv");
        let path = cfg.out.join(&rel);
        write_partition(&c.partition, &constructs, &path)?;
        rec.output(&path)?;
        records.push(CandidateRecord {
            spec: c.spec.clone(),
            k: c.partition.k(),
            losses: c.losses,
            partition: rel,
        });
    }
    let artifact = CandidatePool {
        sources: ArtifactSources {
            constructs: relative_to(&cfg.out, &cfg.inputs.constructs)?,
            similarity: SIMILARITY.into(),
            relations: match edges {
                Some(_) => Some(relative_to(&cfg.out, &cfg.inputs.relations)?),
                None => None,
            },
            significant_only: cfg.significant_only,
        },
        candidates: records,
    };
    let path = cfg.out.join(CANDIDATES);
    write_json(&artifact, &path)?;
    rec.output(&path)?;
    rec.finish()?;
    Ok(())
}

pub fn sweep(cfg: &RunConfig) -> Result<(), CliError> {
    let mut rec = Recorder::new("sweep", cfg.seed, &cfg.out);
    let pool_path = cfg.out.join(CANDIDATES);
    require(&pool_path, "candidates")?;
    rec.input(&pool_path)?;
    let pool: CandidatePool = read_json(&pool_path)?;
    let artifact =
        SweepArtifact::build(pool, cfg.alpha_step).map_err(|e| CliError::Usage(e.to_string()))?;
    let path = cfg.out.join(SWEEP);
    write_json(&artifact, &path)?;
    rec.output(&path)?;
    rec.finish()?;
    Ok(())
}

fn nearest(grid: &[f64], alpha: f64) -> usize {
    let mut best = 0;
    for (i, g) in grid.iter().enumerate() {
        if (g - alpha).abs() < (grid[best] - alpha).abs() {
            best = i;
        }
    }
    best
}

pub fn config_hash(cfg: &RunConfig) -> String {
    let text = serde_json::to_string(cfg).expect("serializable");
    format!("{:x}", Sha256::digest(text.as_bytes()))
}

pub fn evaluate(cfg: &RunConfig) -> Result<(), CliError> {
    if !(0.0..=1.0).contains(&cfg.eval_alpha) {
        return Err(CliError::Usage(format!("alpha {} outside [0, 1]", cfg.eval_alpha)));
    }
    let mut rec = Recorder::new("evaluate", cfg.seed, &cfg.out);
    let corpus = load_corpus(cfg, &mut rec)?;
    let (model_path, split_path, sweep_path) = (cfg.out.join(MODEL), cfg.out.join(SPLIT), cfg.out.join(SWEEP));
    for (path, stage) in [(&model_path, "train"), (&split_path, "train"), (&sweep_path, "sweep")] {
        require(path, stage)?;
        rec.input(path)?;
    }
    let model = read_model(&model_path)?;
    let split: SplitFile = read_json(&split_path)?;
    let test: Vec<usize> = split
        .test
        .iter()
        .map(|id| {
            corpus
                .constructs
                .position(id)
                .ok_or_else(|| CliError::Runtime(format!("{}: unknown construct {id:?}", split_path.display())))
        })
        .collect::<Result<_, _>>()?;
    let test_pairs = pairs_within(&corpus.gold, &test);
    let projected = model.project_all(&corpus.inputs)?;
    let test_auc = roc_auc(&score_pairs(&projected, &test_pairs)?)?;
    let raw_auc = roc_auc(&score_pairs(&corpus.inputs, &test_pairs)?)?;

    let artifact: SweepArtifact = read_json(&sweep_path)?;
    artifact.validate()?;
    let sim_path = sweep_path
        .parent()
        .unwrap_or(Path::new("."))
        .join(&artifact.sources.similarity);
    rec.input(&sim_path)?;
    let s = normalize01(&read_similarity(&sim_path)?);
    let all_pairs = enumerate_pairs(&corpus.gold);
    let scored: Vec<_> = all_pairs
        .iter()
        .map(|&pair| gut_core::metrics::ScoredPair { pair, score: s.get(pair.a, pair.b) })
        .collect();
    let baseline = best_threshold_f1(&scored)?;

    let partition_of = |candidate: usize| -> Result<Partition, CliError> {
        let path: PathBuf = cfg.out.join(&artifact.candidates[candidate].partition);
        Ok(load_gold_partition(&path, &corpus.constructs)?)
    };
    let mut scores: BTreeMap<usize, (f64, f64)> = BTreeMap::new();
    let mut score = |candidate: usize| -> Result<(f64, f64), CliError> {
        if let Some(&v) = scores.get(&candidate) {
            return Ok(v);
        }
        let p = partition_of(candidate)?;
        let v = (ami(&p, &corpus.gold)?, pairwise_f1(&p, &corpus.gold)?.f1);
        scores.insert(candidate, v);
        Ok(v)
    };
    let mut curves = serde_json::Map::new();
    for s in &artifact.sweeps {
        let mut points = Vec::new();
        for sel in &s.selections {
            let (a, f1) = score(sel.candidate)?;
            points.push(json!({
                "alpha": sel.alpha,
                "candidate": sel.candidate,
                "k": artifact.candidates[sel.candidate].k,
                "ami": a,
                "f1": f1,
            }));
        }
        curves.insert(s.purity_kind.to_string(), points.into());
    }

    let sweep = artifact
        .sweep(cfg.eval_purity)
        .ok_or_else(|| CliError::Runtime(format!("no {} sweep in {}", cfg.eval_purity, sweep_path.display())))?;
    let at = nearest(&sweep.alpha_grid, cfg.eval_alpha);
    let selected = sweep.selections[at].candidate;
    let p = partition_of(selected)?;
    let record = &artifact.candidates[selected];

    let mut extra = serde_json::Map::new();
    extra.insert("raw_roc_auc".into(), raw_auc.into());
    extra.insert("alpha".into(), sweep.alpha_grid[at].into());
    extra.insert("purity".into(), cfg.eval_purity.to_string().into());
    extra.insert("candidate".into(), selected.into());
    extra.insert("spec".into(), record.spec.summary().into());
    extra.insert("k".into(), record.k.into());
    extra.insert("gold_k".into(), corpus.gold.k().into());
    extra.insert("test_pairs".into(), test_pairs.len().into());
    extra.insert("seed".into(), cfg.seed.into());
    extra.insert("config_sha256".into(), config_hash(cfg).into());
    extra.insert("curves".into(), curves.into());
    let report = EvaluationReport {
        roc_auc: test_auc,
        ami: ami(&p, &corpus.gold)?,
        pairwise: pairwise_f1(&p, &corpus.gold)?,
        baseline,
        extra,
    };
    let path = cfg.out.join(EVALUATION);
    write_json(&report, &path)?;
    rec.output(&path)?;
    rec.finish()?;
    Ok(())
}

pub fn serve(cfg: &RunConfig) -> Result<(), CliError> {
    let state = gut_server::AppState::load(&cfg.serve.artifact)?;
    let options = gut_server::ServerOptions {
        allow_origin: cfg.serve.allow_origin.clone(),
        ui_dir: cfg.serve.ui_dir.clone(),
    };
    let app = gut_server::router(state, &options).map_err(|e| CliError::Usage(e.to_string()))?;
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .worker_threads(cfg.jobs.unwrap_or(2))
        .enable_all()
        .build()
        .map_err(|e| CliError::Runtime(format!("cannot start runtime: {e}")))?;
    eprintln!("serving {} on http://{}", cfg.serve.artifact.display(), cfg.serve.addr);
    runtime.block_on(gut_server::serve(app, cfg.serve.addr))?;
    Ok(())
}
