//! A small sweep artifact on disk, built with the core library.

#![allow(dead_code)]

use std::path::{Path, PathBuf};

use gut_core::corpus::{write_constructs, write_partition, write_relations};
use gut_core::objective::{
    generate_candidates, resolve_relations, write_json, ArtifactSources, CandidateGrid, CandidatePool,
    CandidateRecord, SweepArtifact,
};
use gut_core::projection::concat_inputs;
use gut_core::simgraph::{normalize01, pairwise_similarities, write_similarity};
use gut_core::synth::{generate, SynthParams};

pub struct Fixture {
    pub dir: tempfile::TempDir,
    pub artifact: PathBuf,
}

/// 30 constructs in 10 tight clusters of 3; candidates range from one
/// cluster to all singletons.
pub fn fixture() -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let corpus = generate(&SynthParams {
        n: 30,
        clusters: 10,
        noise: 0.1,
        distractor_dim: 0,
        relations: Some(60),
        seed: 7,
        ..Default::default()
    })
    .unwrap();
    write_constructs(&corpus.constructs, root.join("constructs.jsonl")).unwrap();
    write_relations(&corpus.relations, root.join("relations.csv")).unwrap();
    let inputs = concat_inputs(&corpus.name, &corpus.definition).unwrap();
    let ids: Vec<String> = corpus.constructs.ids().map(String::from).collect();
    let raw = pairwise_similarities(&ids, &inputs).unwrap();
    write_similarity(&raw, root.join("similarity.bin")).unwrap();

    let s = normalize01(&raw);
    let significant: Vec<_> = corpus.relations.iter().filter(|r| r.significant).cloned().collect();
    let edges = resolve_relations(&significant, &corpus.constructs).unwrap();
    let grid = CandidateGrid {
        taus: vec![0.0],
        agglomerative_k: vec![1, 5, 10, 20, 30],
        agglomerative_distance: vec![],
        spectral_k: vec![],
        leiden_resolution: vec![],
        seed: 0,
    };
    let candidates = generate_candidates(&s, &edges, &grid).unwrap();
    std::fs::create_dir(root.join("partitions")).unwrap();
    let records = candidates
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let rel = format!("partitions/{i:04}.csv");
            write_partition(&c.partition, &corpus.constructs, root.join(&rel)).unwrap();
            CandidateRecord {
                spec: c.spec.clone(),
                k: c.partition.k(),
                losses: c.losses,
                partition: rel,
            }
        })
        .collect();
    let pool = CandidatePool {
        sources: ArtifactSources {
            constructs: "constructs.jsonl".into(),
            similarity: "similarity.bin".into(),
            relations: Some("relations.csv".into()),
            significant_only: true,
        },
        candidates: records,
    };
    let artifact = SweepArtifact::build(pool, 0.05).unwrap();
    let path = root.join("sweep.json");
    write_json(&artifact, &path).unwrap();
    Fixture { dir, artifact: path }
}

pub fn path_in(f: &Fixture, rel: &str) -> PathBuf {
    Path::new(f.dir.path()).join(rel)
}
