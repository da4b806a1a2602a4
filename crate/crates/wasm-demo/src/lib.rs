//! Browser playground: a small synthetic corpus in two dimensions, clustered
//! over a candidate grid, with the parsimony/purity selection exposed per
//! alpha, plus the contrastive loss profile.
//!
//! Everything runs natively as well; the `wasm_bindgen` wrappers only convert
//! errors.

use gut_core::corpus::PairLabel;
use gut_core::objective::{
    alpha_grid, generate_candidates, resolve_relations, select, Candidate, CandidateGrid, LossBreakdown,
    PurityKind,
};
use gut_core::projection::contrastive_loss;
use gut_core::simgraph::{normalize01, pairwise_similarities};
use gut_core::synth::{generate, SynthParams};
use wasm_bindgen::prelude::*;

pub const MAX_POINTS: usize = 400;
pub const ALPHA_STEP: f64 = 0.05;

#[wasm_bindgen]
pub struct Playground {
    points: Vec<f64>,
    gold: Vec<u32>,
    candidates: Vec<Candidate>,
}

fn parse_purity(purity: &str) -> Result<PurityKind, String> {
    purity.parse().map_err(|e: gut_core::Error| e.to_string())
}

impl Playground {
    /// `n` points around `clusters` directions in the plane. Similarity is
    /// the cosine between points, so clusters are angular sectors.
    pub fn build(n: usize, clusters: usize, noise: f64, seed: u64) -> Result<Playground, String> {
        if !(2..=MAX_POINTS).contains(&n) {
            return Err(format!("n must be in 2..={MAX_POINTS}"));
        }
        let corpus = generate(&SynthParams {
            n,
            clusters,
            dim: 2,
            noise,
            distractor_dim: 0,
            relations: Some(n),
            seed,
        })
        .map_err(|e| e.to_string())?;
        let vectors: Vec<Vec<f64>> = (0..n)
            .map(|i| corpus.name.row(i).iter().map(|&x| x as f64).collect())
            .collect();
        let ids: Vec<String> = corpus.constructs.ids().map(String::from).collect();
        let s = normalize01(&pairwise_similarities(&ids, &vectors).map_err(|e| e.to_string())?);
        let edges = resolve_relations(&corpus.relations, &corpus.constructs).map_err(|e| e.to_string())?;
        let grid = CandidateGrid {
            taus: vec![0.0, 0.9],
            agglomerative_k: (1..=n.min(3 * clusters)).collect(),
            agglomerative_distance: vec![],
            spectral_k: vec![],
            leiden_resolution: vec![0.5, 1.0, 2.0, 4.0, 8.0],
            seed,
        };
        let candidates = generate_candidates(&s, &edges, &grid).map_err(|e| e.to_string())?;
        Ok(Playground {
            points: vectors.into_iter().flatten().collect(),
            gold: corpus.gold.labels().iter().map(|&l| l as u32).collect(),
            candidates,
        })
    }

    pub fn selection(&self, alpha: f64, purity: PurityKind) -> usize {
        let pool: Vec<(LossBreakdown, usize)> =
            self.candidates.iter().map(|c| (c.losses, c.partition.k())).collect();
        select(&pool, alpha, purity).expect("non-empty pool").0
    }
}

#[wasm_bindgen]
impl Playground {
    #[wasm_bindgen(constructor)]
    pub fn new(n: usize, clusters: usize, noise: f64, seed: u64) -> Result<Playground, JsError> {
        Playground::build(n, clusters, noise, seed).map_err(|e| JsError::new(&e))
    }

    /// Point coordinates as `x0, y0, x1, y1, ...`.
    pub fn points(&self) -> Vec<f64> {
        self.points.clone()
    }

    pub fn gold(&self) -> Vec<u32> {
        self.gold.clone()
    }

    pub fn candidate_count(&self) -> usize {
        self.candidates.len()
    }

    /// Index of the candidate selected at `alpha`.
    pub fn select(&self, alpha: f64, purity: &str) -> Result<usize, JsError> {
        let kind = parse_purity(purity).map_err(|e| JsError::new(&e))?;
        Ok(self.selection(alpha, kind))
    }

    pub fn labels(&self, candidate: usize) -> Vec<u32> {
        self.candidates[candidate]
            .partition
            .labels()
            .iter()
            .map(|&l| l as u32)
            .collect()
    }

    pub fn k(&self, candidate: usize) -> usize {
        self.candidates[candidate].partition.k()
    }

    pub fn summary(&self, candidate: usize) -> String {
        self.candidates[candidate].spec.summary()
    }

    /// `parsimony, construct purity, relation purity` of one candidate.
    pub fn losses(&self, candidate: usize) -> Vec<f64> {
        let l = self.candidates[candidate].losses;
        vec![l.parsimony, l.construct_purity, l.relation_purity]
    }

    /// Per grid alpha: `alpha, candidate, parsimony, purity, k`.
    pub fn sweep(&self, purity: &str) -> Result<Vec<f64>, JsError> {
        let kind = parse_purity(purity).map_err(|e| JsError::new(&e))?;
        Ok(sweep_rows(self, kind))
    }
}

pub fn sweep_rows(p: &Playground, kind: PurityKind) -> Vec<f64> {
    let grid = alpha_grid(ALPHA_STEP).expect("valid step");
    let mut out = Vec::with_capacity(grid.len() * 5);
    for alpha in grid {
        let i = p.selection(alpha, kind);
        let c = &p.candidates[i];
        out.extend([alpha, i as f64, c.losses.parsimony, c.losses.purity(kind), c.partition.k() as f64]);
    }
    out
}

/// Contrastive loss of a pair at cosine `c` for `samples` evenly spaced
/// values of `c` in [-1, 1]: rows of `cos, similar loss, dissimilar loss`.
#[wasm_bindgen]
pub fn contrastive_loss_profile(margin: f64, samples: usize) -> Vec<f64> {
    let samples = samples.max(2);
    let mut out = Vec::with_capacity(samples * 3);
    for i in 0..samples {
        let c = -1.0 + 2.0 * i as f64 / (samples - 1) as f64;
        let x1 = [1.0, 0.0];
        let x2 = [c, (1.0 - c * c).max(0.0).sqrt()];
        let pos = contrastive_loss(&x1, &x2, PairLabel::Similar, margin).expect("unit vectors");
        let neg = contrastive_loss(&x1, &x2, PairLabel::Dissimilar, margin).expect("unit vectors");
        out.extend([c, pos, neg]);
    }
    out
}
