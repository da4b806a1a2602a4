//! Parsimony and purity losses, the candidate pool and the alpha sweep.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::{average_linkage, run_spec, ClusterSpec, Cut, Dendrogram, Method};
use crate::corpus::{ConstructSet, Partition, Relation};
use crate::simgraph::NormalizedSimilarity;
use crate::{Error, Result};

/// Selection ties: balanced losses this close count as equal.
pub const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub parsimony: f64,
    pub construct_purity: f64,
    pub relation_purity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PurityKind {
    Construct,
    Relation,
}

impl PurityKind {
    pub const ALL: [PurityKind; 2] = [PurityKind::Construct, PurityKind::Relation];
}

impl std::fmt::Display for PurityKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PurityKind::Construct => "construct",
            PurityKind::Relation => "relation",
        })
    }
}

impl std::str::FromStr for PurityKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "construct" => Ok(PurityKind::Construct),
            "relation" => Ok(PurityKind::Relation),
            other => Err(Error::Parameter(format!(
                "unknown purity kind {other:?} (expected construct or relation)"
            ))),
        }
    }
}

impl LossBreakdown {
    pub fn purity(&self, kind: PurityKind) -> f64 {
        match kind {
            PurityKind::Construct => self.construct_purity,
            PurityKind::Relation => self.relation_purity,
        }
    }
}

/// `k / n`.
pub fn parsimony_loss(p: &Partition) -> f64 {
    if p.n() == 0 {
        return 0.0;
    }
    p.k() as f64 / p.n() as f64
}

/// One minus the size-weighted mean within-cluster similarity. Singleton
/// clusters contribute nothing; all singletons gives 0.
pub fn construct_purity_loss(p: &Partition, s: &NormalizedSimilarity) -> Result<f64> {
    if p.n() != s.len() {
        return Err(Error::Parameter(format!(
            "partition covers {} constructs, similarity matrix {}",
            p.n(),
            s.len()
        )));
    }
    let n = p.n() as f64;
    let mut weighted = 0.0;
    let mut any = false;
    for members in p.clusters() {
        if members.len() < 2 {
            continue;
        }
        any = true;
        let mut sum = 0.0;
        for (x, &i) in members.iter().enumerate() {
            for &j in &members[x + 1..] {
                sum += s.get(i, j);
            }
        }
        let pairs = (members.len() * (members.len() - 1) / 2) as f64;
        weighted += members.len() as f64 / n * (sum / pairs);
    }
    Ok(if any { 1.0 - weighted } else { 0.0 })
}

/// A relation resolved to construct positions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SignedEdge {
    pub source: usize,
    pub target: usize,
    pub positive: bool,
}

pub fn resolve_relations(relations: &[Relation], set: &ConstructSet) -> Result<Vec<SignedEdge>> {
    relations
        .iter()
        .enumerate()
        .map(|(row, r)| {
            let pos = |id: &str| {
                set.position(id).ok_or_else(|| Error::UnknownId {
                    id: id.to_string(),
                    row: row + 1,
                })
            };
            Ok(SignedEdge {
                source: pos(&r.source_id)?,
                target: pos(&r.target_id)?,
                positive: r.is_positive(),
            })
        })
        .collect()
}

/// Binary entropy (base 2) of a positive/negative split.
pub fn binary_entropy(positive: usize, negative: usize) -> f64 {
    let total = (positive + negative) as f64;
    [positive, negative]
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total;
            -p * p.log2()
        })
        .sum()
}

/// Signed relation counts from one cluster to another.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterPairCounts {
    pub source: usize,
    pub target: usize,
    pub positive: usize,
    pub negative: usize,
}

/// Inter-cluster relation counts per ordered cluster pair, sorted by pair.
pub fn inter_cluster_counts(p: &Partition, edges: &[SignedEdge]) -> Vec<ClusterPairCounts> {
    let mut counts: BTreeMap<(usize, usize), (usize, usize)> = BTreeMap::new();
    for e in edges {
        let (a, b) = (p.label(e.source), p.label(e.target));
        if a == b {
            continue;
        }
        let entry = counts.entry((a, b)).or_default();
        if e.positive {
            entry.0 += 1;
        } else {
            entry.1 += 1;
        }
    }
    counts
        .into_iter()
        .map(|((source, target), (positive, negative))| ClusterPairCounts {
            source,
            target,
            positive,
            negative,
        })
        .collect()
}

/// Relation-weighted entropy of signs between distinct clusters. A single
/// cluster gives 1; no inter-cluster relations with `k > 1` gives 0.
pub fn relation_purity_loss(p: &Partition, edges: &[SignedEdge]) -> f64 {
    if p.k() <= 1 {
        return 1.0;
    }
    let counts = inter_cluster_counts(p, edges);
    let total: usize = counts.iter().map(|c| c.positive + c.negative).sum();
    if total == 0 {
        return 0.0;
    }
    counts
        .iter()
        .map(|c| (c.positive + c.negative) as f64 / total as f64 * binary_entropy(c.positive, c.negative))
        .sum()
}

pub fn loss_breakdown(p: &Partition, s: &NormalizedSimilarity, edges: &[SignedEdge]) -> Result<LossBreakdown> {
    Ok(LossBreakdown {
        parsimony: parsimony_loss(p),
        construct_purity: construct_purity_loss(p, s)?,
        relation_purity: relation_purity_loss(p, edges),
    })
}

/// `(1 - alpha) * parsimony + alpha * purity`.
pub fn balanced_loss(alpha: f64, losses: &LossBreakdown, kind: PurityKind) -> f64 {
    (1.0 - alpha) * losses.parsimony + alpha * losses.purity(kind)
}

/// Hyperparameter lists per method. Every threshold is combined with every
/// value of every method that has one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CandidateGrid {
    pub taus: Vec<f64>,
    #[serde(default)]
    pub agglomerative_k: Vec<usize>,
    #[serde(default)]
    pub agglomerative_distance: Vec<f64>,
    #[serde(default)]
    pub spectral_k: Vec<usize>,
    #[serde(default)]
    pub leiden_resolution: Vec<f64>,
    #[serde(default)]
    pub seed: u64,
}

impl CandidateGrid {
    pub fn cells(&self) -> Vec<ClusterSpec> {
        let base = |method, tau| ClusterSpec {
            method,
            tau,
            k: None,
            distance: None,
            resolution: None,
            seed: self.seed,
        };
        let mut cells = Vec::new();
        for &tau in &self.taus {
            for &k in &self.agglomerative_k {
                cells.push(ClusterSpec { k: Some(k), ..base(Method::Agglomerative, tau) });
            }
            for &d in &self.agglomerative_distance {
                cells.push(ClusterSpec { distance: Some(d), ..base(Method::Agglomerative, tau) });
            }
            for &k in &self.spectral_k {
                cells.push(ClusterSpec { k: Some(k), ..base(Method::Spectral, tau) });
            }
            for &r in &self.leiden_resolution {
                cells.push(ClusterSpec { resolution: Some(r), ..base(Method::Leiden, tau) });
            }
        }
        cells
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub spec: ClusterSpec,
    pub partition: Partition,
    pub losses: LossBreakdown,
}

/// One candidate per grid cell, deduplicated by partition (first spec kept).
pub fn generate_candidates(
    s: &NormalizedSimilarity,
    edges: &[SignedEdge],
    grid: &CandidateGrid,
) -> Result<Vec<Candidate>> {
    let cells = grid.cells();
    if cells.is_empty() {
        return Err(Error::Parameter("candidate grid has no cells".into()));
    }
    for spec in &cells {
        spec.validate().map_err(|e| e.context(spec.summary()))?;
    }

    // Agglomerative cuts at one threshold share a dendrogram.
    let mut agglo_taus: Vec<f64> = cells
        .iter()
        .filter(|c| c.method == Method::Agglomerative)
        .map(|c| c.tau)
        .collect();
    agglo_taus.sort_by(f64::total_cmp);
    agglo_taus.dedup();
    let dendrograms: HashMap<u64, Dendrogram> = agglo_taus
        .par_iter()
        .map(|&tau| (tau.to_bits(), average_linkage(s, Some(tau))))
        .collect();

    let partitions: Vec<Partition> = cells
        .par_iter()
        .map(|spec| {
            let result = match spec.method {
                Method::Agglomerative => {
                    let cut = match (spec.k, spec.distance) {
                        (Some(k), _) => Cut::Clusters(k),
                        (_, Some(d)) => Cut::Distance(d),
                        _ => unreachable!("validated"),
                    };
                    dendrograms[&spec.tau.to_bits()].cut(cut)
                }
                _ => run_spec(s, spec),
            };
            result.map_err(|e| e.context(spec.summary()))
        })
        .collect::<Result<_>>()?;

    let mut seen = HashSet::new();
    let survivors: Vec<(ClusterSpec, Partition)> = cells
        .into_iter()
        .zip(partitions)
        .filter(|(_, p)| seen.insert(p.labels().to_vec()))
        .collect();

    survivors
        .into_par_iter()
        .map(|(spec, partition)| {
            let losses = loss_breakdown(&partition, s, edges)?;
            Ok(Candidate { spec, partition, losses })
        })
        .collect()
}

/// `{0, step, 2 step, ..., 1}`. When `step` divides 1 the points are exact
/// fractions `i / steps`; otherwise 1 is appended after the last multiple.
pub fn alpha_grid(step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(Error::Parameter(format!("alpha step {step} outside (0, 1]")));
    }
    let ratio = 1.0 / step;
    let steps = ratio.round();
    if (ratio - steps).abs() < 1e-9 {
        let steps = steps as usize;
        return Ok((0..=steps).map(|i| i as f64 / steps as f64).collect());
    }
    let mut grid: Vec<f64> = (0..=ratio.floor() as usize).map(|i| i as f64 * step).collect();
    grid.push(1.0);
    Ok(grid)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub alpha: f64,
    pub candidate: usize,
    pub balanced_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub purity_kind: PurityKind,
    pub alpha_grid: Vec<f64>,
    pub selections: Vec<Selection>,
}

/// Index minimizing the balanced loss at `alpha`; near-ties go to fewer
/// clusters, then the earlier index.
pub fn select(pool: &[(LossBreakdown, usize)], alpha: f64, kind: PurityKind) -> Option<(usize, f64)> {
    let losses: Vec<f64> = pool.iter().map(|(l, _)| balanced_loss(alpha, l, kind)).collect();
    let min = losses.iter().copied().fold(f64::INFINITY, f64::min);
    (0..pool.len())
        .filter(|&i| losses[i] - min <= TIE_TOLERANCE)
        .min_by_key(|&i| (pool[i].1, i))
        .map(|i| (i, losses[i]))
}

/// Sweep over `(losses, k)` pairs in pool order.
pub fn sweep_losses(pool: &[(LossBreakdown, usize)], alpha_step: f64, kind: PurityKind) -> Result<SweepResult> {
    if pool.is_empty() {
        return Err(Error::Parameter("candidate pool is empty".into()));
    }
    let grid = alpha_grid(alpha_step)?;
    let selections = grid
        .iter()
        .map(|&alpha| {
            let (candidate, balanced_loss) = select(pool, alpha, kind).expect("non-empty pool");
            Selection { alpha, candidate, balanced_loss }
        })
        .collect();
    Ok(SweepResult {
        purity_kind: kind,
        alpha_grid: grid,
        selections,
    })
}

pub fn sweep(pool: &[Candidate], alpha_step: f64, kind: PurityKind) -> Result<SweepResult> {
    let summary: Vec<(LossBreakdown, usize)> = pool.iter().map(|c| (c.losses, c.partition.k())).collect();
    sweep_losses(&summary, alpha_step, kind)
}

/// Inputs an artifact was computed from, as paths relative to the artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactSources {
    pub constructs: String,
    pub similarity: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relations: Option<String>,
    #[serde(default = "default_significant_only")]
    pub significant_only: bool,
}

fn default_significant_only() -> bool {
    true
}

/// A pool entry as persisted: losses plus the partition CSV path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub spec: ClusterSpec,
    pub k: usize,
    pub losses: LossBreakdown,
    pub partition: String,
}

/// The candidate pool artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidatePool {
    pub sources: ArtifactSources,
    pub candidates: Vec<CandidateRecord>,
}

/// The sweep artifact: the pool plus one sweep per purity kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepArtifact {
    pub alpha_step: f64,
    pub sources: ArtifactSources,
    pub candidates: Vec<CandidateRecord>,
    pub sweeps: Vec<SweepResult>,
}

impl SweepArtifact {
    pub fn build(pool: CandidatePool, alpha_step: f64) -> Result<Self> {
        let summary: Vec<(LossBreakdown, usize)> = pool.candidates.iter().map(|c| (c.losses, c.k)).collect();
        let sweeps = PurityKind::ALL
            .iter()
            .map(|&kind| sweep_losses(&summary, alpha_step, kind))
            .collect::<Result<_>>()?;
        Ok(SweepArtifact {
            alpha_step,
            sources: pool.sources,
            candidates: pool.candidates,
            sweeps,
        })
    }

    pub fn sweep(&self, kind: PurityKind) -> Option<&SweepResult> {
        self.sweeps.iter().find(|s| s.purity_kind == kind)
    }

    /// Structural checks: selections reference real candidates and the
    /// alpha grid is strictly increasing within [0, 1].
    pub fn validate(&self) -> Result<()> {
        if self.candidates.is_empty() {
            return Err(Error::Domain("sweep artifact has no candidates".into()));
        }
        for kind in PurityKind::ALL {
            let s = self
                .sweep(kind)
                .ok_or_else(|| Error::Domain(format!("sweep artifact lacks the {kind} sweep")))?;
            if s.alpha_grid.len() != s.selections.len() {
                return Err(Error::Domain(format!("{kind} sweep: grid and selections differ in length")));
            }
            if s.alpha_grid.windows(2).any(|w| w[0] >= w[1])
                || s.alpha_grid.iter().any(|a| !(0.0..=1.0).contains(a))
            {
                return Err(Error::Domain(format!("{kind} sweep: alpha grid not increasing in [0, 1]")));
            }
            for (sel, &alpha) in s.selections.iter().zip(&s.alpha_grid) {
                if sel.candidate >= self.candidates.len() || sel.alpha != alpha {
                    return Err(Error::Domain(format!(
                        "{kind} sweep: bad selection at alpha {alpha}"
                    )));
                }
            }
        }
        Ok(())
    }
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        line: e.line(),
        message: format!("{}: {e}", path.display()),
    })
}

pub fn write_json<T: Serialize>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
