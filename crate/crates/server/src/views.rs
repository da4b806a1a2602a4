//! Response bodies and the pure functions that build them.

use gut_core::clustering::ClusterSpec;
use gut_core::corpus::Partition;
use gut_core::objective::{binary_entropy, inter_cluster_counts, LossBreakdown, PurityKind, SweepResult};
use serde::Serialize;

use crate::state::AppState;

#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    pub alpha: f64,
    pub candidate: usize,
    pub k: usize,
    pub spec: String,
    pub losses: LossBreakdown,
    pub balanced_loss: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepView {
    pub purity: PurityKind,
    pub alpha_step: f64,
    pub points: Vec<SweepPoint>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Member {
    pub id: String,
    pub name: String,
    pub definition: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClusterView {
    pub id: usize,
    pub size: usize,
    /// Mean normalized similarity over member pairs; absent for singletons.
    pub mean_similarity: Option<f64>,
    pub members: Vec<Member>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RelationEdgeView {
    pub source: usize,
    pub target: usize,
    pub positive: usize,
    pub negative: usize,
    pub entropy: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PartitionView {
    pub alpha: f64,
    pub snapped_alpha: f64,
    pub purity: PurityKind,
    pub candidate: usize,
    pub spec: ClusterSpec,
    pub summary: String,
    pub k: usize,
    pub losses: LossBreakdown,
    pub balanced_loss: f64,
    pub clusters: Vec<ClusterView>,
    pub relations: Vec<RelationEdgeView>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PairSimilarity {
    pub a: String,
    pub b: String,
    pub similarity: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClusterDetail {
    pub snapped_alpha: f64,
    pub purity: PurityKind,
    pub candidate: usize,
    #[serde(flatten)]
    pub cluster: ClusterView,
    /// Every unordered member pair, in member order.
    pub similarities: Vec<PairSimilarity>,
}

/// Index of the grid point nearest to `alpha`; ties go to the smaller point.
pub fn snap(grid: &[f64], alpha: f64) -> usize {
    let mut best = 0;
    for (i, g) in grid.iter().enumerate() {
        if (g - alpha).abs() < (grid[best] - alpha).abs() {
            best = i;
        }
    }
    best
}

pub fn sweep_view(state: &AppState, sweep: &SweepResult) -> SweepView {
    let points = sweep
        .selections
        .iter()
        .map(|sel| {
            let record = &state.artifact.candidates[sel.candidate];
            SweepPoint {
                alpha: sel.alpha,
                candidate: sel.candidate,
                k: record.k,
                spec: record.spec.summary(),
                losses: record.losses,
                balanced_loss: sel.balanced_loss,
            }
        })
        .collect();
    SweepView {
        purity: sweep.purity_kind,
        alpha_step: state.artifact.alpha_step,
        points,
    }
}

pub fn cluster_view(state: &AppState, members: &[usize], id: usize) -> ClusterView {
    let mut sum = 0.0;
    let mut pairs = 0usize;
    for (x, &i) in members.iter().enumerate() {
        for &j in &members[x + 1..] {
            sum += state.similarity.get(i, j);
            pairs += 1;
        }
    }
    ClusterView {
        id,
        size: members.len(),
        mean_similarity: (pairs > 0).then(|| sum / pairs as f64),
        members: members
            .iter()
            .map(|&pos| {
                let c = state.constructs.get(pos).expect("partition covers the set");
                Member {
                    id: c.id.clone(),
                    name: c.name.clone(),
                    definition: c.definition.clone(),
                }
            })
            .collect(),
    }
}

/// Clusters sorted by size (largest first), then id.
pub fn cluster_views(state: &AppState, p: &Partition) -> Vec<ClusterView> {
    let mut views: Vec<ClusterView> = p
        .clusters()
        .iter()
        .enumerate()
        .map(|(id, members)| cluster_view(state, members, id))
        .collect();
    views.sort_by(|a, b| b.size.cmp(&a.size).then(a.id.cmp(&b.id)));
    views
}

pub fn relation_views(state: &AppState, p: &Partition) -> Vec<RelationEdgeView> {
    inter_cluster_counts(p, &state.edges)
        .into_iter()
        .map(|c| RelationEdgeView {
            source: c.source,
            target: c.target,
            positive: c.positive,
            negative: c.negative,
            entropy: binary_entropy(c.positive, c.negative),
        })
        .collect()
}

pub fn cluster_detail(state: &AppState, p: &Partition, id: usize) -> Option<ClusterView> {
    let clusters = p.clusters();
    clusters.get(id).map(|members| cluster_view(state, members, id))
}

pub fn pair_similarities(state: &AppState, p: &Partition, id: usize) -> Vec<PairSimilarity> {
    let members = &p.clusters()[id];
    let mut out = Vec::new();
    for (x, &i) in members.iter().enumerate() {
        for &j in &members[x + 1..] {
            out.push(PairSimilarity {
                a: state.similarity.ids()[i].clone(),
                b: state.similarity.ids()[j].clone(),
                similarity: state.similarity.get(i, j),
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snapping() {
        let grid: Vec<f64> = (0..=20).map(|i| i as f64 / 20.0).collect();
        assert_eq!(grid[snap(&grid, 0.61)], 0.6);
        assert_eq!(grid[snap(&grid, 0.6)], 0.6);
        assert_eq!(grid[snap(&grid, 0.0)], 0.0);
        assert_eq!(grid[snap(&grid, 1.0)], 1.0);
        assert_eq!(grid[snap(&grid, 0.62)], 0.6);
        assert_eq!(grid[snap(&grid, 0.63)], 0.65);
    }
}
