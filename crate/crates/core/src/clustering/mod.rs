//! Candidate partitions from the similarity graph.

mod agglomerative;
mod eigen;
mod kmeans;
mod leiden;
mod spectral;

use serde::{Deserialize, Serialize};

use crate::corpus::Partition;
use crate::simgraph::{threshold_graph, NormalizedSimilarity, WeightedGraph};
use crate::{Error, Result};

pub use agglomerative::{agglomerative, average_linkage, Cut, Dendrogram, Merge};
pub use eigen::symmetric_eigen;
pub use kmeans::kmeans;
pub use leiden::leiden;
pub use spectral::{normalized_laplacian, spectral};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Agglomerative,
    Spectral,
    Leiden,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Agglomerative => "agglomerative",
            Method::Spectral => "spectral",
            Method::Leiden => "leiden",
        })
    }
}

/// One clustering configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSpec {
    pub method: Method,
    /// Normalized similarity threshold applied before clustering.
    pub tau: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    /// Agglomerative merge-distance cutoff, used instead of `k`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution: Option<f64>,
    #[serde(default)]
    pub seed: u64,
}

impl ClusterSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.tau) {
            return Err(Error::Parameter(format!("threshold {} outside [0, 1]", self.tau)));
        }
        match self.method {
            Method::Agglomerative => {
                if self.k.is_some() == self.distance.is_some() {
                    return Err(Error::Parameter(
                        "agglomerative needs exactly one of k or a distance cutoff".into(),
                    ));
                }
            }
            Method::Spectral => {
                if self.k.is_none() {
                    return Err(Error::Parameter("spectral clustering needs k".into()));
                }
            }
            Method::Leiden => match self.resolution {
                Some(r) if r > 0.0 && r.is_finite() => {}
                _ => return Err(Error::Parameter("leiden needs a positive resolution".into())),
            },
        }
        Ok(())
    }

    /// Short human-readable form, e.g. `leiden tau=0.7 resolution=1`.
    pub fn summary(&self) -> String {
        let mut s = format!("{} tau={}", self.method, self.tau);
        if let Some(k) = self.k {
            s.push_str(&format!(" k={k}"));
        }
        if let Some(d) = self.distance {
            s.push_str(&format!(" distance={d}"));
        }
        if let Some(r) = self.resolution {
            s.push_str(&format!(" resolution={r}"));
        }
        s
    }
}

/// Runs one configuration on a normalized similarity matrix.
pub fn run_spec(s: &NormalizedSimilarity, spec: &ClusterSpec) -> Result<Partition> {
    spec.validate()?;
    match spec.method {
        Method::Agglomerative => {
            let cut = match (spec.k, spec.distance) {
                (Some(k), None) => Cut::Clusters(k),
                (None, Some(d)) => Cut::Distance(d),
                _ => unreachable!("validated"),
            };
            agglomerative(s, Some(spec.tau), cut)
        }
        Method::Spectral => spectral(&threshold_graph(s, spec.tau), spec.k.expect("validated"), spec.seed),
        Method::Leiden => Ok(leiden(
            &threshold_graph(s, spec.tau),
            spec.resolution.expect("validated"),
            spec.seed,
        )),
    }
}

/// Weighted modularity with resolution `gamma`; 0 for an edgeless graph.
pub fn modularity(g: &WeightedGraph, p: &Partition, gamma: f64) -> Result<f64> {
    if p.n() != g.node_count() {
        return Err(Error::Parameter(format!(
            "partition covers {} nodes, graph has {}",
            p.n(),
            g.node_count()
        )));
    }
    let m = g.total_weight();
    if m == 0.0 {
        return Ok(0.0);
    }
    let mut internal = vec![0.0; p.k()];
    let mut totals = vec![0.0; p.k()];
    for &(i, j, w) in g.edges() {
        if p.label(i) == p.label(j) {
            internal[p.label(i)] += w;
        }
        totals[p.label(i)] += w;
        totals[p.label(j)] += w;
    }
    let two_m = 2.0 * m;
    Ok(internal
        .iter()
        .zip(&totals)
        .map(|(&w_in, &k_c)| 2.0 * w_in / two_m - gamma * (k_c / two_m).powi(2))
        .sum())
}

/// Splits every cluster into its connected components in `g`.
pub(crate) fn split_disconnected(g: &WeightedGraph, labels: &[usize]) -> Partition {
    let n = labels.len();
    let mut component = vec![usize::MAX; n];
    let mut next = 0;
    let mut stack = Vec::new();
    for start in 0..n {
        if component[start] != usize::MAX {
            continue;
        }
        component[start] = next;
        stack.push(start);
        while let Some(v) = stack.pop() {
            for &(u, _) in g.neighbors(v) {
                if component[u] == usize::MAX && labels[u] == labels[v] {
                    component[u] = next;
                    stack.push(u);
                }
            }
        }
        next += 1;
    }
    Partition::from_labels(&component)
}
