use super::eigen::symmetric_eigen;
use super::kmeans::kmeans;
use crate::corpus::Partition;
use crate::simgraph::WeightedGraph;
use crate::{Error, Result};

const KMEANS_RESTARTS: usize = 10;

/// `I - D^{-1/2} W D^{-1/2}` over the listed nodes, row-major.
///
/// Every listed node must have positive degree.
pub fn normalized_laplacian(g: &WeightedGraph, nodes: &[usize]) -> Vec<f64> {
    let m = nodes.len();
    let mut local = vec![usize::MAX; g.node_count()];
    for (i, &v) in nodes.iter().enumerate() {
        local[v] = i;
    }
    let inv_sqrt: Vec<f64> = nodes.iter().map(|&v| 1.0 / g.strength(v).sqrt()).collect();
    let mut l = vec![0.0; m * m];
    for (i, &v) in nodes.iter().enumerate() {
        l[i * m + i] = 1.0;
        for &(u, w) in g.neighbors(v) {
            let j = local[u];
            if j != usize::MAX {
                l[i * m + j] = -w * inv_sqrt[i] * inv_sqrt[j];
            }
        }
    }
    l
}

/// Normalized spectral clustering.
///
/// Isolated nodes become singletons up front and count toward `k`; the
/// remaining nodes are split into `k - isolated` clusters (at least one).
pub fn spectral(g: &WeightedGraph, k: usize, seed: u64) -> Result<Partition> {
    if k == 0 {
        return Err(Error::Parameter("spectral clustering needs k >= 1".into()));
    }
    let n = g.node_count();
    let (connected, isolated): (Vec<usize>, Vec<usize>) = (0..n).partition(|&v| !g.neighbors(v).is_empty());
    if connected.is_empty() {
        return Ok(Partition::singletons(n));
    }
    let k_rest = k.saturating_sub(isolated.len()).max(1);
    if k_rest > connected.len() {
        return Err(Error::Parameter(format!(
            "k = {k} exceeds the {} non-isolated nodes (plus {} isolated)",
            connected.len(),
            isolated.len()
        )));
    }

    let m = connected.len();
    let (_, vectors) = symmetric_eigen(&normalized_laplacian(g, &connected), m);
    let embedding: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            let row: Vec<f64> = vectors[..k_rest].iter().map(|v| v[i]).collect();
            let len = row.iter().map(|x| x * x).sum::<f64>().sqrt();
            if len > 0.0 {
                row.iter().map(|x| x / len).collect()
            } else {
                row
            }
        })
        .collect();
    let (labels, _) = kmeans(&embedding, k_rest, KMEANS_RESTARTS, seed);

    let mut raw = vec![0usize; n];
    for (&v, &l) in connected.iter().zip(&labels) {
        raw[v] = l;
    }
    for (i, &v) in isolated.iter().enumerate() {
        raw[v] = k_rest + i;
    }
    Ok(Partition::from_labels(&raw))
}
