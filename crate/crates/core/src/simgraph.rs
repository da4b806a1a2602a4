//! Pairwise cosine similarities and the thresholded similarity graph.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::binfmt::{self, SIMILARITY_MAGIC};
use crate::{Error, Result};

/// Dense symmetric cosine matrix with unit diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    ids: Vec<String>,
    values: Vec<f64>,
}

/// Similarities mapped to `[0, 1]` by `(s + 1) / 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedSimilarity {
    ids: Vec<String>,
    values: Vec<f64>,
}

macro_rules! dense_accessors {
    ($t:ty) => {
        impl $t {
            pub fn ids(&self) -> &[String] {
                &self.ids
            }

            pub fn len(&self) -> usize {
                self.ids.len()
            }

            pub fn is_empty(&self) -> bool {
                self.ids.is_empty()
            }

            pub fn get(&self, i: usize, j: usize) -> f64 {
                self.values[i * self.ids.len() + j]
            }

            pub fn row(&self, i: usize) -> &[f64] {
                let n = self.ids.len();
                &self.values[i * n..(i + 1) * n]
            }
        }
    };
}

dense_accessors!(SimilarityMatrix);
dense_accessors!(NormalizedSimilarity);

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Cosine similarity of every pair of rows. Rows are computed in parallel.
pub fn pairwise_similarities(ids: &[String], vectors: &[Vec<f64>]) -> Result<SimilarityMatrix> {
    if ids.len() != vectors.len() {
        return Err(Error::Domain(format!(
            "{} ids for {} vectors",
            ids.len(),
            vectors.len()
        )));
    }
    let n = vectors.len();
    let mut units = Vec::with_capacity(n);
    for (id, v) in ids.iter().zip(vectors) {
        let len = norm(v);
        if len == 0.0 || !len.is_finite() {
            return Err(Error::Domain(format!("vector for {id:?} has zero or non-finite norm")));
        }
        if v.len() != vectors[0].len() {
            return Err(Error::Domain(format!("vector for {id:?} has a different dimension")));
        }
        units.push(v.iter().map(|x| x / len).collect::<Vec<f64>>());
    }
    let mut values = vec![0.0; n * n];
    values.par_chunks_mut(n.max(1)).enumerate().for_each(|(i, row)| {
        for (j, out) in row.iter_mut().enumerate() {
            *out = if i == j {
                1.0
            } else {
                // Same operand order for (i, j) and (j, i) keeps it symmetric.
                let (a, b) = if i < j { (i, j) } else { (j, i) };
                let d: f64 = units[a].iter().zip(&units[b]).map(|(x, y)| x * y).sum();
                d.clamp(-1.0, 1.0)
            };
        }
    });
    Ok(SimilarityMatrix {
        ids: ids.to_vec(),
        values,
    })
}

impl SimilarityMatrix {
    /// Builds from a full matrix, checking symmetry, range and diagonal.
    pub fn from_dense(ids: Vec<String>, values: Vec<f64>) -> Result<Self> {
        let n = ids.len();
        if values.len() != n * n {
            return Err(Error::Domain(format!("{} values for a {n}x{n} matrix", values.len())));
        }
        for i in 0..n {
            if values[i * n + i] != 1.0 {
                return Err(Error::Domain(format!("diagonal entry {i} is not 1")));
            }
            for j in i + 1..n {
                let (a, b) = (values[i * n + j], values[j * n + i]);
                if !(-1.0..=1.0).contains(&a) || (a - b).abs() > 1e-12 {
                    return Err(Error::Domain(format!("entry ({i}, {j}) is out of range or asymmetric")));
                }
            }
        }
        Ok(SimilarityMatrix { ids, values })
    }

    fn from_upper(ids: Vec<String>, upper: &[f64]) -> Result<Self> {
        let n = ids.len();
        let mut values = vec![1.0; n * n];
        let mut k = 0;
        for i in 0..n {
            for j in i + 1..n {
                let v = upper[k];
                if !(-1.0..=1.0).contains(&v) {
                    return Err(Error::Domain(format!("entry ({i}, {j}) = {v} outside [-1, 1]")));
                }
                values[i * n + j] = v;
                values[j * n + i] = v;
                k += 1;
            }
        }
        Ok(SimilarityMatrix { ids, values })
    }
}

pub fn normalize01(s: &SimilarityMatrix) -> NormalizedSimilarity {
    NormalizedSimilarity {
        ids: s.ids.clone(),
        values: s.values.iter().map(|v| (v + 1.0) / 2.0).collect(),
    }
}

impl NormalizedSimilarity {
    /// Wraps values already in `[0, 1]`, e.g. a kernel similarity.
    pub fn from_dense(ids: Vec<String>, values: Vec<f64>) -> Result<Self> {
        let n = ids.len();
        if values.len() != n * n {
            return Err(Error::Domain(format!("{} values for a {n}x{n} matrix", values.len())));
        }
        for i in 0..n {
            for j in i..n {
                let (a, b) = (values[i * n + j], values[j * n + i]);
                if !(0.0..=1.0).contains(&a) || a != b {
                    return Err(Error::Domain(format!("entry ({i}, {j}) is out of [0, 1] or asymmetric")));
                }
            }
        }
        Ok(NormalizedSimilarity { ids, values })
    }

    /// The submatrix over `positions`, in the given order.
    pub fn select(&self, positions: &[usize]) -> NormalizedSimilarity {
        let ids = positions.iter().map(|&p| self.ids[p].clone()).collect();
        let values = positions
            .iter()
            .flat_map(|&i| positions.iter().map(move |&j| (i, j)))
            .map(|(i, j)| self.get(i, j))
            .collect();
        NormalizedSimilarity { ids, values }
    }
}

/// Undirected weighted graph without self-loops.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    n: usize,
    edges: Vec<(usize, usize, f64)>,
    adjacency: Vec<Vec<(usize, f64)>>,
}

impl WeightedGraph {
    /// Builds from `(i, j, w)` edges; rejects self-loops, duplicates and
    /// non-positive weights.
    pub fn from_edges(n: usize, edges: Vec<(usize, usize, f64)>) -> Result<Self> {
        let mut adjacency = vec![Vec::new(); n];
        let mut seen = std::collections::HashSet::new();
        let mut normalized = Vec::with_capacity(edges.len());
        for (i, j, w) in edges {
            if i >= n || j >= n || i == j {
                return Err(Error::Domain(format!("invalid edge ({i}, {j})")));
            }
            if !(w > 0.0) || !w.is_finite() {
                return Err(Error::Domain(format!("edge ({i}, {j}) has weight {w}")));
            }
            let (a, b) = if i < j { (i, j) } else { (j, i) };
            if !seen.insert((a, b)) {
                return Err(Error::Domain(format!("duplicate edge ({a}, {b})")));
            }
            adjacency[a].push((b, w));
            adjacency[b].push((a, w));
            normalized.push((a, b, w));
        }
        for list in &mut adjacency {
            list.sort_by_key(|&(j, _)| j);
        }
        Ok(WeightedGraph {
            n,
            edges: normalized,
            adjacency,
        })
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    /// Neighbors of `i` with edge weights, sorted by neighbor.
    pub fn neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.adjacency[i]
    }

    /// Weighted degree of `i`.
    pub fn strength(&self, i: usize) -> f64 {
        self.adjacency[i].iter().map(|&(_, w)| w).sum()
    }

    pub fn total_weight(&self) -> f64 {
        self.edges.iter().map(|&(_, _, w)| w).sum()
    }
}

/// Keeps pairs with normalized similarity `>= tau` as weighted edges.
///
/// Pairs at normalized similarity 0 (antipodal vectors) never become edges,
/// since edge weights must be positive.
pub fn threshold_graph(s: &NormalizedSimilarity, tau: f64) -> WeightedGraph {
    let n = s.len();
    let mut edges = Vec::new();
    let mut adjacency = vec![Vec::new(); n];
    for i in 0..n {
        for j in i + 1..n {
            let w = s.get(i, j);
            if w >= tau && w > 0.0 {
                edges.push((i, j, w));
                adjacency[i].push((j, w));
                adjacency[j].push((i, w));
            }
        }
    }
    WeightedGraph { n, edges, adjacency }
}

#[derive(Serialize, Deserialize)]
struct SimHeader {
    count: usize,
    ids: Vec<String>,
}

/// GUTSIM1: framed header, then the strict upper triangle of the cosine
/// matrix, row-major, as little-endian f64.
pub fn encode_similarity(s: &SimilarityMatrix) -> Vec<u8> {
    let n = s.len();
    let mut payload = Vec::with_capacity(n * n.saturating_sub(1) / 2 * 8);
    for i in 0..n {
        for j in i + 1..n {
            payload.extend_from_slice(&s.get(i, j).to_le_bytes());
        }
    }
    let header = SimHeader {
        count: n,
        ids: s.ids.clone(),
    };
    binfmt::encode(SIMILARITY_MAGIC, &header, &payload)
}

pub fn decode_similarity(bytes: &[u8]) -> Result<SimilarityMatrix> {
    let (h, payload): (SimHeader, _) = binfmt::decode(SIMILARITY_MAGIC, bytes)?;
    if h.ids.len() != h.count {
        return Err(Error::Header(format!(
            "count is {} but {} ids are listed",
            h.count,
            h.ids.len()
        )));
    }
    binfmt::expect_payload(payload, h.count * h.count.saturating_sub(1) / 2 * 8)?;
    SimilarityMatrix::from_upper(h.ids, &binfmt::f64_le(payload))
}

pub fn write_similarity(s: &SimilarityMatrix, path: impl AsRef<Path>) -> Result<()> {
    binfmt::write_file(path.as_ref(), &encode_similarity(s))
}

pub fn read_similarity(path: impl AsRef<Path>) -> Result<SimilarityMatrix> {
    let path = path.as_ref();
    decode_similarity(&binfmt::read_file(path)?).map_err(|e| e.context(path.display().to_string()))
}
