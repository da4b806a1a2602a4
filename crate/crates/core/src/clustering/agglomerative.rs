//! Average-linkage (UPGMA) hierarchical clustering.
//!
//! Distances are `1 - s` on normalized similarities, with pairs below the
//! threshold saturated to 1. The closest pair of clusters merges first; ties
//! go to the lexicographically smallest pair of cluster slots, where a
//! cluster's slot is its smallest member position.

use crate::corpus::Partition;
use crate::simgraph::NormalizedSimilarity;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cut {
    /// Stop when this many clusters remain.
    Clusters(usize),
    /// Stop before the first merge whose distance exceeds the cutoff.
    Distance(f64),
}

/// Slots `a < b` merged at average distance `distance`; the result keeps `a`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merge {
    pub a: usize,
    pub b: usize,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dendrogram {
    n: usize,
    merges: Vec<Merge>,
}

impl Dendrogram {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn merges(&self) -> &[Merge] {
        &self.merges
    }

    fn replay(&self, count: usize) -> Partition {
        let mut parent: Vec<usize> = (0..self.n).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for m in &self.merges[..count] {
            let (ra, rb) = (find(&mut parent, m.a), find(&mut parent, m.b));
            parent[rb] = ra;
        }
        let roots: Vec<usize> = (0..self.n).map(|i| find(&mut parent, i)).collect();
        Partition::from_labels(&roots)
    }

    pub fn cut(&self, cut: Cut) -> Result<Partition> {
        match cut {
            Cut::Clusters(k) => {
                if k == 0 || k > self.n.max(1) {
                    return Err(Error::Parameter(format!(
                        "cannot cut {} constructs into {k} clusters",
                        self.n
                    )));
                }
                Ok(self.replay(self.n.saturating_sub(k)))
            }
            Cut::Distance(d) => {
                let count = self.merges.iter().take_while(|m| m.distance <= d).count();
                Ok(self.replay(count))
            }
        }
    }
}

fn condensed(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * n - i * (i + 1) / 2 + (j - i - 1)
}

/// Pairwise distance matrix in condensed form.
fn distances(s: &NormalizedSimilarity, tau: Option<f64>) -> Vec<f64> {
    let n = s.len();
    let mut out = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            let sim = s.get(i, j);
            out.push(match tau {
                Some(t) if sim < t => 1.0,
                _ => 1.0 - sim,
            });
        }
    }
    out
}

/// Full merge sequence for average linkage.
pub fn average_linkage(s: &NormalizedSimilarity, tau: Option<f64>) -> Dendrogram {
    let n = s.len();
    // Sums of cross-cluster distances; averages are sum / (|A| |B|).
    let mut sums = distances(s, tau);
    let mut size = vec![1usize; n];
    let mut active = vec![true; n];
    let avg = |sums: &[f64], size: &[usize], i: usize, j: usize| -> f64 {
        sums[condensed(n, i, j)] / (size[i] * size[j]) as f64
    };
    // best[i]: closest active j > i, ties to the smaller j.
    let row_best = |sums: &[f64], size: &[usize], active: &[bool], i: usize| -> Option<(f64, usize)> {
        let mut best: Option<(f64, usize)> = None;
        for j in i + 1..n {
            if !active[j] {
                continue;
            }
            let d = avg(sums, size, i, j);
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, j));
            }
        }
        best
    };
    let mut best: Vec<Option<(f64, usize)>> = (0..n).map(|i| row_best(&sums, &size, &active, i)).collect();
    let mut merges = Vec::with_capacity(n.saturating_sub(1));

    for _ in 1..n {
        let mut pick: Option<(f64, usize, usize)> = None;
        for i in 0..n {
            if !active[i] {
                continue;
            }
            if let Some((d, j)) = best[i] {
                if pick.is_none_or(|(pd, _, _)| d < pd) {
                    pick = Some((d, i, j));
                }
            }
        }
        let (d, a, b) = pick.expect("at least two active clusters");
        merges.push(Merge { a, b, distance: d });

        active[b] = false;
        best[b] = None;
        for k in 0..n {
            if !active[k] || k == a {
                continue;
            }
            let (ka, kb) = (condensed(n, k.min(a), k.max(a)), condensed(n, k.min(b), k.max(b)));
            sums[ka] += sums[kb];
        }
        size[a] += size[b];
        best[a] = row_best(&sums, &size, &active, a);
        for k in 0..n {
            if !active[k] || k == a {
                continue;
            }
            match best[k] {
                Some((_, j)) if j == a || j == b => best[k] = row_best(&sums, &size, &active, k),
                Some((bd, j)) if k < a => {
                    let d = avg(&sums, &size, k, a);
                    if d < bd || (d == bd && a < j) {
                        best[k] = Some((d, a));
                    }
                }
                None if k < a => best[k] = Some((avg(&sums, &size, k, a), a)),
                _ => {}
            }
        }
    }
    Dendrogram { n, merges }
}

/// Average-linkage clustering cut at `cut`.
pub fn agglomerative(s: &NormalizedSimilarity, tau: Option<f64>, cut: Cut) -> Result<Partition> {
    if let Cut::Clusters(k) = cut {
        if k > s.len() {
            return Err(Error::Parameter(format!(
                "k = {k} exceeds the {} constructs",
                s.len()
            )));
        }
    }
    average_linkage(s, tau).cut(cut)
}
