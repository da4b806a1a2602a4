//! Independent reference implementations used as test oracles. They favour
//! directness over speed and share no code with the library beyond types.

#![allow(dead_code)]

use std::collections::{BTreeMap, VecDeque};

use gut_core::corpus::Partition;
use gut_core::metrics::ScoredPair;
use gut_core::objective::{LossBreakdown, PurityKind};
use gut_core::simgraph::{NormalizedSimilarity, WeightedGraph};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn ids(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("c{i}")).collect()
}

/// Symmetric matrix with unit diagonal from an upper-triangle generator.
pub fn similarity(n: usize, mut value: impl FnMut(usize, usize) -> f64) -> NormalizedSimilarity {
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        values[i * n + i] = 1.0;
        for j in i + 1..n {
            let v = value(i, j);
            values[i * n + j] = v;
            values[j * n + i] = v;
        }
    }
    NormalizedSimilarity::from_dense(ids(n), values).unwrap()
}

pub fn random_labels(rng: &mut impl Rng, n: usize, max_k: usize) -> Vec<usize> {
    let k = rng.random_range(1..=max_k.max(1));
    (0..n).map(|_| rng.random_range(0..k)).collect()
}

/// Canonical labels: clusters numbered by first appearance.
pub fn canonical(labels: &[usize]) -> Vec<usize> {
    let mut map = BTreeMap::new();
    labels
        .iter()
        .map(|l| {
            let next = map.len();
            *map.entry(*l).or_insert(next)
        })
        .collect()
}

/// Average linkage recomputed from scratch after every merge.
///
/// Returns the cluster assignment after each merge count `0..n`; ties go to
/// the pair of clusters with the lexicographically smallest minimum members.
pub fn brute_average_linkage(s: &NormalizedSimilarity, tau: Option<f64>) -> Vec<Vec<usize>> {
    let n = s.len();
    let dist = |i: usize, j: usize| {
        let v = s.get(i, j);
        match tau {
            Some(t) if v < t => 1.0,
            _ => 1.0 - v,
        }
    };
    let mut clusters: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let snapshot = |clusters: &Vec<Vec<usize>>| {
        let mut labels = vec![0; n];
        for (c, members) in clusters.iter().enumerate() {
            for &m in members {
                labels[m] = c;
            }
        }
        canonical(&labels)
    };
    let mut out = vec![snapshot(&clusters)];
    while clusters.len() > 1 {
        clusters.sort_by_key(|c| *c.iter().min().unwrap());
        let mut best: Option<(f64, usize, usize)> = None;
        for a in 0..clusters.len() {
            for b in a + 1..clusters.len() {
                let mut sum = 0.0;
                for &x in &clusters[a] {
                    for &y in &clusters[b] {
                        sum += dist(x.min(y), x.max(y));
                    }
                }
                let avg = sum / (clusters[a].len() * clusters[b].len()) as f64;
                if best.is_none_or(|(d, _, _)| avg < d) {
                    best = Some((avg, a, b));
                }
            }
        }
        let (_, a, b) = best.unwrap();
        let moved = clusters.remove(b);
        clusters[a].extend(moved);
        out.push(snapshot(&clusters));
    }
    out
}

fn factorial(n: usize) -> u128 {
    (1..=n as u128).product()
}

/// AMI (arithmetic normalizer) with E[MI] from exact integer factorials.
pub fn exact_ami(a: &[usize], b: &[usize]) -> f64 {
    let n = a.len();
    if canonical(a) == canonical(b) {
        return 1.0;
    }
    let count = |labels: &[usize]| {
        let mut m = BTreeMap::new();
        for &l in labels {
            *m.entry(l).or_insert(0usize) += 1;
        }
        m
    };
    let (rows, cols) = (count(a), count(b));
    let mut cells = BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *cells.entry((x, y)).or_insert(0usize) += 1;
    }
    let nf = n as f64;
    let h = |m: &BTreeMap<usize, usize>| -> f64 {
        m.values().map(|&c| -(c as f64 / nf) * (c as f64 / nf).ln()).sum()
    };
    let (ha, hb) = (h(&rows), h(&cols));
    if ha == 0.0 && hb == 0.0 {
        return 1.0;
    }
    let mi: f64 = cells
        .iter()
        .map(|(&(x, y), &c)| {
            let c = c as f64;
            c / nf * (nf * c / (rows[&x] as f64 * cols[&y] as f64)).ln()
        })
        .sum();
    let mut emi = 0.0;
    for &ai in rows.values() {
        for &bj in cols.values() {
            let lo = (ai + bj).saturating_sub(n).max(1);
            for nij in lo..=ai.min(bj) {
                let num = factorial(ai) * factorial(bj) * factorial(n - ai) * factorial(n - bj);
                let den = factorial(n)
                    * factorial(nij)
                    * factorial(ai - nij)
                    * factorial(bj - nij)
                    * factorial(n + nij - ai - bj);
                let p = num as f64 / den as f64;
                emi += p * nij as f64 / nf * (nf * nij as f64 / (ai as f64 * bj as f64)).ln();
            }
        }
    }
    let denominator = 0.5 * (ha + hb) - emi;
    if denominator == 0.0 {
        return if mi - emi == 0.0 { 0.0 } else { 1.0 };
    }
    (mi - emi) / denominator
}

/// Mann-Whitney statistic by comparing every positive with every negative.
pub fn quadratic_auc(pairs: &[ScoredPair]) -> f64 {
    let pos: Vec<f64> = pairs.iter().filter(|p| p.pair.label.is_similar()).map(|p| p.score).collect();
    let neg: Vec<f64> = pairs.iter().filter(|p| !p.pair.label.is_similar()).map(|p| p.score).collect();
    let mut doubled: u64 = 0;
    for &x in &pos {
        for &y in &neg {
            if x > y {
                doubled += 2;
            } else if x == y {
                doubled += 1;
            }
        }
    }
    doubled as f64 / (2.0 * pos.len() as f64 * neg.len() as f64)
}

/// Tries every distinct score as a threshold; ties go to the larger one.
pub fn exhaustive_threshold_f1(pairs: &[ScoredPair]) -> (f64, f64) {
    let mut taus: Vec<f64> = pairs.iter().map(|p| p.score).collect();
    taus.sort_by(f64::total_cmp);
    taus.dedup();
    let mut best = (f64::NAN, -1.0);
    for &tau in &taus {
        let (mut tp, mut fp, mut fn_) = (0u64, 0u64, 0u64);
        for p in pairs {
            match (p.score >= tau, p.pair.label.is_similar()) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                _ => {}
            }
        }
        let f1 = 2.0 * tp as f64 / (2 * tp + fp + fn_) as f64;
        if f1 >= best.1 {
            best = (tau, f1);
        }
    }
    best
}

/// Every community induces a connected subgraph.
pub fn communities_connected(g: &WeightedGraph, p: &Partition) -> bool {
    for members in p.clusters() {
        let label = p.label(members[0]);
        let mut seen = vec![false; g.node_count()];
        let mut queue = VecDeque::from([members[0]]);
        seen[members[0]] = true;
        let mut reached = 1;
        while let Some(v) = queue.pop_front() {
            for &(u, _) in g.neighbors(v) {
                if !seen[u] && p.label(u) == label {
                    seen[u] = true;
                    reached += 1;
                    queue.push_back(u);
                }
            }
        }
        if reached != members.len() {
            return false;
        }
    }
    true
}

/// Modularity straight from the definition over all node pairs.
pub fn direct_modularity(g: &WeightedGraph, p: &Partition, gamma: f64) -> f64 {
    let n = g.node_count();
    let m = g.total_weight();
    if m == 0.0 {
        return 0.0;
    }
    let mut adj = vec![0.0; n * n];
    for &(i, j, w) in g.edges() {
        adj[i * n + j] = w;
        adj[j * n + i] = w;
    }
    let k: Vec<f64> = (0..n).map(|i| (0..n).map(|j| adj[i * n + j]).sum()).collect();
    let mut q = 0.0;
    for i in 0..n {
        for j in 0..n {
            if p.label(i) == p.label(j) {
                q += adj[i * n + j] - gamma * k[i] * k[j] / (2.0 * m);
            }
        }
    }
    q / (2.0 * m)
}

/// Exhaustive argmin of the balanced loss with the documented tie rules.
pub fn exhaustive_select(pool: &[(LossBreakdown, usize)], alpha: f64, kind: PurityKind) -> usize {
    let loss = |l: &LossBreakdown| {
        let purity = match kind {
            PurityKind::Construct => l.construct_purity,
            PurityKind::Relation => l.relation_purity,
        };
        (1.0 - alpha) * l.parsimony + alpha * purity
    };
    let min = pool.iter().map(|(l, _)| loss(l)).fold(f64::INFINITY, f64::min);
    let mut best = usize::MAX;
    for (i, (l, k)) in pool.iter().enumerate() {
        if loss(l) - min <= 1e-12 && (best == usize::MAX || *k < pool[best].1) {
            best = i;
        }
    }
    best
}

/// Random weighted graph with planted groups, noise edges and a few
/// isolated nodes.
pub fn random_graph(rng: &mut impl Rng, n: usize) -> WeightedGraph {
    let groups = rng.random_range(1..=(n / 3).max(1));
    let group: Vec<usize> = (0..n).map(|_| rng.random_range(0..groups)).collect();
    let isolated: Vec<bool> = (0..n).map(|_| rng.random::<f64>() < 0.05).collect();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if isolated[i] || isolated[j] {
                continue;
            }
            let p = if group[i] == group[j] { 0.5 } else { 0.05 };
            if rng.random::<f64>() < p {
                edges.push((i, j, rng.random_range(0.05..1.0)));
            }
        }
    }
    WeightedGraph::from_edges(n, edges).unwrap()
}
