//! Leiden community detection maximizing modularity with a resolution
//! parameter: fast local moving, refinement, aggregation.
//!
//! Move gains are in edge-weight units, `w(v, C) - gamma k_v K_C / 2m`,
//! which is modularity scaled by `m`.

use std::collections::{BTreeMap, VecDeque};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::split_disconnected;
use crate::corpus::Partition;
use crate::simgraph::WeightedGraph;

/// Refinement temperature.
const THETA: f64 = 0.01;
const MAX_LEVELS: usize = 100;
const MAX_ITERATIONS: usize = 10;

struct Level {
    adj: Vec<Vec<(usize, f64)>>,
    strength: Vec<f64>,
}

impl Level {
    fn from_graph(g: &WeightedGraph) -> Self {
        let n = g.node_count();
        Level {
            adj: (0..n).map(|v| g.neighbors(v).to_vec()).collect(),
            strength: (0..n).map(|v| g.strength(v)).collect(),
        }
    }

    fn n(&self) -> usize {
        self.strength.len()
    }

    /// Collapses each group into one node. Internal edges are dropped; node
    /// strengths keep them, so modularity is preserved.
    fn aggregate(&self, groups: &[usize], count: usize) -> Level {
        let mut strength = vec![0.0; count];
        let mut maps: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); count];
        for v in 0..self.n() {
            let a = groups[v];
            strength[a] += self.strength[v];
            for &(u, w) in &self.adj[v] {
                let b = groups[u];
                if a != b {
                    *maps[a].entry(b).or_insert(0.0) += w;
                }
            }
        }
        Level {
            adj: maps.into_iter().map(|m| m.into_iter().collect()).collect(),
            strength,
        }
    }
}

struct Quality {
    gamma: f64,
    two_m: f64,
}

impl Quality {
    fn gain(&self, w_to: f64, k_v: f64, total: f64) -> f64 {
        w_to - self.gamma * k_v * total / self.two_m
    }
}

/// Dense relabeling by first appearance; returns the label count.
fn densify(labels: &mut [usize]) -> usize {
    let mut map = vec![usize::MAX; labels.len().max(labels.iter().copied().max().map_or(0, |m| m + 1))];
    let mut next = 0;
    for l in labels.iter_mut() {
        if map[*l] == usize::MAX {
            map[*l] = next;
            next += 1;
        }
        *l = map[*l];
    }
    next
}

/// Queue-based local moving. Only strictly improving moves are taken.
fn move_nodes(level: &Level, q: &Quality, comm: &mut [usize], rng: &mut impl Rng) -> bool {
    let n = level.n();
    let mut total = vec![0.0; n];
    let mut size = vec![0usize; n];
    for v in 0..n {
        total[comm[v]] += level.strength[v];
        size[comm[v]] += 1;
    }
    let mut empty: Vec<usize> = (0..n).filter(|&c| size[c] == 0).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut queue: VecDeque<usize> = order.into();
    let mut queued = vec![true; n];
    let mut w_to = vec![0.0; n];
    let mut seen = vec![false; n];
    let mut touched = Vec::new();
    let mut changed = false;

    while let Some(v) = queue.pop_front() {
        queued[v] = false;
        let own = comm[v];
        let k_v = level.strength[v];
        for &(u, w) in &level.adj[v] {
            let c = comm[u];
            if !seen[c] {
                seen[c] = true;
                touched.push(c);
            }
            w_to[c] += w;
        }
        total[own] -= k_v;
        size[own] -= 1;

        let mut best = own;
        let mut best_gain = q.gain(w_to[own], k_v, total[own]);
        for &c in &touched {
            let g = q.gain(w_to[c], k_v, total[c]);
            if c != own && g > best_gain {
                best = c;
                best_gain = g;
            }
        }
        if size[own] > 0 && best_gain < 0.0 {
            best = empty.pop().expect("n communities for n nodes");
        }

        total[best] += k_v;
        size[best] += 1;
        comm[v] = best;
        if best != own {
            changed = true;
            if size[own] == 0 {
                empty.push(own);
            }
            for &(u, _) in &level.adj[v] {
                if comm[u] != best && !queued[u] {
                    queued[u] = true;
                    queue.push_back(u);
                }
            }
        }
        for &c in &touched {
            w_to[c] = 0.0;
            seen[c] = false;
        }
        touched.clear();
    }
    changed
}

/// Refines each community of `comm` starting from singletons, merging
/// well-connected nodes into well-connected subcommunities at random.
fn refine(level: &Level, q: &Quality, comm: &[usize], count: usize, rng: &mut impl Rng) -> Vec<usize> {
    let n = level.n();
    let mut refined: Vec<usize> = (0..n).collect();
    let mut r_total = level.strength.clone();
    let mut r_size = vec![1usize; n];
    let mut c_total = vec![0.0; count];
    for v in 0..n {
        c_total[comm[v]] += level.strength[v];
    }
    // Weight from each subcommunity to the rest of its enclosing community.
    let mut external = vec![0.0; n];
    for v in 0..n {
        for &(u, w) in &level.adj[v] {
            if comm[u] == comm[v] {
                external[v] += w;
            }
        }
    }
    let well_connected = |ext: f64, k: f64, c: usize| ext >= q.gamma * k * (c_total[c] - k) / q.two_m;

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut w_to = vec![0.0; n];
    let mut seen = vec![false; n];
    let mut touched = Vec::new();
    let mut options: Vec<(usize, f64)> = Vec::new();

    for v in order {
        let c = comm[v];
        let k_v = level.strength[v];
        if r_size[refined[v]] != 1 || !well_connected(external[refined[v]], k_v, c) {
            continue;
        }
        let own = refined[v];
        for &(u, w) in &level.adj[v] {
            let r = refined[u];
            if comm[u] == c && r != own {
                if !seen[r] {
                    seen[r] = true;
                    touched.push(r);
                }
                w_to[r] += w;
            }
        }
        options.clear();
        options.push((own, 0.0));
        for &r in &touched {
            if well_connected(external[r], r_total[r], c) {
                let g = q.gain(w_to[r], k_v, r_total[r]);
                if g >= 0.0 {
                    options.push((r, g));
                }
            }
        }
        let top = options.iter().map(|&(_, g)| g).fold(0.0, f64::max);
        let weights: Vec<f64> = options.iter().map(|&(_, g)| ((g - top) / THETA).exp()).collect();
        let mut target = rng.random::<f64>() * weights.iter().sum::<f64>();
        let mut chosen = options[options.len() - 1].0;
        for (&(r, _), &w) in options.iter().zip(&weights) {
            if target < w {
                chosen = r;
                break;
            }
            target -= w;
        }
        if chosen != own {
            external[chosen] += external[own] - 2.0 * w_to[chosen];
            r_total[chosen] += k_v;
            r_size[chosen] += 1;
            r_total[own] = 0.0;
            r_size[own] = 0;
            refined[v] = chosen;
        }
        for &r in &touched {
            w_to[r] = 0.0;
            seen[r] = false;
        }
        touched.clear();
    }
    densify(&mut refined);
    refined
}

/// One full multi-level pass starting from `initial` (labels on original nodes).
fn leiden_pass(g: &WeightedGraph, q: &Quality, initial: &[usize], rng: &mut impl Rng) -> Vec<usize> {
    let mut level = Level::from_graph(g);
    let mut membership: Vec<usize> = (0..g.node_count()).collect();
    let mut comm = initial.to_vec();
    densify(&mut comm);
    for _ in 0..MAX_LEVELS {
        move_nodes(&level, q, &mut comm, rng);
        let count = densify(&mut comm);
        if count == level.n() {
            break;
        }
        let refined = refine(&level, q, &comm, count, rng);
        let r_count = refined.iter().max().map_or(0, |m| m + 1);
        let groups = if r_count == level.n() { comm.clone() } else { refined };
        let g_count = groups.iter().max().map_or(0, |m| m + 1);
        let mut next_comm = vec![0; g_count];
        for v in 0..level.n() {
            next_comm[groups[v]] = comm[v];
        }
        for m in membership.iter_mut() {
            *m = groups[*m];
        }
        level = level.aggregate(&groups, g_count);
        comm = next_comm;
    }
    membership.iter().map(|&m| comm[m]).collect()
}

/// Leiden clustering of `g` with resolution `gamma`. Every returned
/// community is connected; isolated nodes are singletons.
pub fn leiden(g: &WeightedGraph, gamma: f64, seed: u64) -> Partition {
    let n = g.node_count();
    let m = g.total_weight();
    if m == 0.0 {
        return Partition::singletons(n);
    }
    let q = Quality { gamma, two_m: 2.0 * m };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut labels: Vec<usize> = (0..n).collect();
    for _ in 0..MAX_ITERATIONS {
        let mut next = leiden_pass(g, &q, &labels, &mut rng);
        densify(&mut next);
        if next == labels {
            break;
        }
        labels = next;
    }
    split_disconnected(g, &labels)
}
