use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;

use super::{median, TopologyError};
use crate::network::ExposureMatrix;

const PAGERANK_TOL: f64 = 1e-12;
const PAGERANK_MAX_ITER: usize = 100_000;

/// How edge weights translate into path lengths for betweenness and
/// closeness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DistanceMode {
    /// Length `max_w / w`: stronger exposure means a shorter edge, and the
    /// strongest edge of the layer has length 1.
    #[default]
    InverseWeight,
    /// Every edge has length 1.
    Unweighted,
}

impl DistanceMode {
    pub fn as_str(self) -> &'static str {
        match self {
            DistanceMode::InverseWeight => "inverse-weight",
            DistanceMode::Unweighted => "unweighted",
        }
    }
}

impl std::str::FromStr for DistanceMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "inverse-weight" => Ok(DistanceMode::InverseWeight),
            "unweighted" => Ok(DistanceMode::Unweighted),
            other => Err(format!("unknown distance mode `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Medians {
    pub pagerank: f64,
    pub betweenness: f64,
    pub closeness: f64,
}

/// Normalised per-node centralities of one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct CentralityTable {
    pub layer_id: String,
    pub distance_mode: DistanceMode,
    /// Sums to one.
    pub pagerank: Vec<f64>,
    /// Divided by `(n - 1)(n - 2)`, the directed maximum.
    pub betweenness: Vec<f64>,
    /// Harmonic closeness over outgoing paths, divided by `n - 1`.
    pub closeness: Vec<f64>,
    pub medians: Medians,
}

pub fn centralities(
    layer: &ExposureMatrix,
    damping: f64,
    mode: DistanceMode,
) -> Result<CentralityTable, TopologyError> {
    let pagerank = pagerank(layer, damping)?;
    let (betweenness, closeness) = path_centralities(layer, mode);
    let medians = Medians {
        pagerank: median(&pagerank),
        betweenness: median(&betweenness),
        closeness: median(&closeness),
    };
    Ok(CentralityTable {
        layer_id: layer.layer_id().to_string(),
        distance_mode: mode,
        pagerank,
        betweenness,
        closeness,
        medians,
    })
}

/// Weighted PageRank by power iteration.
///
/// The walker at `i` moves to `j` with probability `w_ij / Σ_k w_ik`; nodes
/// without out-edges spread their mass uniformly; teleport is uniform.
pub fn pagerank(layer: &ExposureMatrix, damping: f64) -> Result<Vec<f64>, TopologyError> {
    if !(damping > 0.0 && damping < 1.0) {
        return Err(TopologyError::InvalidDamping(damping));
    }
    let n = layer.n();
    let inv_n = 1.0 / n as f64;
    let out_strength: Vec<f64> = (0..n).map(|i| layer.row_sum(i)).collect();
    let mut x = vec![inv_n; n];
    let mut next = vec![0.0; n];
    let mut delta = f64::INFINITY;
    for _ in 0..PAGERANK_MAX_ITER {
        let dangling: f64 = (0..n)
            .filter(|&i| out_strength[i] == 0.0)
            .map(|i| x[i])
            .sum();
        let base = (1.0 - damping) * inv_n + damping * dangling * inv_n;
        next.iter_mut().for_each(|v| *v = base);
        for i in 0..n {
            if out_strength[i] == 0.0 || x[i] == 0.0 {
                continue;
            }
            let share = damping * x[i] / out_strength[i];
            for (j, &w) in layer.row(i).iter().enumerate() {
                if w > 0.0 {
                    next[j] += share * w;
                }
            }
        }
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|v| *v /= total);
        delta = x.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut x, &mut next);
        if delta < PAGERANK_TOL {
            return Ok(x);
        }
    }
    Err(TopologyError::NoConvergence {
        iterations: PAGERANK_MAX_ITER,
        residual: delta,
    })
}

#[derive(Clone, Copy, PartialEq)]
struct Entry {
    dist: f64,
    node: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        // Min-heap on distance, ties broken by node index.
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct SourceResult {
    dependency: Vec<f64>,
    harmonic: f64,
}

fn adjacency(layer: &ExposureMatrix, mode: DistanceMode) -> Vec<Vec<(usize, f64)>> {
    let n = layer.n();
    let max_w = layer.weights().iter().cloned().fold(0.0, f64::max);
    (0..n)
        .map(|i| {
            layer
                .row(i)
                .iter()
                .enumerate()
                .filter(|&(j, &w)| j != i && w > 0.0)
                .map(|(j, &w)| {
                    let len = match mode {
                        DistanceMode::InverseWeight => max_w / w,
                        DistanceMode::Unweighted => 1.0,
                    };
                    (j, len)
                })
                .collect()
        })
        .collect()
}

/// Brandes single-source pass: shortest-path dependencies of every node on
/// paths from `s`, plus the harmonic sum of distances from `s`.
fn single_source(adj: &[Vec<(usize, f64)>], s: usize) -> SourceResult {
    let n = adj.len();
    let mut dist = vec![f64::INFINITY; n];
    let mut sigma = vec![0.0f64; n];
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut settled = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut heap = BinaryHeap::new();

    dist[s] = 0.0;
    sigma[s] = 1.0;
    heap.push(Entry { dist: 0.0, node: s });
    while let Some(Entry { dist: d, node: v }) = heap.pop() {
        if settled[v] || d > dist[v] {
            continue;
        }
        settled[v] = true;
        order.push(v);
        for &(w, len) in &adj[v] {
            let alt = d + len;
            if alt < dist[w] {
                dist[w] = alt;
                sigma[w] = sigma[v];
                preds[w].clear();
                preds[w].push(v);
                heap.push(Entry { dist: alt, node: w });
            } else if alt == dist[w] && !settled[w] {
                sigma[w] += sigma[v];
                preds[w].push(v);
            }
        }
    }

    let mut delta = vec![0.0; n];
    for &w in order.iter().rev() {
        for &v in &preds[w] {
            delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
        }
    }
    delta[s] = 0.0;
    let harmonic = order
        .iter()
        .filter(|&&t| t != s)
        .map(|&t| 1.0 / dist[t])
        .sum();
    SourceResult {
        dependency: delta,
        harmonic,
    }
}

fn path_centralities(layer: &ExposureMatrix, mode: DistanceMode) -> (Vec<f64>, Vec<f64>) {
    let n = layer.n();
    let adj = adjacency(layer, mode);
    // Per-source results are collected in source order and reduced
    // sequentially so the sums do not depend on the thread schedule.
    let per_source: Vec<SourceResult> = (0..n)
        .into_par_iter()
        .map(|s| single_source(&adj, s))
        .collect();

    let mut betweenness = vec![0.0; n];
    for r in &per_source {
        for (b, d) in betweenness.iter_mut().zip(&r.dependency) {
            *b += d;
        }
    }
    if n >= 3 {
        let scale = ((n - 1) * (n - 2)) as f64;
        betweenness.iter_mut().for_each(|b| *b /= scale);
    } else {
        betweenness.iter_mut().for_each(|b| *b = 0.0);
    }

    let closeness = per_source
        .iter()
        .map(|r| {
            if n > 1 {
                r.harmonic / (n - 1) as f64
            } else {
                0.0
            }
        })
        .collect();
    (betweenness, closeness)
}
