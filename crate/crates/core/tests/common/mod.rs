#![allow(dead_code)]

use std::collections::BTreeSet;

use agd::rng::stream_rng;
use agd::{build_connectivity, Adjacency, ConnectivityGraph, VoxelGrid};
use ndarray::{Array1, Array2, ArrayView2};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn gaussian(n: usize, p: usize, seed: u64, stream: &str) -> Array2<f64> {
    let mut rng = stream_rng(seed, stream, 0);
    Array2::from_shape_fn((n, p), |_| StandardNormal.sample(&mut rng))
}

pub fn gaussian_vec(n: usize, seed: u64, stream: &str) -> Array1<f64> {
    let mut rng = stream_rng(seed, stream, 0);
    Array1::from_shape_fn(n, |_| StandardNormal.sample(&mut rng))
}

/// A chain or a full 2D grid graph over roughly `p` features, picked by the seed.
pub fn random_graph(seed: u64, max_p: usize) -> ConnectivityGraph {
    let mut rng = stream_rng(seed, "graph", 0);
    if rng.random_bool(0.5) {
        ConnectivityGraph::chain(rng.random_range(2..=max_p))
    } else {
        let a = rng.random_range(1..=4usize);
        let b = rng.random_range(2..=(max_p / a).max(2));
        build_connectivity(&VoxelGrid::full([a, b, 1]).unwrap(), Adjacency::Face6).unwrap()
    }
}

fn sse(x: ArrayView2<f64>, members: &[usize]) -> f64 {
    let n = x.nrows();
    let mut total = 0.0;
    for i in 0..n {
        let mean = members.iter().map(|&j| x[[i, j]]).sum::<f64>() / members.len() as f64;
        total += members.iter().map(|&j| (x[[i, j]] - mean).powi(2)).sum::<f64>();
    }
    total
}

/// Brute-force Ward: at every step, evaluate the exact increase of total
/// within-cluster sum of squares for every pair of clusters joined by an
/// edge, merge the cheapest; ties go to the smallest (min id, max id).
/// Returns `(children, cost)` per merge. Connected graphs only.
pub fn ward_oracle(x: ArrayView2<f64>, graph: &ConnectivityGraph) -> Vec<((usize, usize), f64)> {
    let p = x.ncols();
    let mut clusters: Vec<(usize, Vec<usize>)> = (0..p).map(|j| (j, vec![j])).collect();
    let mut next_id = p;
    let mut out = Vec::new();
    while clusters.len() > 1 {
        let mut best: Option<(f64, (usize, usize), usize, usize)> = None;
        for a in 0..clusters.len() {
            for b in a + 1..clusters.len() {
                let sa: BTreeSet<usize> = clusters[a].1.iter().copied().collect();
                let adjacent = clusters[b]
                    .1
                    .iter()
                    .any(|&j| graph.neighbors(j).iter().any(|k| sa.contains(k)));
                if !adjacent {
                    continue;
                }
                let mut joined = clusters[a].1.clone();
                joined.extend(&clusters[b].1);
                let cost = sse(x, &joined) - sse(x, &clusters[a].1) - sse(x, &clusters[b].1);
                let (ia, ib) = (clusters[a].0, clusters[b].0);
                let key = (ia.min(ib), ia.max(ib));
                let better = match &best {
                    None => true,
                    Some((c, k, _, _)) => cost < *c || (cost == *c && key < *k),
                };
                if better {
                    best = Some((cost, key, a, b));
                }
            }
        }
        let (cost, key, a, b) = best.expect("graph must be connected");
        let mut joined = clusters[a].1.clone();
        joined.extend(&clusters[b].1);
        clusters.remove(b);
        clusters.remove(a);
        clusters.push((next_id, joined));
        next_id += 1;
        out.push((key, cost));
    }
    out
}
