//! Connectivity-constrained Ward clustering of features.
//!
//! Each feature is described by its column of `X` (one value per sample).
//! Only clusters joined by at least one graph edge may merge; among those the
//! pair with the smallest Ward cost `n_a n_b / (n_a + n_b) * |c_a - c_b|^2`
//! is merged first. That cost is the increase of within-cluster inertia and
//! coincides with the Lance-Williams Ward recurrence.

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeSet, BinaryHeap};
use std::io::Write;

use ndarray::ArrayView2;

use crate::error::{Error, Result};
use crate::grid::ConnectivityGraph;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merge {
    /// Child node ids, smaller id first.
    pub children: (usize, usize),
    pub cost: f64,
    pub size: usize,
    /// Set when the merge joins two disconnected components.
    pub forced: bool,
}

/// Binary merge tree over `p` leaves. Leaves are `0..p`, internal nodes
/// `p..2p-1` in creation order; the root is the last node.
#[derive(Debug, Clone, PartialEq)]
pub struct Dendrogram {
    n_leaves: usize,
    merges: Vec<Merge>,
}

impl Dendrogram {
    pub fn from_merges(n_leaves: usize, merges: Vec<Merge>) -> Result<Self> {
        if n_leaves == 0 || merges.len() + 1 != n_leaves {
            return Err(Error::invalid(format!(
                "{} merges cannot form a tree over {n_leaves} leaves",
                merges.len()
            )));
        }
        let mut has_parent = vec![false; 2 * n_leaves - 1];
        let mut sizes = vec![1usize; 2 * n_leaves - 1];
        for (k, m) in merges.iter().enumerate() {
            let node = n_leaves + k;
            let (a, b) = m.children;
            if a >= b || b >= node || has_parent[a] || has_parent[b] {
                return Err(Error::invalid(format!("node {node} has invalid children {a},{b}")));
            }
            if !(m.cost >= 0.0) {
                return Err(Error::invalid(format!("node {node} has negative merge cost")));
            }
            has_parent[a] = true;
            has_parent[b] = true;
            sizes[node] = sizes[a] + sizes[b];
            if sizes[node] != m.size {
                return Err(Error::invalid(format!("node {node} has inconsistent size")));
            }
        }
        Ok(Dendrogram { n_leaves, merges })
    }

    pub fn n_leaves(&self) -> usize {
        self.n_leaves
    }

    pub fn node_count(&self) -> usize {
        2 * self.n_leaves - 1
    }

    pub fn root(&self) -> usize {
        self.node_count() - 1
    }

    pub fn is_leaf(&self, node: usize) -> bool {
        node < self.n_leaves
    }

    pub fn merges(&self) -> &[Merge] {
        &self.merges
    }

    /// The merge that created an internal node.
    pub fn merge(&self, node: usize) -> Option<&Merge> {
        node.checked_sub(self.n_leaves).and_then(|k| self.merges.get(k))
    }

    pub fn children(&self, node: usize) -> Result<(usize, usize)> {
        if node >= self.node_count() {
            return Err(Error::invalid(format!("node {node} is not in the tree")));
        }
        self.merge(node).map(|m| m.children).ok_or(Error::NoChildren(node))
    }

    pub fn size(&self, node: usize) -> usize {
        self.merge(node).map_or(1, |m| m.size)
    }

    /// Leaf ids under `node`, ascending.
    pub fn leaves(&self, node: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.size(node));
        let mut stack = vec![node];
        while let Some(v) = stack.pop() {
            match self.merge(v) {
                Some(m) => {
                    stack.push(m.children.0);
                    stack.push(m.children.1);
                }
                None => out.push(v),
            }
        }
        out.sort_unstable();
        out
    }

    /// Writes one `node_id,child1,child2,merge_cost,size,forced` line per
    /// internal node.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "node_id,child1,child2,merge_cost,size,forced")?;
        for (k, m) in self.merges.iter().enumerate() {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                self.n_leaves + k,
                m.children.0,
                m.children.1,
                m.cost,
                m.size,
                m.forced
            )?;
        }
        Ok(())
    }

    pub fn read_csv(text: &str) -> Result<Self> {
        let mut merges = Vec::new();
        for (line_no, line) in text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let err = |message: String| Error::Parse {
                location: format!("line {}", line_no + 1),
                message,
            };
            let c: Vec<&str> = line.split(',').map(str::trim).collect();
            if c.len() != 6 {
                return Err(err(format!("expected 6 columns, found {}", c.len())));
            }
            let int = |s: &str| s.parse::<usize>().map_err(|_| err(format!("bad integer `{s}`")));
            let cost = c[3].parse::<f64>().map_err(|_| err(format!("bad cost `{}`", c[3])))?;
            let forced = c[5].parse::<bool>().map_err(|_| err(format!("bad flag `{}`", c[5])))?;
            merges.push((
                int(c[0])?,
                Merge {
                    children: (int(c[1])?, int(c[2])?),
                    cost,
                    size: int(c[4])?,
                    forced,
                },
            ));
        }
        let n_leaves = merges.len() + 1;
        for (k, (id, _)) in merges.iter().enumerate() {
            if *id != n_leaves + k {
                return Err(Error::Parse {
                    location: format!("line {}", k + 2),
                    message: format!("expected node id {}, found {id}", n_leaves + k),
                });
            }
        }
        Dendrogram::from_merges(n_leaves, merges.into_iter().map(|(_, m)| m).collect())
    }
}

/// Heap entry ordered by cost, then by the (smaller, larger) cluster id pair.
#[derive(Debug, Clone, Copy)]
struct Edge {
    cost: f64,
    a: usize,
    b: usize,
}

impl PartialEq for Edge {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Edge {}

impl PartialOrd for Edge {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Edge {
    fn cmp(&self, other: &Self) -> Ordering {
        self.cost
            .total_cmp(&other.cost)
            .then(self.a.cmp(&other.a))
            .then(self.b.cmp(&other.b))
    }
}

struct Clusters {
    n_samples: usize,
    centroids: Vec<Option<Vec<f64>>>,
    sizes: Vec<usize>,
}

impl Clusters {
    fn cost(&self, a: usize, b: usize) -> f64 {
        let ca = self.centroids[a].as_ref().expect("live cluster");
        let cb = self.centroids[b].as_ref().expect("live cluster");
        let sq: f64 = ca.iter().zip(cb).map(|(x, y)| (x - y) * (x - y)).sum();
        let (na, nb) = (self.sizes[a] as f64, self.sizes[b] as f64);
        na * nb / (na + nb) * sq
    }

    fn alive(&self, id: usize) -> bool {
        self.centroids[id].is_some()
    }

    fn merge(&mut self, a: usize, b: usize) -> usize {
        let ca = self.centroids[a].take().expect("live cluster");
        let cb = self.centroids[b].take().expect("live cluster");
        let (na, nb) = (self.sizes[a], self.sizes[b]);
        let total = (na + nb) as f64;
        let c: Vec<f64> = ca
            .iter()
            .zip(&cb)
            .map(|(x, y)| (na as f64 * x + nb as f64 * y) / total)
            .collect();
        debug_assert_eq!(c.len(), self.n_samples);
        self.centroids.push(Some(c));
        self.sizes.push(na + nb);
        self.sizes.len() - 1
    }
}

/// Builds the Ward dendrogram of the columns of `x` under `graph`.
///
/// Disconnected graphs are handled by completing every component first and
/// then joining the component roots by increasing Ward cost; those merges are
/// flagged `forced`.
pub fn ward_build(x: ArrayView2<f64>, graph: &ConnectivityGraph) -> Result<Dendrogram> {
    let (n, p) = x.dim();
    if p == 0 {
        return Err(Error::invalid("cannot cluster zero features"));
    }
    if graph.n_features() != p {
        return Err(Error::invalid(format!(
            "graph has {} features, data has {p}",
            graph.n_features()
        )));
    }

    let mut clusters = Clusters {
        n_samples: n,
        centroids: Vec::with_capacity(2 * p - 1),
        sizes: Vec::with_capacity(2 * p - 1),
    };
    for j in 0..p {
        clusters.centroids.push(Some(x.column(j).to_vec()));
        clusters.sizes.push(1);
    }

    let mut adjacency: Vec<BTreeSet<usize>> = Vec::with_capacity(2 * p - 1);
    let mut heap = BinaryHeap::new();
    for i in 0..p {
        let mut adj = BTreeSet::new();
        for &j in graph.neighbors(i) {
            adj.insert(j);
            if i < j {
                heap.push(Reverse(Edge {
                    cost: clusters.cost(i, j),
                    a: i,
                    b: j,
                }));
            }
        }
        adjacency.push(adj);
    }

    let mut merges = Vec::with_capacity(p - 1);
    while let Some(Reverse(edge)) = heap.pop() {
        // an edge stays valid while both endpoints are alive: its cost only
        // depends on the two clusters it joins
        if !clusters.alive(edge.a) || !clusters.alive(edge.b) {
            continue;
        }
        let (a, b) = (edge.a, edge.b);
        let m = clusters.merge(a, b);
        merges.push(Merge {
            children: (a, b),
            cost: edge.cost,
            size: clusters.sizes[m],
            forced: false,
        });

        let adj_a = std::mem::take(&mut adjacency[a]);
        let adj_b = std::mem::take(&mut adjacency[b]);
        let mut adj_m = BTreeSet::new();
        for &k in adj_a.iter().chain(adj_b.iter()) {
            if k == a || k == b || adj_m.contains(&k) {
                continue;
            }
            adj_m.insert(k);
            adjacency[k].remove(&a);
            adjacency[k].remove(&b);
            adjacency[k].insert(m);
            heap.push(Reverse(Edge {
                cost: clusters.cost(k, m),
                a: k,
                b: m,
            }));
        }
        adjacency.push(adj_m);
    }

    // residual components: join roots by increasing Ward cost
    let mut roots: Vec<usize> = (0..clusters.sizes.len()).filter(|&c| clusters.alive(c)).collect();
    while roots.len() > 1 {
        let mut best: Option<Edge> = None;
        for (ia, &a) in roots.iter().enumerate() {
            for &b in &roots[ia + 1..] {
                let e = Edge {
                    cost: clusters.cost(a, b),
                    a,
                    b,
                };
                if best.is_none_or(|cur| e < cur) {
                    best = Some(e);
                }
            }
        }
        let e = best.expect("at least two roots");
        let m = clusters.merge(e.a, e.b);
        merges.push(Merge {
            children: (e.a, e.b),
            cost: e.cost,
            size: clusters.sizes[m],
            forced: true,
        });
        roots.retain(|&r| r != e.a && r != e.b);
        roots.push(m);
    }

    Dendrogram::from_merges(p, merges)
}
