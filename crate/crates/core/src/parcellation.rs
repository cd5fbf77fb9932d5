//! Tree cuts as feature partitions, parcel-averaged signals and weight
//! back-projection.

use std::io::Write;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::grid::{VoxelGrid, WeightMap};
use crate::ward::Dendrogram;

/// A partition of the features into parcels, each parcel being the leaf set
/// of one dendrogram node. Parcel ids are numbered by first feature
/// occurrence, so equal partitions always carry equal labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Parcellation {
    labels: Vec<usize>,
    parcel_nodes: Vec<usize>,
    sizes: Vec<usize>,
}

impl Parcellation {
    /// The single-parcel partition at the tree root.
    pub fn root(tree: &Dendrogram) -> Self {
        Parcellation {
            labels: vec![0; tree.n_leaves()],
            parcel_nodes: vec![tree.root()],
            sizes: vec![tree.n_leaves()],
        }
    }

    /// Builds the partition given by a set of tree nodes whose leaf sets must
    /// cover every feature exactly once.
    pub fn from_nodes(tree: &Dendrogram, nodes: &[usize]) -> Result<Self> {
        let p = tree.n_leaves();
        let mut owner = vec![usize::MAX; p];
        for &node in nodes {
            if node >= tree.node_count() {
                return Err(Error::invalid(format!("node {node} is not in the tree")));
            }
            for leaf in tree.leaves(node) {
                if owner[leaf] != usize::MAX {
                    return Err(Error::invalid(format!("feature {leaf} lies in two parcels")));
                }
                owner[leaf] = node;
            }
        }
        if let Some(j) = owner.iter().position(|&o| o == usize::MAX) {
            return Err(Error::invalid(format!("feature {j} is not covered")));
        }
        Ok(Self::canonical(tree, &owner))
    }

    /// Numbers parcels by first occurrence in `owner` (feature -> node).
    fn canonical(tree: &Dendrogram, owner: &[usize]) -> Self {
        let mut id_of_node = std::collections::HashMap::new();
        let mut parcel_nodes = Vec::new();
        let labels = owner
            .iter()
            .map(|&node| {
                *id_of_node.entry(node).or_insert_with(|| {
                    parcel_nodes.push(node);
                    parcel_nodes.len() - 1
                })
            })
            .collect();
        let sizes = parcel_nodes.iter().map(|&n| tree.size(n)).collect();
        Parcellation {
            labels,
            parcel_nodes,
            sizes,
        }
    }

    pub fn n_parcels(&self) -> usize {
        self.parcel_nodes.len()
    }

    pub fn n_features(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn parcel_nodes(&self) -> &[usize] {
        &self.parcel_nodes
    }

    /// Number of features in each parcel.
    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn members(&self, parcel: usize) -> Vec<usize> {
        (0..self.labels.len()).filter(|&j| self.labels[j] == parcel).collect()
    }

    /// Replaces one parcel by the two children of its tree node.
    pub fn refine(&self, parcel: usize, tree: &Dendrogram) -> Result<Parcellation> {
        let node = *self
            .parcel_nodes
            .get(parcel)
            .ok_or_else(|| Error::invalid(format!("no parcel {parcel}")))?;
        let (left, right) = tree.children(node).map_err(|_| Error::NotSplittable(parcel))?;
        let mut owner: Vec<usize> = self.labels.iter().map(|&l| self.parcel_nodes[l]).collect();
        for leaf in tree.leaves(left) {
            owner[leaf] = left;
        }
        for leaf in tree.leaves(right) {
            owner[leaf] = right;
        }
        Ok(Self::canonical(tree, &owner))
    }

    /// True when every parcel of `self` lies inside a single parcel of `coarser`.
    pub fn refines(&self, coarser: &Parcellation) -> bool {
        if self.n_features() != coarser.n_features() {
            return false;
        }
        let mut parent = vec![usize::MAX; self.n_parcels()];
        self.labels.iter().zip(&coarser.labels).all(|(&fine, &coarse)| {
            if parent[fine] == usize::MAX {
                parent[fine] = coarse;
            }
            parent[fine] == coarse
        })
    }

    /// Writes `feature_index,parcel_id` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "feature_index,parcel_id")?;
        for (j, l) in self.labels.iter().enumerate() {
            writeln!(out, "{j},{l}")?;
        }
        Ok(())
    }
}

/// Column-wise parcel means: column `k` of the result is the mean of the
/// columns of `x` that belong to parcel `k`.
pub fn parcel_averages(x: ArrayView2<f64>, parcellation: &Parcellation) -> Result<Array2<f64>> {
    if x.ncols() != parcellation.n_features() {
        return Err(Error::invalid(format!(
            "X has {} columns, parcellation covers {} features",
            x.ncols(),
            parcellation.n_features()
        )));
    }
    let mut out = Array2::zeros((x.nrows(), parcellation.n_parcels()));
    for (j, &l) in parcellation.labels.iter().enumerate() {
        let mut col = out.column_mut(l);
        col += &x.column(j);
    }
    for (k, &size) in parcellation.sizes.iter().enumerate() {
        out.column_mut(k).mapv_inplace(|v| v / size as f64);
    }
    Ok(out)
}

/// Spreads parcel weights back onto features, dividing by parcel size.
pub fn backproject_weights(
    parcel_weights: ArrayView1<f64>,
    parcellation: &Parcellation,
    grid: &VoxelGrid,
) -> Result<WeightMap> {
    if parcel_weights.len() != parcellation.n_parcels() {
        return Err(Error::invalid(format!(
            "{} weights for {} parcels",
            parcel_weights.len(),
            parcellation.n_parcels()
        )));
    }
    if grid.n_features() != parcellation.n_features() {
        return Err(Error::invalid("grid and parcellation disagree on feature count"));
    }
    let values: Array1<f64> = parcellation
        .labels
        .iter()
        .map(|&l| parcel_weights[l] / parcellation.sizes[l] as f64)
        .collect();
    WeightMap::new(values, grid.clone())
}

/// Cuts the tree below its `n_parcels - 1` most recent merges.
pub fn main_branches_cut(tree: &Dendrogram, n_parcels: usize) -> Result<Parcellation> {
    let p = tree.n_leaves();
    if n_parcels == 0 || n_parcels > p {
        return Err(Error::invalid(format!(
            "number of parcels must be in [1, {p}], got {n_parcels}"
        )));
    }
    // nodes created by the last n_parcels-1 merges are undone
    let first_kept = tree.node_count() - (n_parcels - 1);
    let mut nodes = Vec::with_capacity(n_parcels);
    if n_parcels == 1 {
        nodes.push(tree.root());
    } else {
        for node in first_kept..tree.node_count() {
            let (a, b) = tree.children(node)?;
            for c in [a, b] {
                if c < first_kept {
                    nodes.push(c);
                }
            }
        }
    }
    Parcellation::from_nodes(tree, &nodes)
}

/// Mean signal of every tree node, stored as an `n x (2p-1)` matrix. Any
/// parcellation's averages are a column gather from this table.
#[derive(Debug, Clone)]
pub struct NodeSignals {
    means: Array2<f64>,
}

impl NodeSignals {
    pub fn new(x: ArrayView2<f64>, tree: &Dendrogram) -> Result<Self> {
        let p = tree.n_leaves();
        if x.ncols() != p {
            return Err(Error::invalid(format!(
                "X has {} columns, tree has {p} leaves",
                x.ncols()
            )));
        }
        let mut sums = Array2::zeros((x.nrows(), tree.node_count()));
        sums.slice_mut(ndarray::s![.., ..p]).assign(&x);
        for (k, m) in tree.merges().iter().enumerate() {
            let (a, b) = m.children;
            let s = &sums.column(a) + &sums.column(b);
            sums.column_mut(p + k).assign(&s);
        }
        for node in p..tree.node_count() {
            let size = tree.size(node) as f64;
            sums.column_mut(node).mapv_inplace(|v| v / size);
        }
        Ok(NodeSignals { means: sums })
    }

    pub fn n_samples(&self) -> usize {
        self.means.nrows()
    }

    /// Averages for the given nodes (one column each), restricted to `rows`
    /// when given.
    pub fn gather(&self, nodes: &[usize], rows: Option<&[usize]>) -> Array2<f64> {
        let cols = self.means.select(Axis(1), nodes);
        match rows {
            Some(r) => cols.select(Axis(0), r),
            None => cols,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::ConnectivityGraph;
    use crate::ward::ward_build;
    use ndarray::array;

    fn hand_tree() -> Dendrogram {
        let x = array![[0.0, 0.1, 5.0], [0.0, 0.1, 5.0]];
        ward_build(x.view(), &ConnectivityGraph::chain(3)).unwrap()
    }

    #[test]
    fn identity_partition_averages() {
        let x = array![[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]];
        let tree = hand_tree();
        let parc = Parcellation::from_nodes(&tree, &[0, 1, 2]).unwrap();
        assert_eq!(parcel_averages(x.view(), &parc).unwrap(), x);
    }

    #[test]
    fn single_parcel_mean() {
        let x = array![[1.0, 3.0], [3.0, 5.0]];
        let tree = ward_build(x.view(), &ConnectivityGraph::chain(2)).unwrap();
        let parc = Parcellation::root(&tree);
        assert_eq!(parcel_averages(x.view(), &parc).unwrap(), array![[2.0], [4.0]]);
    }

    #[test]
    fn column_mismatch() {
        let parc = Parcellation::root(&hand_tree());
        assert!(parcel_averages(Array2::zeros((2, 2)).view(), &parc).is_err());
    }

    #[test]
    fn refine_hand_tree_down_to_singletons() {
        let tree = hand_tree();
        let root = Parcellation::root(&tree);
        let two = root.refine(0, &tree).unwrap();
        assert_eq!(two.n_parcels(), 2);
        assert_eq!(two.labels(), &[0, 0, 1]);
        assert_eq!(two.parcel_nodes(), &[3, 2]);
        let three = two.refine(0, &tree).unwrap();
        assert_eq!(three.labels(), &[0, 1, 2]);
        assert!(matches!(three.refine(1, &tree), Err(Error::NotSplittable(1))));
    }

    #[test]
    fn root_of_two_leaf_tree_splits_into_singletons() {
        let x = array![[1.0, 2.0]];
        let tree = ward_build(x.view(), &ConnectivityGraph::chain(2)).unwrap();
        let parc = Parcellation::root(&tree).refine(0, &tree).unwrap();
        assert_eq!(parc.labels(), &[0, 1]);
    }

    #[test]
    fn backprojection_divides_by_size() {
        let grid = VoxelGrid::line(4).unwrap();
        let x = array![[0.0, 0.1, 0.2, 0.3]];
        let tree = ward_build(x.view(), &ConnectivityGraph::chain(4)).unwrap();
        let map = backproject_weights(array![2.0].view(), &Parcellation::root(&tree), &grid).unwrap();
        assert!(map.values().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn backprojection_mixed_sizes() {
        // features {0,1} and {2,3,4}
        let x = array![[0.0, 0.1, 9.0, 9.1, 9.2]];
        let tree = ward_build(x.view(), &ConnectivityGraph::chain(5)).unwrap();
        let parc = main_branches_cut(&tree, 2).unwrap();
        assert_eq!(parc.labels(), &[0, 0, 1, 1, 1]);
        let map = backproject_weights(array![1.0, 3.0].view(), &parc, &VoxelGrid::line(5).unwrap()).unwrap();
        assert_eq!(map.values().to_vec(), vec![0.5, 0.5, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn backprojection_length_mismatch() {
        let tree = hand_tree();
        let parc = Parcellation::root(&tree);
        assert!(backproject_weights(array![1.0, 2.0].view(), &parc, &VoxelGrid::line(3).unwrap()).is_err());
    }

    #[test]
    fn main_branches_on_hand_tree() {
        let tree = hand_tree();
        assert_eq!(main_branches_cut(&tree, 1).unwrap().n_parcels(), 1);
        assert_eq!(main_branches_cut(&tree, 2).unwrap().labels(), &[0, 0, 1]);
        assert_eq!(main_branches_cut(&tree, 3).unwrap().labels(), &[0, 1, 2]);
        assert!(main_branches_cut(&tree, 0).is_err());
        assert!(main_branches_cut(&tree, 4).is_err());
    }

    #[test]
    fn node_signals_match_direct_averages() {
        let x = array![[0.0, 0.1, 5.0, 2.0], [1.0, -0.5, 4.0, 3.0]];
        let tree = ward_build(x.view(), &ConnectivityGraph::chain(4)).unwrap();
        let signals = NodeSignals::new(x.view(), &tree).unwrap();
        let parc = main_branches_cut(&tree, 2).unwrap();
        let direct = parcel_averages(x.view(), &parc).unwrap();
        let gathered = signals.gather(parc.parcel_nodes(), None);
        for (a, b) in direct.iter().zip(gathered.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
