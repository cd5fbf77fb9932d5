//! Supervised clustering for decoding a target from grid-structured data.
//!
//! The pipeline clusters features with connectivity-constrained Ward
//! ([`ward::ward_build`]), prunes the resulting tree with a greedy
//! cross-validated search ([`cut::supervised_cut`]) and fits linear
//! estimators on parcel-averaged signals. Baselines (elastic net, linear SVC,
//! ANOVA screening, searchlight) and synthetic benchmarks are included for
//! comparison.

// `!(x > 0.0)` deliberately rejects NaN along with non-positive values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cut;
pub mod dataset;
pub mod error;
pub mod estimators;
pub mod evaluation;
pub mod experiment;
pub mod grid;
pub mod parcellation;
pub mod rng;
pub mod searchlight;
pub mod simulation;
pub mod ward;

pub use dataset::{DataFormat, Dataset, Target, Task};
pub use error::{Error, Result};
pub use grid::{build_connectivity, Adjacency, ConnectivityGraph, VoxelGrid, WeightMap};
pub use parcellation::{backproject_weights, main_branches_cut, parcel_averages, Parcellation};
pub use ward::{ward_build, Dendrogram, Merge};
