//! Grid-structured feature spaces.
//!
//! Features live on the in-mask cells of a regular 3D lattice (1D data uses
//! dims `(p, 1, 1)`). Feature indices follow x-fastest order over the mask,
//! so the same grid always yields the same feature numbering.

use std::io::Write;

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GridFile", into = "GridFile")]
pub struct VoxelGrid {
    dims: [usize; 3],
    mask: Vec<bool>,
    coords: Vec<[usize; 3]>,
    cell_to_feature: Vec<Option<usize>>,
}

/// On-disk form of a grid: dimensions plus an optional mask (absent = full).
#[derive(Serialize, Deserialize)]
struct GridFile {
    dims: [usize; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mask: Option<Vec<bool>>,
}

impl TryFrom<GridFile> for VoxelGrid {
    type Error = Error;

    fn try_from(file: GridFile) -> Result<Self> {
        match file.mask {
            Some(mask) => VoxelGrid::with_mask(file.dims, mask),
            None => VoxelGrid::full(file.dims),
        }
    }
}

impl From<VoxelGrid> for GridFile {
    fn from(grid: VoxelGrid) -> Self {
        let full = grid.mask.iter().all(|&m| m);
        GridFile {
            dims: grid.dims,
            mask: if full { None } else { Some(grid.mask) },
        }
    }
}

impl VoxelGrid {
    pub fn full(dims: [usize; 3]) -> Result<Self> {
        let cells = checked_cells(dims)?;
        Self::with_mask(dims, vec![true; cells])
    }

    /// A 1D grid of `p` features.
    pub fn line(p: usize) -> Result<Self> {
        Self::full([p, 1, 1])
    }

    pub fn with_mask(dims: [usize; 3], mask: Vec<bool>) -> Result<Self> {
        let cells = checked_cells(dims)?;
        if mask.len() != cells {
            return Err(Error::invalid(format!(
                "mask has {} cells, grid {:?} has {}",
                mask.len(),
                dims,
                cells
            )));
        }
        let mut coords = Vec::new();
        let mut cell_to_feature = vec![None; cells];
        for z in 0..dims[2] {
            for y in 0..dims[1] {
                for x in 0..dims[0] {
                    let cell = x + dims[0] * (y + dims[1] * z);
                    if mask[cell] {
                        cell_to_feature[cell] = Some(coords.len());
                        coords.push([x, y, z]);
                    }
                }
            }
        }
        Ok(VoxelGrid {
            dims,
            mask,
            coords,
            cell_to_feature,
        })
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    /// Number of in-mask features `p`.
    pub fn n_features(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self, feature: usize) -> [usize; 3] {
        self.coords[feature]
    }

    pub fn feature_at(&self, x: usize, y: usize, z: usize) -> Option<usize> {
        if x >= self.dims[0] || y >= self.dims[1] || z >= self.dims[2] {
            return None;
        }
        self.cell_to_feature[x + self.dims[0] * (y + self.dims[1] * z)]
    }

    /// Feature index at a signed coordinate, `None` when outside the grid or mask.
    pub(crate) fn feature_at_signed(&self, c: [i64; 3]) -> Option<usize> {
        if c.iter().any(|&v| v < 0) {
            return None;
        }
        self.feature_at(c[0] as usize, c[1] as usize, c[2] as usize)
    }
}

fn checked_cells(dims: [usize; 3]) -> Result<usize> {
    if dims.contains(&0) {
        return Err(Error::invalid(format!("grid dims must be >= 1, got {dims:?}")));
    }
    Ok(dims[0] * dims[1] * dims[2])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Adjacency {
    /// Face adjacency: up to 6 neighbors in 3D.
    Face6,
    /// Neighbors along the x axis only.
    Chain1d,
}

/// Symmetric adjacency over feature indices, with sorted neighbor lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConnectivityGraph {
    neighbors: Vec<Vec<usize>>,
}

impl ConnectivityGraph {
    /// Builds a graph from explicit neighbor lists. Lists are sorted and
    /// deduplicated; asymmetric input, self-loops or out-of-range ids are rejected.
    pub fn from_neighbors(mut neighbors: Vec<Vec<usize>>) -> Result<Self> {
        let p = neighbors.len();
        for (i, list) in neighbors.iter_mut().enumerate() {
            list.sort_unstable();
            list.dedup();
            if list.iter().any(|&j| j >= p || j == i) {
                return Err(Error::invalid(format!(
                    "feature {i} has a self-loop or out-of-range neighbor"
                )));
            }
        }
        for (i, list) in neighbors.iter().enumerate() {
            for &j in list {
                if neighbors[j].binary_search(&i).is_err() {
                    return Err(Error::invalid(format!("edge {i}-{j} is not symmetric")));
                }
            }
        }
        Ok(ConnectivityGraph { neighbors })
    }

    /// A path graph `0 - 1 - ... - (p-1)`.
    pub fn chain(p: usize) -> Self {
        let neighbors = (0..p)
            .map(|i| {
                let mut v = Vec::with_capacity(2);
                if i > 0 {
                    v.push(i - 1);
                }
                if i + 1 < p {
                    v.push(i + 1);
                }
                v
            })
            .collect();
        ConnectivityGraph { neighbors }
    }

    pub fn n_features(&self) -> usize {
        self.neighbors.len()
    }

    pub fn neighbors(&self, feature: usize) -> &[usize] {
        &self.neighbors[feature]
    }

    pub fn n_edges(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Connected component id per feature, numbered by first feature occurrence.
    pub fn components(&self) -> Vec<usize> {
        let p = self.n_features();
        let mut comp = vec![usize::MAX; p];
        let mut next = 0;
        let mut stack = Vec::new();
        for start in 0..p {
            if comp[start] != usize::MAX {
                continue;
            }
            comp[start] = next;
            stack.push(start);
            while let Some(i) = stack.pop() {
                for &j in &self.neighbors[i] {
                    if comp[j] == usize::MAX {
                        comp[j] = next;
                        stack.push(j);
                    }
                }
            }
            next += 1;
        }
        comp
    }

    /// Whether `features` induces a connected subgraph.
    pub fn is_connected_subset(&self, features: &[usize]) -> bool {
        if features.is_empty() {
            return true;
        }
        let mut inside = vec![false; self.n_features()];
        for &f in features {
            inside[f] = true;
        }
        let mut seen = vec![false; self.n_features()];
        let mut stack = vec![features[0]];
        seen[features[0]] = true;
        let mut count = 1;
        while let Some(i) = stack.pop() {
            for &j in &self.neighbors[i] {
                if inside[j] && !seen[j] {
                    seen[j] = true;
                    count += 1;
                    stack.push(j);
                }
            }
        }
        count == features.len()
    }
}

const FACE_OFFSETS: [[i64; 3]; 6] = [[-1, 0, 0], [1, 0, 0], [0, -1, 0], [0, 1, 0], [0, 0, -1], [0, 0, 1]];

pub fn build_connectivity(grid: &VoxelGrid, order: Adjacency) -> Result<ConnectivityGraph> {
    if grid.n_features() == 0 {
        return Err(Error::invalid("grid mask is empty"));
    }
    let offsets: &[[i64; 3]] = match order {
        Adjacency::Face6 => &FACE_OFFSETS,
        Adjacency::Chain1d => &FACE_OFFSETS[..2],
    };
    let neighbors = (0..grid.n_features())
        .map(|f| {
            let c = grid.coords(f);
            let mut list: Vec<usize> = offsets
                .iter()
                .filter_map(|o| grid.feature_at_signed([c[0] as i64 + o[0], c[1] as i64 + o[1], c[2] as i64 + o[2]]))
                .collect();
            list.sort_unstable();
            list
        })
        .collect();
    Ok(ConnectivityGraph { neighbors })
}

/// Per-feature values aligned with a grid, e.g. back-projected weights or
/// searchlight scores.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMap {
    values: Array1<f64>,
    grid: VoxelGrid,
}

impl WeightMap {
    pub fn new(values: Array1<f64>, grid: VoxelGrid) -> Result<Self> {
        if values.len() != grid.n_features() {
            return Err(Error::invalid(format!(
                "weight map has {} values for {} features",
                values.len(),
                grid.n_features()
            )));
        }
        if let Some(j) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite weight at feature {j}")));
        }
        Ok(WeightMap { values, grid })
    }

    pub fn values(&self) -> &Array1<f64> {
        &self.values
    }

    pub fn grid(&self) -> &VoxelGrid {
        &self.grid
    }

    /// Writes `feature_index,x,y,z,weight` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "feature_index,x,y,z,weight")?;
        for (j, v) in self.values.iter().enumerate() {
            let [x, y, z] = self.grid.coords(j);
            writeln!(out, "{j},{x},{y},{z},{v}")?;
        }
        Ok(())
    }

    pub fn read_csv(text: &str, grid: VoxelGrid) -> Result<Self> {
        let mut values = vec![f64::NAN; grid.n_features()];
        for (line_no, line) in text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let cells: Vec<&str> = line.split(',').collect();
            let location = || format!("line {}", line_no + 1);
            if cells.len() != 5 {
                return Err(Error::Parse {
                    location: location(),
                    message: format!("expected 5 columns, found {}", cells.len()),
                });
            }
            let j: usize = cells[0].trim().parse().map_err(|_| Error::Parse {
                location: location(),
                message: "bad feature index".into(),
            })?;
            let v: f64 = cells[4].trim().parse().map_err(|_| Error::Parse {
                location: location(),
                message: "bad weight".into(),
            })?;
            if j >= values.len() {
                return Err(Error::Parse {
                    location: location(),
                    message: format!("feature index {j} out of range"),
                });
            }
            values[j] = v;
        }
        WeightMap::new(Array1::from(values), grid)
    }
}
