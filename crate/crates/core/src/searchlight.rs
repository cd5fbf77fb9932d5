//! Moving-sphere decoding maps.

use ndarray::Axis;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::estimators::Estimator;
use crate::evaluation::{cross_val_score, FoldScheme, Score};
use crate::grid::{VoxelGrid, WeightMap};

/// In-mask features whose voxel centers lie within `radius` of `center`,
/// center included, ascending.
pub fn sphere_neighbors(grid: &VoxelGrid, center: usize, radius: f64) -> Result<Vec<usize>> {
    if center >= grid.n_features() {
        return Err(Error::invalid(format!(
            "center {center} is not one of the {} in-mask features",
            grid.n_features()
        )));
    }
    if !(radius >= 0.0 && radius.is_finite()) {
        return Err(Error::invalid(format!("bad radius {radius}")));
    }
    let c = grid.coords(center);
    let r = radius.floor() as i64;
    let r2 = radius * radius;
    let mut out = Vec::new();
    for dz in -r..=r {
        for dy in -r..=r {
            for dx in -r..=r {
                if ((dx * dx + dy * dy + dz * dz) as f64) > r2 {
                    continue;
                }
                if let Some(f) = grid.feature_at_signed([c[0] as i64 + dx, c[1] as i64 + dy, c[2] as i64 + dz]) {
                    out.push(f);
                }
            }
        }
    }
    out.sort_unstable();
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchlightSpec {
    pub radius: f64,
    pub cv: FoldScheme,
    pub score: Score,
}

impl SearchlightSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.radius >= 1.0 && self.radius.is_finite()) {
            return Err(Error::invalid(format!(
                "searchlight radius must be >= 1, got {}",
                self.radius
            )));
        }
        Ok(())
    }
}

/// Per-voxel mean cross-validated score of `estimator` restricted to the
/// voxel's sphere.
#[derive(Debug, Clone)]
pub struct SearchlightMap {
    /// Scores by feature; missing voxels hold 0.
    pub map: WeightMap,
    /// Features whose estimator failed, ascending.
    pub missing: Vec<usize>,
}

pub fn searchlight_map<E: Estimator + ?Sized>(
    data: &Dataset,
    grid: &VoxelGrid,
    spec: &SearchlightSpec,
    estimator: &E,
) -> Result<SearchlightMap> {
    spec.validate()?;
    if data.n_features() != grid.n_features() {
        return Err(Error::invalid(format!(
            "dataset has {} features, grid has {}",
            data.n_features(),
            grid.n_features()
        )));
    }
    // fold construction errors are configuration errors, not per-voxel ones
    spec.cv.folds(data.n_samples(), data.groups())?;
    let scores: Vec<Option<f64>> = (0..grid.n_features())
        .into_par_iter()
        .map(|v| {
            let sphere = sphere_neighbors(grid, v, spec.radius).ok()?;
            let x = data.x().select(Axis(1), &sphere);
            cross_val_score(estimator, x.view(), data.y(), data.groups(), &spec.cv, spec.score)
                .ok()
                .map(|cv| cv.mean)
                .filter(|s| s.is_finite())
        })
        .collect();
    let missing: Vec<usize> = (0..scores.len()).filter(|&v| scores[v].is_none()).collect();
    if !missing.is_empty() {
        log::warn!(
            "searchlight: {} voxels failed and are recorded as missing",
            missing.len()
        );
    }
    let values = scores.iter().map(|s| s.unwrap_or(0.0)).collect();
    Ok(SearchlightMap {
        map: WeightMap::new(values, grid.clone())?,
        missing,
    })
}
