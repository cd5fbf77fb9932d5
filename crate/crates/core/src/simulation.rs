//! Synthetic benchmarks: a 1D block-sparse regression and a smoothed 3D
//! volume with four cubic regions of interest.

use ndarray::{Array1, Array2};
use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::grid::{VoxelGrid, WeightMap};
use crate::rng::{derive_seed, stream_rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sim1dSpec {
    pub n_features: usize,
    pub n_samples: usize,
    /// Inclusive feature ranges with nonzero weight.
    pub supports: Vec<(usize, usize)>,
    /// Uniform weight law `(low, high)` for each support.
    pub weight_ranges: Vec<(f64, f64)>,
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for Sim1dSpec {
    fn default() -> Self {
        Sim1dSpec {
            n_features: 200,
            n_samples: 150,
            supports: vec![(20, 30), (50, 60)],
            weight_ranges: vec![(0.75, 1.25), (-1.25, -0.75)],
            noise_std: 1.0,
            seed: 0,
        }
    }
}

impl Sim1dSpec {
    pub fn with_seed(seed: u64) -> Self {
        Sim1dSpec {
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_features == 0 || self.n_samples == 0 {
            return Err(Error::invalid("sample and feature counts must be positive"));
        }
        if self.supports.len() != self.weight_ranges.len() {
            return Err(Error::invalid("one weight range is needed per support"));
        }
        for &(a, b) in &self.supports {
            if a > b || b >= self.n_features {
                return Err(Error::invalid(format!(
                    "support [{a}, {b}] outside [0, {})",
                    self.n_features
                )));
            }
        }
        for &(lo, hi) in &self.weight_ranges {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::invalid(format!("bad weight range ({lo}, {hi})")));
            }
        }
        if !(self.noise_std.is_finite() && self.noise_std >= 0.0) {
            return Err(Error::invalid("noise std must be finite and non-negative"));
        }
        Ok(())
    }

    /// True if feature `j` lies within `margin` of a support.
    pub fn near_support(&self, j: usize, margin: usize) -> bool {
        self.supports.iter().any(|&(a, b)| j + margin >= a && j <= b + margin)
    }
}

/// A 1D dataset together with the weights that generated it.
#[derive(Debug, Clone, PartialEq)]
pub struct Sim1d {
    pub dataset: Dataset,
    pub weights: Array1<f64>,
}

pub fn simulate_1d(spec: &Sim1dSpec) -> Result<Sim1d> {
    spec.validate()?;
    let (n, p) = (spec.n_samples, spec.n_features);
    let mut w = Array1::zeros(p);
    let mut rng = stream_rng(spec.seed, "sim1d-weights", 0);
    for (&(a, b), &(lo, hi)) in spec.supports.iter().zip(&spec.weight_ranges) {
        let law = Uniform::new(lo, hi).map_err(|e| Error::invalid(e.to_string()))?;
        for j in a..=b {
            w[j] = law.sample(&mut rng);
        }
    }
    let mut rng = stream_rng(spec.seed, "sim1d-design", 0);
    let x = Array2::from_shape_fn((n, p), |_| StandardNormal.sample(&mut rng));
    let mut rng = stream_rng(spec.seed, "sim1d-noise", 0);
    let noise = Array1::from_shape_fn(n, |_| {
        let e: f64 = StandardNormal.sample(&mut rng);
        spec.noise_std * e
    });
    let y = x.dot(&w) + noise;
    Ok(Sim1d {
        dataset: Dataset::regression(x, y)?,
        weights: w,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sim3dSpec {
    pub n_samples: usize,
    pub dims: [usize; 3],
    /// Lowest corner of each cubic region.
    pub roi_corners: Vec<[usize; 3]>,
    pub roi_size: usize,
    pub roi_weights: Vec<f64>,
    pub smoothing_sigma: f64,
    /// `None` means noiseless.
    pub snr_db: Option<f64>,
    pub seed: u64,
}

impl Default for Sim3dSpec {
    fn default() -> Self {
        Sim3dSpec {
            n_samples: 100,
            dims: [12, 12, 12],
            roi_corners: vec![[2, 2, 2], [2, 8, 8], [8, 2, 8], [8, 8, 2]],
            roi_size: 2,
            roi_weights: vec![-0.5, 0.5, -0.5, 0.5],
            smoothing_sigma: 2.0,
            snr_db: Some(5.0),
            seed: 0,
        }
    }
}

impl Sim3dSpec {
    pub fn with_seed(seed: u64) -> Self {
        Sim3dSpec {
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_samples < 2 {
            return Err(Error::invalid("at least two images are needed"));
        }
        if self.dims.contains(&0) || self.roi_size == 0 {
            return Err(Error::invalid("grid dimensions and ROI size must be positive"));
        }
        if self.roi_corners.is_empty() || self.roi_corners.len() != self.roi_weights.len() {
            return Err(Error::invalid("one weight is needed per ROI"));
        }
        if self.roi_weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::invalid("ROI weights must be finite"));
        }
        if let Some(snr) = self.snr_db {
            if !snr.is_finite() {
                return Err(Error::invalid("snr_db must be finite (omit it for no noise)"));
            }
        }
        if !(self.smoothing_sigma > 0.0 && self.smoothing_sigma.is_finite()) {
            return Err(Error::invalid("smoothing sigma must be positive"));
        }
        let mut seen = vec![false; self.dims.iter().product()];
        for c in &self.roi_corners {
            for a in 0..3 {
                if c[a] + self.roi_size > self.dims[a] {
                    return Err(Error::invalid(format!("ROI at {c:?} leaves the volume")));
                }
            }
            for v in self.roi_cells(c) {
                if std::mem::replace(&mut seen[v], true) {
                    return Err(Error::invalid("ROIs overlap"));
                }
            }
        }
        Ok(())
    }

    fn roi_cells(&self, corner: &[usize; 3]) -> Vec<usize> {
        let [dx, dy, _] = self.dims;
        let s = self.roi_size;
        let mut out = Vec::with_capacity(s * s * s);
        for z in corner[2]..corner[2] + s {
            for y in corner[1]..corner[1] + s {
                for x in corner[0]..corner[0] + s {
                    out.push(x + dx * (y + dy * z));
                }
            }
        }
        out
    }

    /// Features inside any ROI, ascending.
    pub fn roi_features(&self) -> Vec<usize> {
        let mut out: Vec<usize> = self.roi_corners.iter().flat_map(|c| self.roi_cells(c)).collect();
        out.sort_unstable();
        out
    }

    pub fn grid(&self) -> Result<VoxelGrid> {
        VoxelGrid::full(self.dims)
    }

    pub fn true_weights(&self) -> Array1<f64> {
        let mut w = Array1::zeros(self.dims.iter().product::<usize>());
        for (c, &wt) in self.roi_corners.iter().zip(&self.roi_weights) {
            for v in self.roi_cells(c) {
                w[v] = wt;
            }
        }
        w
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sim3d {
    pub train: Dataset,
    pub test: Dataset,
    pub true_weights: WeightMap,
    /// Active ROI features per image.
    pub train_supports: Vec<Vec<usize>>,
    pub test_supports: Vec<Vec<usize>>,
    pub train_noise_std: f64,
    pub test_noise_std: f64,
}

/// One set of images with per-image active supports and the noise std used.
pub struct ImageSet {
    pub dataset: Dataset,
    pub supports: Vec<Vec<usize>>,
    pub noise_std: f64,
    pub noiseless: Array1<f64>,
}

/// Generates one set of images from the stream `stream`.
pub fn simulate_images(spec: &Sim3dSpec, stream: &str) -> Result<ImageSet> {
    spec.validate()?;
    let p: usize = spec.dims.iter().product();
    let n = spec.n_samples;
    let seed = derive_seed(spec.seed, stream, 0);
    let roi = spec.roi_features();
    let w = spec.true_weights();
    let half = roi.len() / 2;
    let images: Vec<(Vec<f64>, Vec<usize>, f64)> = (0..n)
        .into_par_iter()
        .map(|l| {
            let mut rng = stream_rng(seed, "image", l as u64);
            let raw: Vec<f64> = (0..p).map(|_| StandardNormal.sample(&mut rng)).collect();
            let vol = gaussian_smooth(&raw, spec.dims, spec.smoothing_sigma).expect("validated sigma");
            let mut active: Vec<usize> = sample(&mut rng, roi.len(), half).into_iter().map(|k| roi[k]).collect();
            active.sort_unstable();
            let signal = active.iter().map(|&v| w[v] * vol[v]).sum();
            (vol, active, signal)
        })
        .collect();
    let mut x = Array2::zeros((n, p));
    let mut noiseless = Array1::zeros(n);
    let mut supports = Vec::with_capacity(n);
    for (l, (vol, active, signal)) in images.into_iter().enumerate() {
        x.row_mut(l).assign(&Array1::from(vol));
        noiseless[l] = signal;
        supports.push(active);
    }
    let noise_std = match spec.snr_db {
        Some(snr) => noiseless.dot(&noiseless).sqrt() / ((n as f64).sqrt() * 10f64.powf(snr / 20.0)),
        None => 0.0,
    };
    let mut rng = stream_rng(seed, "noise", 0);
    let y = Array1::from_shape_fn(n, |l| {
        let e: f64 = rng.sample(StandardNormal);
        noiseless[l] + noise_std * e
    });
    Ok(ImageSet {
        dataset: Dataset::regression(x, y)?,
        supports,
        noise_std,
        noiseless,
    })
}

pub fn simulate_3d(spec: &Sim3dSpec) -> Result<Sim3d> {
    let train = simulate_images(spec, "sim3d-train")?;
    let test = simulate_images(spec, "sim3d-test")?;
    Ok(Sim3d {
        train: train.dataset,
        test: test.dataset,
        true_weights: WeightMap::new(spec.true_weights(), spec.grid()?)?,
        train_supports: train.supports,
        test_supports: test.supports,
        train_noise_std: train.noise_std,
        test_noise_std: test.noise_std,
    })
}

/// Normalized Gaussian kernel truncated at 4 sigma.
pub fn gaussian_kernel(sigma: f64) -> Result<Vec<f64>> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::invalid(format!("sigma must be positive, got {sigma}")));
    }
    let radius = (4.0 * sigma).ceil() as i64;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= total);
    Ok(k)
}

/// Separable Gaussian smoothing of an x-fastest volume with zero padding.
pub fn gaussian_smooth(volume: &[f64], dims: [usize; 3], sigma: f64) -> Result<Vec<f64>> {
    let len: usize = dims.iter().product();
    if volume.len() != len {
        return Err(Error::invalid(format!(
            "volume has {} values, dims {dims:?} need {len}",
            volume.len()
        )));
    }
    let kernel = gaussian_kernel(sigma)?;
    let r = (kernel.len() / 2) as i64;
    let strides = [1, dims[0], dims[0] * dims[1]];
    let mut cur = volume.to_vec();
    let mut next = vec![0.0; len];
    for axis in 0..3 {
        let (d, stride) = (dims[axis] as i64, strides[axis]);
        for (idx, out) in next.iter_mut().enumerate() {
            let pos = ((idx / stride) % dims[axis]) as i64;
            let lo = (pos - r).max(0);
            let hi = (pos + r).min(d - 1);
            let mut acc = 0.0;
            for q in lo..=hi {
                let src = (idx as i64 + (q - pos) * stride as i64) as usize;
                acc += kernel[(q - pos + r) as usize] * cur[src];
            }
            *out = acc;
        }
        std::mem::swap(&mut cur, &mut next);
    }
    Ok(cur)
}

/// `20 log10(|signal| / |noise|)`.
pub fn realized_snr_db(noiseless: &Array1<f64>, y: &Array1<f64>) -> f64 {
    let noise = y - noiseless;
    20.0 * (noiseless.dot(noiseless).sqrt() / noise.dot(&noise).sqrt()).log10()
}
