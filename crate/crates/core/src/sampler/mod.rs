//! Layout-aware camera sampling.
//!
//! Positions are drawn with probability proportional to the positive part of
//! a truncated signed distance field of the layout, so cameras stay in free
//! space and prefer clearance. Orientations aim at the boxes: elevation and
//! azimuth are Gaussian around the statistics of the directions to every box
//! center.

use alloc::vec::Vec;

#[allow(unused_imports)] // inherent under std, trait-provided without it
use num_traits::Float;
use rand::distr::weighted::WeightedIndex;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use crate::render::Camera;
use crate::scene::SemanticLayout;
use crate::{seeded_rng, Rng, Vec3};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SamplerError {
    #[error("voxel size and truncation must be positive")]
    BadGrid,
    #[error("room has zero volume")]
    DegenerateRoom,
    #[error("no free space: every TSDF value is <= 0")]
    NoFreeSpace,
    #[error("position coincides with every box center")]
    NoDirections,
    #[error("camera count must be at least 1")]
    ZeroCount,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplerConfig {
    pub voxel: f64,
    pub tau: f64,
    /// Standard-deviation floor for both angles, radians.
    pub sigma_min: f64,
    /// Elevation is kept this far from the poles.
    pub pole_margin: f64,
    pub fov_y: f64,
    pub width: u32,
    pub height: u32,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            voxel: 0.1,
            tau: 1.0,
            sigma_min: 5f64.to_radians(),
            pole_margin: 1e-3,
            fov_y: 60f64.to_radians(),
            width: 64,
            height: 64,
        }
    }
}

/// Dense TSDF sampled at voxel centers over the room's bounding box.
/// Positive in free space, negative inside boxes or outside the shell.
#[derive(Debug, Clone, PartialEq)]
pub struct TsdfGrid {
    origin: Vec3,
    voxel: f64,
    dims: [usize; 3],
    tau: f64,
    values: Vec<f64>,
}

impl TsdfGrid {
    pub fn origin(&self) -> &Vec3 {
        &self.origin
    }

    pub fn voxel(&self) -> f64 {
        self.voxel
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    pub fn center(&self, idx: usize) -> Vec3 {
        let i = idx % self.dims[0];
        let j = (idx / self.dims[0]) % self.dims[1];
        let k = idx / (self.dims[0] * self.dims[1]);
        self.origin + Vec3::new(i as f64 + 0.5, j as f64 + 0.5, k as f64 + 0.5) * self.voxel
    }

    /// Voxel containing `p`, if inside the grid.
    pub fn locate(&self, p: &Vec3) -> Option<usize> {
        let mut c = [0usize; 3];
        for a in 0..3 {
            let f = ((p[a] - self.origin[a]) / self.voxel).floor();
            if !(f >= 0.0 && (f as usize) < self.dims[a]) {
                return None;
            }
            c[a] = f as usize;
        }
        Some(self.index(c[0], c[1], c[2]))
    }
}

/// Truncated signed distance of a single point.
pub fn tsdf_at(layout: &SemanticLayout, p: &Vec3, tau: f64) -> f64 {
    layout.free_space_distance(p).clamp(-tau, tau)
}

pub fn build_tsdf(layout: &SemanticLayout, voxel: f64, tau: f64) -> Result<TsdfGrid, SamplerError> {
    if !(voxel > 0.0 && tau > 0.0) {
        return Err(SamplerError::BadGrid);
    }
    let (lo, hi) = layout.room().bounds();
    let ext = hi - lo;
    if ext.iter().any(|&e| !(e > 0.0)) {
        return Err(SamplerError::DegenerateRoom);
    }
    let dims = [0, 1, 2].map(|a| ((ext[a] / voxel).ceil() as usize).max(1));
    let mut grid = TsdfGrid { origin: lo, voxel, dims, tau, values: Vec::new() };
    let slices: Vec<usize> = (0..dims[2]).collect();
    let per_slice = crate::par::map_ordered(&slices, |&k| {
        let mut out = Vec::with_capacity(dims[0] * dims[1]);
        for j in 0..dims[1] {
            for i in 0..dims[0] {
                let c = lo + Vec3::new(i as f64 + 0.5, j as f64 + 0.5, k as f64 + 0.5) * voxel;
                out.push(tsdf_at(layout, &c, tau));
            }
        }
        out
    });
    grid.values = per_slice.into_iter().flatten().collect();
    Ok(grid)
}

/// Position distribution over voxels, `p = max(0, v) / sum max(0, v)`.
#[derive(Debug, Clone)]
pub struct CameraDistribution {
    probs: Vec<f64>,
    cells: Vec<usize>,
    picker: WeightedIndex<f64>,
}

impl CameraDistribution {
    /// Probability of each voxel, in grid order.
    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    /// A voxel index drawn from the distribution.
    pub fn sample_voxel(&self, rng: &mut Rng) -> usize {
        self.cells[self.picker.sample(rng)]
    }
}

pub fn position_distribution(grid: &TsdfGrid) -> Result<CameraDistribution, SamplerError> {
    let total: f64 = grid.values.iter().map(|v| v.max(0.0)).sum();
    if !(total > 0.0) {
        return Err(SamplerError::NoFreeSpace);
    }
    let probs: Vec<f64> = grid.values.iter().map(|v| v.max(0.0) / total).collect();
    let cells: Vec<usize> = (0..probs.len()).filter(|&i| probs[i] > 0.0).collect();
    let picker = WeightedIndex::new(cells.iter().map(|&i| probs[i])).map_err(|_| SamplerError::NoFreeSpace)?;
    Ok(CameraDistribution { probs, cells, picker })
}

/// Uniform point in the voxel, shrunk toward its center so that the exact
/// TSDF stays positive (the distance field is 1-Lipschitz).
pub fn sample_position(grid: &TsdfGrid, dist: &CameraDistribution, rng: &mut Rng) -> Vec3 {
    let idx = dist.sample_voxel(rng);
    let value = grid.values[idx];
    let half_diag = 0.5 * 3f64.sqrt() * grid.voxel;
    let shrink = (value / half_diag).min(1.0) * 0.999;
    let jitter = Vec3::from_fn(|_, _| rng.random_range(-0.5..0.5)) * (grid.voxel * shrink);
    grid.center(idx) + jitter
}

/// Direction statistics toward the box centers seen from `x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleStats {
    pub elevation_mean: f64,
    pub elevation_var: f64,
    /// Circular mean azimuth.
    pub azimuth_mean: f64,
    /// Mean squared wrapped deviation from the circular mean.
    pub azimuth_var: f64,
    pub used: usize,
}

pub fn angle_stats(layout: &SemanticLayout, x: &Vec3) -> Result<AngleStats, SamplerError> {
    let mut el = Vec::new();
    let mut az = Vec::new();
    for b in layout.boxes() {
        let v = b.translation() - x;
        let len = v.norm();
        if !(len > 1e-9) {
            continue;
        }
        el.push((v.z / len).clamp(-1.0, 1.0).asin());
        az.push(v.y.atan2(v.x));
    }
    if el.is_empty() {
        return Err(SamplerError::NoDirections);
    }
    let n = el.len() as f64;
    let em = el.iter().sum::<f64>() / n;
    let ev = el.iter().map(|e| (e - em) * (e - em)).sum::<f64>() / n;
    let (s, c) = az.iter().fold((0.0, 0.0), |(s, c), a| (s + a.sin(), c + a.cos()));
    let am = if s.abs() < 1e-12 && c.abs() < 1e-12 { 0.0 } else { s.atan2(c) };
    let av = az.iter().map(|a| wrap(a - am).powi(2)).sum::<f64>() / n;
    Ok(AngleStats { elevation_mean: em, elevation_var: ev, azimuth_mean: am, azimuth_var: av, used: el.len() })
}

/// Wraps an angle to `(-pi, pi]`.
pub fn wrap(a: f64) -> f64 {
    use core::f64::consts::{PI, TAU};
    let mut r = a % TAU;
    if r > PI {
        r -= TAU;
    } else if r <= -PI {
        r += TAU;
    }
    r
}

/// `(elevation, azimuth)` drawn around the box-direction statistics.
pub fn sample_orientation(layout: &SemanticLayout, x: &Vec3, config: &SamplerConfig, rng: &mut Rng) -> Result<(f64, f64), SamplerError> {
    let st = angle_stats(layout, x)?;
    let floor = config.sigma_min * config.sigma_min;
    let se = st.elevation_var.max(floor).sqrt();
    let sa = st.azimuth_var.max(floor).sqrt();
    let z1: f64 = StandardNormal.sample(rng);
    let z2: f64 = StandardNormal.sample(rng);
    let lim = core::f64::consts::FRAC_PI_2 - config.pole_margin;
    Ok(((st.elevation_mean + se * z1).clamp(-lim, lim), wrap(st.azimuth_mean + sa * z2)))
}

/// Precomputed grid and distribution for repeated sampling.
#[derive(Debug, Clone)]
pub struct CameraSampler {
    pub config: SamplerConfig,
    grid: TsdfGrid,
    dist: CameraDistribution,
}

impl CameraSampler {
    pub fn new(layout: &SemanticLayout, config: SamplerConfig) -> Result<Self, SamplerError> {
        let grid = build_tsdf(layout, config.voxel, config.tau)?;
        let dist = position_distribution(&grid)?;
        Ok(Self { config, grid, dist })
    }

    pub fn grid(&self) -> &TsdfGrid {
        &self.grid
    }

    pub fn distribution(&self) -> &CameraDistribution {
        &self.dist
    }

    pub fn sample(&self, layout: &SemanticLayout, rng: &mut Rng) -> Result<Camera, SamplerError> {
        let x = sample_position(&self.grid, &self.dist, rng);
        let (e, a) = sample_orientation(layout, &x, &self.config, rng)?;
        Ok(Camera::new(x, e, a, self.config.fov_y, self.config.width, self.config.height).expect("sampler config yields valid cameras"))
    }

    /// `n` cameras; camera `i` uses its own substream of `seed`, so the list
    /// does not depend on evaluation order.
    pub fn sample_n(&self, layout: &SemanticLayout, n: usize, seed: u64) -> Result<Vec<Camera>, SamplerError> {
        if n == 0 {
            return Err(SamplerError::ZeroCount);
        }
        let ids: Vec<u64> = (0..n as u64).collect();
        crate::par::map_ordered(&ids, |&i| self.sample(layout, &mut seeded_rng(seed, CAMERA_STREAM + i))).into_iter().collect()
    }
}

const CAMERA_STREAM: u64 = 1 << 40;

pub fn sample_cameras(layout: &SemanticLayout, n: usize, config: &SamplerConfig, seed: u64) -> Result<Vec<Camera>, SamplerError> {
    CameraSampler::new(layout, *config)?.sample_n(layout, n, seed)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageReport {
    /// Cameras whose frustum contains each box center, in box order.
    pub box_visibility: Vec<usize>,
    /// Fraction of free voxels whose center lies in at least one frustum.
    pub free_voxel_coverage: f64,
    /// Smallest distance from a camera to any surface (infinite if none).
    pub min_surface_distance: f64,
}

pub fn coverage_report(cameras: &[Camera], layout: &SemanticLayout, grid: &TsdfGrid) -> CoverageReport {
    let box_visibility = layout.boxes().iter().map(|b| cameras.iter().filter(|c| c.sees(b.translation())).count()).collect();
    let free: Vec<usize> = (0..grid.values.len()).filter(|&i| grid.values[i] > 0.0).collect();
    let seen = crate::par::map_ordered(&free, |&i| {
        let p = grid.center(i);
        cameras.iter().any(|c| c.sees(&p))
    });
    let covered = seen.iter().filter(|&&s| s).count();
    CoverageReport {
        box_visibility,
        free_voxel_coverage: if free.is_empty() { 0.0 } else { covered as f64 / free.len() as f64 },
        min_surface_distance: cameras.iter().map(|c| layout.free_space_distance(&c.position)).fold(f64::INFINITY, f64::min),
    }
}
