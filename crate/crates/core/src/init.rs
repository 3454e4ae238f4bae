//! Initial canonical-space surfels for each layout box.
//!
//! Positions come from a procedural shape or a supplied point cloud; the
//! remaining attributes get fixed starting values (random frames, radii
//! tied to point spacing, constant opacity and color).
#[allow(unused_imports)] // inherent under std, trait-provided without it
use num_traits::Float;
use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::{UnitQuaternion, Vector2};
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use crate::scene::{ObjectGaussians, SemanticBox, SemanticLayout, SemanticPalette, Surfel};
use crate::{seeded_rng, Rng, Vec3};

/// Procedural point distributions inside the canonical cube.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShapeFamily {
    /// Uniform in the whole cube.
    BoxFill,
    /// Uniform in the inscribed ellipsoid.
    Ellipsoid,
    /// Uniform in a 0.2-thick layer resting on the cube floor.
    FlatSlab,
}

/// Slab thickness as a fraction of the canonical z extent.
pub const SLAB_THICKNESS: f64 = 0.2;

#[derive(Debug, Clone, PartialEq)]
pub enum InitSource {
    Procedural { shape: ShapeFamily, count: usize },
    /// Points in arbitrary units; rescaled into the canonical cube. At most
    /// `cap` points are kept.
    PointCloud { points: Vec<Vec3>, cap: usize },
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum InitError {
    #[error("point count must be at least 1")]
    ZeroCount,
    #[error("point cloud is empty")]
    EmptyPointCloud,
    #[error("point cloud contains non-finite coordinates")]
    NonFinite,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitConfig {
    /// Points per procedural object when no per-label source is configured.
    pub default_count: usize,
    /// Radius multiplier `k` on the mean nearest-neighbor distance.
    pub scale_factor: f64,
    pub opacity: f64,
    pub color: f64,
    /// Per-label sources; labels not listed get box-fill.
    pub sources: Vec<(String, InitSource)>,
    pub seed: u64,
}

impl Default for InitConfig {
    fn default() -> Self {
        Self { default_count: 1000, scale_factor: 1.0, opacity: 0.8, color: 0.5, sources: Vec::new(), seed: 0 }
    }
}

/// Surfels for one box, deterministic in `seed`.
pub fn init_object(
    b: &SemanticBox,
    source: &InitSource,
    palette: &SemanticPalette,
    config: &InitConfig,
    seed: u64,
) -> Result<ObjectGaussians, InitError> {
    let mut rng = seeded_rng(seed, 0x1417);
    let positions = match source {
        InitSource::Procedural { count: 0, .. } => return Err(InitError::ZeroCount),
        InitSource::Procedural { shape, count } => procedural(*shape, *count, &mut rng),
        InitSource::PointCloud { cap: 0, .. } => return Err(InitError::ZeroCount),
        InitSource::PointCloud { points, cap } => {
            if points.is_empty() {
                return Err(InitError::EmptyPointCloud);
            }
            if points.iter().any(|p| p.iter().any(|c| !c.is_finite())) {
                return Err(InitError::NonFinite);
            }
            let kept: Vec<Vec3> = if points.len() > *cap {
                let mut idx = rand::seq::index::sample(&mut rng, points.len(), *cap).into_vec();
                idx.sort_unstable();
                idx.into_iter().map(|i| points[i]).collect()
            } else {
                points.clone()
            };
            fit_to_canonical(&kept)
        }
    };
    let nn = if positions.len() > 1 { mean_nearest_neighbor(&positions) } else { 0.25 };
    let radius = (config.scale_factor * nn).max(1e-4);
    let semantic = palette.color_unit(b.label());
    let surfels = positions
        .into_iter()
        .map(|position| Surfel {
            position,
            orientation: random_rotation(&mut rng),
            scale: Vector2::new(radius, radius),
            opacity: config.opacity,
            color: Vec3::repeat(config.color),
            semantic,
        })
        .collect();
    Ok(ObjectGaussians { label: String::from(b.label()), surfels })
}

/// One entry per box, in box order.
pub fn init_scene(
    layout: &SemanticLayout,
    palette: &SemanticPalette,
    config: &InitConfig,
) -> Result<Vec<(usize, ObjectGaussians)>, InitError> {
    let fallback = InitSource::Procedural { shape: ShapeFamily::BoxFill, count: config.default_count };
    layout
        .boxes()
        .iter()
        .enumerate()
        .map(|(i, b)| {
            let source = config.sources.iter().find(|(l, _)| l == b.label()).map(|(_, s)| s).unwrap_or(&fallback);
            let seed = config.seed ^ (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
            init_object(b, source, palette, config, seed).map(|o| (i, o))
        })
        .collect()
}

fn procedural(shape: ShapeFamily, count: usize, rng: &mut Rng) -> Vec<Vec3> {
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let p = Vec3::new(rng.random_range(-0.5..=0.5), rng.random_range(-0.5..=0.5), rng.random_range(-0.5..=0.5));
        match shape {
            ShapeFamily::BoxFill => out.push(p),
            ShapeFamily::Ellipsoid => {
                if p.norm_squared() <= 0.25 {
                    out.push(p)
                }
            }
            ShapeFamily::FlatSlab => out.push(Vec3::new(p.x, p.y, -0.5 + (p.z + 0.5) * SLAB_THICKNESS)),
        }
    }
    out
}

/// Centers the cloud and scales it uniformly so its largest extent spans
/// exactly `[-0.5, 0.5]`.
pub fn fit_to_canonical(points: &[Vec3]) -> Vec<Vec3> {
    let mut lo = Vec3::repeat(f64::INFINITY);
    let mut hi = Vec3::repeat(f64::NEG_INFINITY);
    for p in points {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    let center = (lo + hi) * 0.5;
    let extent = (hi - lo).max();
    points
        .iter()
        .map(|p| {
            if extent > 0.0 {
                ((p - center) / extent).map(|c| c.clamp(-0.5, 0.5))
            } else {
                Vec3::zeros()
            }
        })
        .collect()
}

/// Mean distance from each point to its nearest other point.
pub fn mean_nearest_neighbor(points: &[Vec3]) -> f64 {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| points[a].x.total_cmp(&points[b].x));
    let sorted: Vec<Vec3> = order.iter().map(|&i| points[i]).collect();
    let mut total = 0.0;
    for (i, p) in sorted.iter().enumerate() {
        let mut best = f64::INFINITY;
        for q in sorted[i + 1..].iter() {
            if (q.x - p.x) * (q.x - p.x) >= best {
                break;
            }
            best = best.min((q - p).norm_squared());
        }
        for q in sorted[..i].iter().rev() {
            if (q.x - p.x) * (q.x - p.x) >= best {
                break;
            }
            best = best.min((q - p).norm_squared());
        }
        total += best.sqrt();
    }
    total / points.len() as f64
}

fn random_rotation(rng: &mut Rng) -> crate::Mat3 {
    let q: [f64; 4] = core::array::from_fn(|_| StandardNormal.sample(rng));
    let q = nalgebra::Quaternion::new(q[0], q[1], q[2], q[3]);
    let q = if q.norm() > 1e-12 { q } else { nalgebra::Quaternion::identity() };
    UnitQuaternion::from_quaternion(q).to_rotation_matrix().into_inner()
}
