//! Differentiable renderer for the hybrid scene.
//!
//! Objects are 2D Gaussian surfels splatted front to back in 16x16 pixel
//! tiles; the room shell is ray-cast polygon by polygon and textured by a
//! multiresolution hash field. The two are fused per pixel by depth.
//! [`backward`] returns exact gradients of the fused maps with the per-pixel
//! sort order and the fusion branch held fixed.

mod background;
mod camera;
mod composite;
mod field;
pub mod fdcheck;
mod splat;

pub use background::{render_background, render_layout_solid};
pub use camera::Camera;
pub use composite::{composite, normalize_or_zero};
pub use field::{BackgroundField, FieldConfig};

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::Vector2;

use crate::scene::{ObjectGaussians, RoomShell, SemanticPalette};
use crate::Vec3;

/// Tile edge in pixels.
pub const TILE: usize = 16;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RenderError {
    #[error("invalid camera: {0}")]
    BadCamera(&'static str),
    #[error("upstream gradient is {got_w}x{got_h}, render is {want_w}x{want_h}")]
    ShapeMismatch { want_w: usize, want_h: usize, got_w: usize, got_h: usize },
    #[error("gradient buffers do not match the parameter set")]
    ParamMismatch,
}

/// Splatting constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderSettings {
    /// Gaussians are cut at this many standard deviations.
    pub cutoff_sigma: f64,
    /// Upper clamp on a single primitive's alpha.
    pub alpha_max: f64,
    /// Compositing stops once transmittance drops below this.
    pub min_transmittance: f64,
    /// Intersections closer than this (camera z) are ignored.
    pub near: f64,
}

impl Default for RenderSettings {
    fn default() -> Self {
        Self { cutoff_sigma: 3.0, alpha_max: 0.999, min_transmittance: 1e-4, near: 0.01 }
    }
}

/// Co-registered per-pixel maps, row-major.
///
/// `normal` is camera space (x right, y down, z forward) and `depth` is
/// camera z; pixels where nothing was hit have zero normal and infinite
/// depth. The same type carries upstream gradients for [`backward`].
#[derive(Debug, Clone, PartialEq)]
pub struct RenderBundle {
    pub width: usize,
    pub height: usize,
    pub color: Vec<Vec3>,
    pub alpha: Vec<f64>,
    pub semantic: Vec<Vec3>,
    pub normal: Vec<Vec3>,
    pub depth: Vec<f64>,
}

impl RenderBundle {
    /// Nothing hit anywhere.
    pub fn empty(width: usize, height: usize) -> Self {
        let n = width * height;
        Self {
            width,
            height,
            color: vec![Vec3::zeros(); n],
            alpha: vec![0.0; n],
            semantic: vec![Vec3::zeros(); n],
            normal: vec![Vec3::zeros(); n],
            depth: vec![f64::INFINITY; n],
        }
    }

    /// All maps zero, including depth. The natural upstream-gradient seed.
    pub fn zeros(width: usize, height: usize) -> Self {
        Self { depth: vec![0.0; width * height], ..Self::empty(width, height) }
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Inverse depth with the no-hit sentinel mapped to 0.
    pub fn inverse_depth(&self) -> Vec<f64> {
        self.depth.iter().map(|&d| if d.is_finite() && d > 0.0 { 1.0 / d } else { 0.0 }).collect()
    }

    fn check_shape(&self, width: usize, height: usize) -> Result<(), RenderError> {
        let n = width * height;
        let ok = self.width == width
            && self.height == height
            && [self.color.len(), self.alpha.len(), self.semantic.len(), self.normal.len(), self.depth.len()]
                .iter()
                .all(|&l| l == n);
        if ok {
            Ok(())
        } else {
            Err(RenderError::ShapeMismatch { want_w: width, want_h: height, got_w: self.width, got_h: self.height })
        }
    }
}

/// The room shell with its appearance field, as seen by the renderer.
#[derive(Debug, Clone, Copy)]
pub struct Background<'a> {
    pub shell: &'a RoomShell,
    pub field: &'a BackgroundField,
    pub palette: &'a SemanticPalette,
}

/// Everything [`render`] and [`backward`] need about a scene. Objects must
/// already be in world space.
#[derive(Debug, Clone, Copy)]
pub struct SceneView<'a> {
    pub objects: &'a [ObjectGaussians],
    pub background: Option<Background<'a>>,
}

/// Gradient of one surfel. `rotation` is with respect to a small world-space
/// rotation vector applied on the left of the orientation.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SurfelGrad {
    pub position: Vec3,
    pub rotation: Vec3,
    pub scale: Vector2<f64>,
    pub opacity: f64,
    pub color: Vec3,
}

impl core::ops::AddAssign for SurfelGrad {
    fn add_assign(&mut self, o: Self) {
        self.position += o.position;
        self.rotation += o.rotation;
        self.scale += o.scale;
        self.opacity += o.opacity;
        self.color += o.color;
    }
}

/// Dense gradients for a [`BackgroundField`], laid out like its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldGrad {
    pub tables: Vec<f64>,
    pub weight: Vec<f64>,
    pub bias: Vec3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamGradients {
    /// Mirrors `SceneView::objects` surfel for surfel.
    pub objects: Vec<Vec<SurfelGrad>>,
    pub field: Option<FieldGrad>,
}

impl ParamGradients {
    pub fn zeros(view: &SceneView<'_>) -> Self {
        Self {
            objects: view.objects.iter().map(|o| vec![SurfelGrad::default(); o.len()]).collect(),
            field: view.background.map(|b| b.field.zero_grad()),
        }
    }

    pub fn is_zero(&self) -> bool {
        let z = SurfelGrad::default();
        self.objects.iter().flatten().all(|g| *g == z)
            && self.field.as_ref().is_none_or(|f| {
                f.tables.iter().chain(&f.weight).all(|&v| v == 0.0) && f.bias == Vec3::zeros()
            })
    }
}

/// Objects-only maps. Color, semantics, depth and normal are normalized by
/// the accumulated opacity, so a fully covered pixel shows the primitive's
/// own values.
pub fn render_objects(objects: &[ObjectGaussians], cam: &Camera, settings: &RenderSettings) -> RenderBundle {
    splat::render(objects, cam, settings)
}

/// Fused render of the whole scene.
pub fn render(view: &SceneView<'_>, cam: &Camera, settings: &RenderSettings) -> RenderBundle {
    let obj = render_objects(view.objects, cam, settings);
    let bg = match view.background {
        Some(b) => render_background(b.shell, b.field, b.palette, cam),
        None => RenderBundle::empty(cam.width as usize, cam.height as usize),
    };
    composite(&obj, &bg)
}

/// Vector-Jacobian product of [`render`]: gradients of `sum(upstream * bundle)`
/// with respect to every surfel and field parameter.
pub fn backward(
    view: &SceneView<'_>,
    cam: &Camera,
    settings: &RenderSettings,
    upstream: &RenderBundle,
) -> Result<ParamGradients, RenderError> {
    upstream.check_shape(cam.width as usize, cam.height as usize)?;
    Ok(splat::backward(view, cam, settings, upstream))
}
