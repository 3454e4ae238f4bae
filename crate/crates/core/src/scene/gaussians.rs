#[allow(unused_imports)] // inherent under std, trait-provided without it
use num_traits::Float;
use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::Vector2;

use super::layout::SemanticBox;
use crate::{Mat3, Vec3};

/// One 2D Gaussian disk.
///
/// `orientation` columns are the two tangent axes and the disk normal;
/// `scale` holds the standard deviations along the tangent axes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Surfel {
    pub position: Vec3,
    pub orientation: Mat3,
    pub scale: Vector2<f64>,
    pub opacity: f64,
    pub color: Vec3,
    pub semantic: Vec3,
}

impl Surfel {
    pub fn normal(&self) -> Vec3 {
        self.orientation.column(2).into_owned()
    }

    pub fn tangent_u(&self) -> Vec3 {
        self.orientation.column(0).into_owned()
    }

    pub fn tangent_v(&self) -> Vec3 {
        self.orientation.column(1).into_owned()
    }
}

/// The surfels of one object together with its label.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectGaussians {
    pub label: String,
    pub surfels: Vec<Surfel>,
}

impl ObjectGaussians {
    pub fn len(&self) -> usize {
        self.surfels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.surfels.is_empty()
    }

    /// Checks the canonical-space invariants; returns a description of the
    /// first violation.
    pub fn check_canonical(&self) -> Result<(), &'static str> {
        let Some(first) = self.surfels.first() else {
            return Ok(());
        };
        for s in &self.surfels {
            if s.position.iter().any(|c| !(-0.5..=0.5).contains(c)) {
                return Err("position outside the canonical cube");
            }
            if s.scale.iter().any(|&v| !(v > 0.0)) {
                return Err("non-positive scale");
            }
            if !(0.0..=1.0).contains(&s.opacity) {
                return Err("opacity outside [0, 1]");
            }
            if s.color.iter().any(|c| !(0.0..=1.0).contains(c)) {
                return Err("color outside [0, 1]");
            }
            if s.semantic != first.semantic {
                return Err("semantic colors differ within one object");
            }
            let gram = s.orientation.transpose() * s.orientation - Mat3::identity();
            if gram.iter().any(|v| v.abs() > 1e-6) {
                return Err("orientation is not orthonormal");
            }
        }
        Ok(())
    }
}

/// Tangent-radius multiplier for a disk whose canonical tangent axes are the
/// first two columns of `orientation`: the geometric mean of how much the box
/// stretches each axis. Equals the box scale when `size` is isotropic.
pub fn disk_stretch(orientation: &Mat3, size: &Vec3) -> f64 {
    let a = size.component_mul(&orientation.column(0)).norm();
    let b = size.component_mul(&orientation.column(1)).norm();
    (a * b).sqrt()
}

/// Canonical-to-world transform through a box.
///
/// Positions map by `R (size ⊙ p) + t`, frames by `R O`; tangent radii are
/// multiplied by [`disk_stretch`]. Opacity, color and semantics pass through.
pub fn to_world(obj: &ObjectGaussians, b: &SemanticBox) -> ObjectGaussians {
    let r = b.rotation();
    let surfels = obj
        .surfels
        .iter()
        .map(|s| Surfel {
            position: b.canonical_to_world(&s.position),
            orientation: r * s.orientation,
            scale: s.scale * disk_stretch(&s.orientation, b.size()),
            ..*s
        })
        .collect();
    ObjectGaussians { label: obj.label.clone(), surfels }
}
