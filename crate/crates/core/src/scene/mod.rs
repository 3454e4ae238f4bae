//! Layouts, the hybrid scene's object primitives and the semantic palette.

mod gaussians;
mod layout;
mod palette;

pub use gaussians::{disk_stretch, to_world, ObjectGaussians, Surfel};
pub use layout::{
    euler_zyx_deg, BackgroundPolygon, RoomShell, SemanticBox, SemanticLayout, BACKGROUND_LABELS,
};
pub use palette::{PaletteError, Rgb8, SemanticPalette};

use alloc::string::String;

/// Validation failures for layouts and their parts. Each variant names the
/// offending entity.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SceneError {
    #[error("box {index} ({label}): rotation is not a proper rotation ({reason})")]
    BadRotation { index: usize, label: String, reason: &'static str },
    #[error("box {index} ({label}): size components must be positive")]
    BadSize { index: usize, label: String },
    #[error("box {index} ({label}): center lies outside the room shell")]
    BoxOutsideRoom { index: usize, label: String },
    #[error("polygon {index} ({label}): {reason}")]
    BadPolygon { index: usize, label: String, reason: &'static str },
    #[error("room shell is not closed: edge {edge} of polygon {polygon} is shared by {count} polygons")]
    OpenShell { polygon: usize, edge: usize, count: usize },
    #[error("layout has no boxes")]
    NoBoxes,
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
}
