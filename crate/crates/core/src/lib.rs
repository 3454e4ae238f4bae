//! Layout-guided hybrid scene optimization.
//!
//! A room is described by a [`scene::SemanticLayout`]: oriented, labelled
//! boxes inside a polygonal shell. Objects are represented by 2D Gaussian
//! surfels living in each box's canonical cube, the shell by planar polygons
//! textured with a multiresolution hash field. The crate provides the
//! differentiable renderer for that hybrid scene, layout-aware camera
//! sampling, the diffusion-side machinery (schedules, codecs, score
//! providers, DDIM) and the two-stage distillation loop that refines
//! geometry first and appearance second.
//!
//! The crate is `no_std` (it needs `alloc`). The default `std` feature only
//! switches float math to the platform implementation and enables
//! tile-parallel rendering through rayon.

#![no_std]

extern crate alloc;

pub mod diffusion;
pub mod fixtures;
pub mod geom;
pub mod init;
pub mod metrics;
pub mod optim;
pub mod render;
pub mod sampler;
pub mod scene;

mod par;

pub use nalgebra;

/// World and canonical 3-vectors.
pub type Vec3 = nalgebra::Vector3<f64>;
/// Rotations and tangent frames.
pub type Mat3 = nalgebra::Matrix3<f64>;

/// Deterministic RNG used everywhere a seed is accepted.
pub type Rng = rand_chacha::ChaCha8Rng;

/// Builds the crate RNG from a seed and a stream tag.
///
/// Distinct tags give independent streams for the same seed, so that e.g.
/// per-box initialization does not depend on how many boxes came before.
pub fn seeded_rng(seed: u64, stream: u64) -> Rng {
    use rand::SeedableRng;
    let mut rng = Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
