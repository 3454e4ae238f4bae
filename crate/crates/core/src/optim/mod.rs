//! Two-stage distillation loop.
//!
//! Stage one refines surfel geometry (position, orientation, scale,
//! opacity) against a geometry score provider; stage two generates
//! appearance (surfel colors and the background field) against an
//! appearance provider plus a reconstruction term. Each stage can only reach
//! its own parameter group.

mod adam;
pub mod images;
mod source;
mod state;
mod step;

pub use adam::Adam;
pub use source::{LayoutGeometryOracle, ProviderSource};
pub use state::{
    AppearanceParams, CanonicalGrad, GeometryParams, ObjectSlot, SceneState, StageMarker, SurfelGeometry, WorldScene,
};
pub use step::{
    gsds_residual, gsds_step, isd_step, isd_terms, run_stage1, run_stage2, AppearanceOptimizer, GeometryOptimizer,
    IsdTerms, LearningRates, Observer, StageConfig, StepReport,
};

use crate::diffusion::ProviderError;
use crate::render::RenderError;
use crate::sampler::SamplerError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OptimError {
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error("non-finite values in {0}")]
    NonFinite(&'static str),
    #[error("invalid configuration: {0}")]
    Config(&'static str),
    #[error("scene does not match layout: {0}")]
    Layout(&'static str),
    #[error("stage order: {0}")]
    StageOrder(&'static str),
}
