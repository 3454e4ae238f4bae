use alloc::boxed::Box;

use super::images;
use crate::diffusion::{AnalyticProvider, Codec, NoiseSchedule, ProviderError, ScoreProvider, Stage};
use crate::render::{render_layout_solid, Camera};
use crate::scene::{SemanticLayout, SemanticPalette};

/// Hands out the score provider to use for one camera.
///
/// Ordinary providers are view-independent and return themselves; oracles
/// built from a reference scene return a provider targeting that view.
pub trait ProviderSource: Sync {
    fn for_view<'a>(&'a self, cam: &Camera) -> Result<Box<dyn ScoreProvider + 'a>, ProviderError>;
}

impl<P: ScoreProvider> ProviderSource for P {
    fn for_view<'a>(&'a self, _cam: &Camera) -> Result<Box<dyn ScoreProvider + 'a>, ProviderError> {
        Ok(Box::new(self))
    }
}

/// Geometry oracle whose target at every view is the normal and inverse
/// depth of the layout rendered with solid boxes.
#[derive(Debug, Clone)]
pub struct LayoutGeometryOracle {
    layout: SemanticLayout,
    palette: SemanticPalette,
    schedule: NoiseSchedule,
    codec: Codec,
}

impl LayoutGeometryOracle {
    pub fn new(layout: SemanticLayout, palette: SemanticPalette, schedule: NoiseSchedule, codec: Codec) -> Self {
        Self { layout, palette, schedule, codec }
    }

    /// The delta-target provider for one camera.
    pub fn provider(&self, cam: &Camera) -> Result<AnalyticProvider, ProviderError> {
        let target = render_layout_solid(&self.layout, &self.palette, cam);
        let mu = images::encode_geometry(self.codec, &target)?;
        AnalyticProvider::delta(Stage::Geometry, self.schedule.clone(), self.codec, mu)
    }
}

impl ProviderSource for LayoutGeometryOracle {
    fn for_view<'a>(&'a self, cam: &Camera) -> Result<Box<dyn ScoreProvider + 'a>, ProviderError> {
        Ok(Box::new(self.provider(cam)?))
    }
}
