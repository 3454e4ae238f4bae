use alloc::string::String;
use alloc::vec::Vec;

#[allow(unused_imports)] // inherent under std, trait-provided without it
use num_traits::Float;

use super::{Codec, CodecError, NoiseSchedule, Tensor};

/// Which distillation stage a latent belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stage {
    /// 6-channel latents: remapped normal and replicated inverse depth.
    Geometry,
    /// 3-channel RGB latents.
    Appearance,
}

impl Stage {
    pub fn latent_channels(self) -> usize {
        match self {
            Stage::Geometry => 6,
            Stage::Appearance => 3,
        }
    }

    pub fn code(self) -> u8 {
        match self {
            Stage::Geometry => 0,
            Stage::Appearance => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Stage::Geometry),
            1 => Some(Stage::Appearance),
            _ => None,
        }
    }
}

/// The conditioning images a provider may consume.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CondRole {
    Semantic,
    Normal,
    /// Inverse depth, 0 where nothing was hit.
    Depth,
}

impl CondRole {
    pub const ALL: [CondRole; 3] = [CondRole::Semantic, CondRole::Normal, CondRole::Depth];

    pub fn channels(self) -> usize {
        match self {
            CondRole::Semantic | CondRole::Normal => 3,
            CondRole::Depth => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProviderError {
    #[error("provider does not serve the {0:?} stage")]
    UnsupportedStage(Stage),
    #[error("{what}: expected shape {expected:?}, got {actual:?}")]
    Shape { what: &'static str, expected: (usize, usize, usize), actual: (usize, usize, usize) },
    #[error("timestep {t} outside 1..={max}")]
    Timestep { t: usize, max: usize },
    #[error("cannot take {c} DDIM steps from timestep {t}")]
    TooManySteps { c: usize, t: usize },
    #[error("condition {0:?} required but absent")]
    MissingCondition(CondRole),
    #[error("condition images have different resolutions")]
    ConditionSize,
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error("provider returned non-finite values")]
    NonFinite,
    #[error("empty training set")]
    EmptyDataset,
    #[error("transport: {0}")]
    Transport(String),
    #[error("protocol: {0}")]
    Protocol(String),
    #[error("remote error status {status}: {message}")]
    Remote { status: u8, message: String },
}

impl ProviderError {
    /// True for failures of the connection itself, as opposed to a peer that
    /// answered but broke the contract.
    pub fn is_transport(&self) -> bool {
        matches!(self, ProviderError::Transport(_))
    }
}

/// Semantic map plus optional geometry maps, all at one resolution, and the
/// prompt flag choosing between the conditional and unconditional branch.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionSet {
    semantic: Tensor,
    normal: Option<Tensor>,
    depth: Option<Tensor>,
    prompt_present: bool,
}

impl ConditionSet {
    pub fn new(
        semantic: Tensor,
        normal: Option<Tensor>,
        depth: Option<Tensor>,
        prompt_present: bool,
    ) -> Result<Self, ProviderError> {
        let (_, h, w) = semantic.shape();
        let parts = [(CondRole::Semantic, Some(&semantic)), (CondRole::Normal, normal.as_ref()), (CondRole::Depth, depth.as_ref())];
        for (role, t) in parts {
            let Some(t) = t else { continue };
            if t.channels() != role.channels() {
                return Err(ProviderError::Shape {
                    what: "condition channels",
                    expected: (role.channels(), h, w),
                    actual: t.shape(),
                });
            }
            if (t.height(), t.width()) != (h, w) {
                return Err(ProviderError::ConditionSize);
            }
        }
        Ok(Self { semantic, normal, depth, prompt_present })
    }

    pub fn semantic(&self) -> &Tensor {
        &self.semantic
    }

    pub fn normal(&self) -> Option<&Tensor> {
        self.normal.as_ref()
    }

    pub fn depth(&self) -> Option<&Tensor> {
        self.depth.as_ref()
    }

    pub fn get(&self, role: CondRole) -> Option<&Tensor> {
        match role {
            CondRole::Semantic => Some(&self.semantic),
            CondRole::Normal => self.normal.as_ref(),
            CondRole::Depth => self.depth.as_ref(),
        }
    }

    pub fn prompt_present(&self) -> bool {
        self.prompt_present
    }

    /// Image resolution (height, width).
    pub fn size(&self) -> (usize, usize) {
        (self.semantic.height(), self.semantic.width())
    }

    /// Same images with the prompt flag replaced.
    pub fn with_prompt(&self, prompt_present: bool) -> Self {
        Self { prompt_present, ..self.clone() }
    }
}

/// Noise prediction ε̂(z_t, t, conditions).
///
/// Implementations must be deterministic and safe to call concurrently.
/// The provider owns the schedule and codec its latents refer to.
pub trait ScoreProvider: Send + Sync {
    fn supports(&self, stage: Stage) -> bool;
    fn schedule(&self) -> &NoiseSchedule;
    fn codec(&self) -> Codec;
    /// `t` ranges over `1..=T`. The result has the shape of `z_t`.
    fn predict(&self, stage: Stage, z_t: &Tensor, t: usize, cond: &ConditionSet) -> Result<Tensor, ProviderError>;
}

impl<P: ScoreProvider + ?Sized> ScoreProvider for &P {
    fn supports(&self, stage: Stage) -> bool {
        (**self).supports(stage)
    }
    fn schedule(&self) -> &NoiseSchedule {
        (**self).schedule()
    }
    fn codec(&self) -> Codec {
        (**self).codec()
    }
    fn predict(&self, stage: Stage, z_t: &Tensor, t: usize, cond: &ConditionSet) -> Result<Tensor, ProviderError> {
        (**self).predict(stage, z_t, t, cond)
    }
}

impl<P: ScoreProvider + ?Sized> ScoreProvider for alloc::boxed::Box<P> {
    fn supports(&self, stage: Stage) -> bool {
        (**self).supports(stage)
    }
    fn schedule(&self) -> &NoiseSchedule {
        (**self).schedule()
    }
    fn codec(&self) -> Codec {
        (**self).codec()
    }
    fn predict(&self, stage: Stage, z_t: &Tensor, t: usize, cond: &ConditionSet) -> Result<Tensor, ProviderError> {
        (**self).predict(stage, z_t, t, cond)
    }
}

/// Calls `provider` and enforces the output contract: same shape as the
/// input latent, finite values.
pub fn predict_checked<P: ScoreProvider + ?Sized>(
    provider: &P,
    stage: Stage,
    z_t: &Tensor,
    t: usize,
    cond: &ConditionSet,
) -> Result<Tensor, ProviderError> {
    if !provider.supports(stage) {
        return Err(ProviderError::UnsupportedStage(stage));
    }
    let out = provider.predict(stage, z_t, t, cond)?;
    if out.shape() != z_t.shape() {
        return Err(ProviderError::Shape { what: "provider output", expected: z_t.shape(), actual: out.shape() });
    }
    if !out.is_finite() {
        return Err(ProviderError::NonFinite);
    }
    Ok(out)
}

pub(crate) fn check_timestep(schedule: &NoiseSchedule, t: usize) -> Result<(), ProviderError> {
    if (1..=schedule.steps()).contains(&t) {
        Ok(())
    } else {
        Err(ProviderError::Timestep { t, max: schedule.steps() })
    }
}

/// Per-pixel linear map from one condition image into latent channels.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionMix {
    pub role: CondRole,
    /// Row-major `latent_channels x role.channels()`.
    pub weights: Vec<f64>,
}

/// Closed-form provider for a data distribution concentrated at a single
/// point μ(cond):
///
/// μ(cond) = μ_prompt + Σ_k W_k · encode(cond_k)
///
/// where μ_prompt is `mu_y` or `mu_null` depending on the prompt flag. Its
/// prediction ε̂ = (z_t − √ᾱ_t·μ) / √(1 − ᾱ_t) is the exact optimal
/// denoiser for that distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticProvider {
    stage: Stage,
    schedule: NoiseSchedule,
    codec: Codec,
    mu_y: Tensor,
    mu_null: Tensor,
    mix: Vec<ConditionMix>,
}

impl AnalyticProvider {
    pub fn new(stage: Stage, schedule: NoiseSchedule, codec: Codec, mu_y: Tensor, mu_null: Tensor) -> Result<Self, ProviderError> {
        let want = (stage.latent_channels(), mu_y.height(), mu_y.width());
        for mu in [&mu_y, &mu_null] {
            if mu.shape() != want {
                return Err(ProviderError::Shape { what: "target mean", expected: want, actual: mu.shape() });
            }
        }
        Ok(Self { stage, schedule, codec, mu_y, mu_null, mix: Vec::new() })
    }

    /// Same mean for both prompt branches, so the guidance difference is zero.
    pub fn delta(stage: Stage, schedule: NoiseSchedule, codec: Codec, mu: Tensor) -> Result<Self, ProviderError> {
        Self::new(stage, schedule, codec, mu.clone(), mu)
    }

    /// Adds `W · encode(cond[role])` to the mean.
    pub fn with_mix(mut self, role: CondRole, weights: Vec<f64>) -> Result<Self, ProviderError> {
        let n = self.stage.latent_channels() * role.channels();
        if weights.len() != n {
            return Err(ProviderError::Shape {
                what: "condition mix",
                expected: (self.stage.latent_channels(), role.channels(), 1),
                actual: (weights.len(), 1, 1),
            });
        }
        self.mix.push(ConditionMix { role, weights });
        Ok(self)
    }

    pub fn stage(&self) -> Stage {
        self.stage
    }

    pub fn mu_y(&self) -> &Tensor {
        &self.mu_y
    }

    pub fn mu_null(&self) -> &Tensor {
        &self.mu_null
    }

    pub fn mixes(&self) -> &[ConditionMix] {
        &self.mix
    }

    /// μ(cond) in latent space.
    pub fn mean(&self, cond: &ConditionSet) -> Result<Tensor, ProviderError> {
        let mut mu = if cond.prompt_present() { self.mu_y.clone() } else { self.mu_null.clone() };
        let (c, h, w) = mu.shape();
        for m in &self.mix {
            let img = cond.get(m.role).ok_or(ProviderError::MissingCondition(m.role))?;
            let lat = self.codec.encode(img)?;
            if (lat.height(), lat.width()) != (h, w) {
                return Err(ProviderError::Shape {
                    what: "encoded condition",
                    expected: (m.role.channels(), h, w),
                    actual: lat.shape(),
                });
            }
            let k = m.role.channels();
            for o in 0..c {
                for i in 0..k {
                    let wt = m.weights[o * k + i];
                    if wt == 0.0 {
                        continue;
                    }
                    for y in 0..h {
                        for x in 0..w {
                            *mu.at_mut(o, y, x) += wt * lat.at(i, y, x);
                        }
                    }
                }
            }
        }
        Ok(mu)
    }
}

impl ScoreProvider for AnalyticProvider {
    fn supports(&self, stage: Stage) -> bool {
        stage == self.stage
    }

    fn schedule(&self) -> &NoiseSchedule {
        &self.schedule
    }

    fn codec(&self) -> Codec {
        self.codec
    }

    fn predict(&self, stage: Stage, z_t: &Tensor, t: usize, cond: &ConditionSet) -> Result<Tensor, ProviderError> {
        if stage != self.stage {
            return Err(ProviderError::UnsupportedStage(stage));
        }
        check_timestep(&self.schedule, t)?;
        if z_t.shape() != self.mu_y.shape() {
            return Err(ProviderError::Shape { what: "latent", expected: self.mu_y.shape(), actual: z_t.shape() });
        }
        let mu = self.mean(cond)?;
        let a = self.schedule.alpha_bar(t);
        let (sa, sn) = (a.sqrt(), (1.0 - a).sqrt());
        Ok(z_t.zip(&mu, |z, m| (z - sa * m) / sn))
    }
}
