//! Diffusion-side machinery: noise schedules, latent codecs, the score
//! provider contract with its closed-form and trainable implementations,
//! DDIM estimation and the binary frames used by remote providers.

mod codec;
mod ddim;
mod provider;
mod schedule;
mod tensor;
pub mod toy;
pub mod wire;

pub use codec::{Codec, CodecError};
pub use ddim::{add_noise, ddim_estimate, predict_x0};
pub use provider::{
    predict_checked, AnalyticProvider, CondRole, ConditionMix, ConditionSet, ProviderError, ScoreProvider, Stage,
};
pub use schedule::{NoiseSchedule, ScheduleError, ScheduleKind};
pub use tensor::Tensor;
pub use toy::{ToyConfig, ToyDenoiser, ToyPair, ToyReport};
