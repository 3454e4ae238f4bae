#[allow(unused_imports)] // inherent under std, trait-provided without it
use num_traits::Float;

use super::provider::predict_checked;
use super::{ConditionSet, NoiseSchedule, ProviderError, ScoreProvider, Stage, Tensor};

/// z_t = √ᾱ_t·z0 + √(1 − ᾱ_t)·ε. Panics if shapes differ or `t > T`.
pub fn add_noise(schedule: &NoiseSchedule, z0: &Tensor, t: usize, eps: &Tensor) -> Tensor {
    let a = schedule.alpha_bar(t);
    let (sa, sn) = (a.sqrt(), (1.0 - a).sqrt());
    z0.zip(eps, |x, e| sa * x + sn * e)
}

/// Clean-sample estimate x̂0 = (z_t − √(1 − ᾱ_t)·ε̂) / √ᾱ_t.
pub fn predict_x0(schedule: &NoiseSchedule, z_t: &Tensor, t: usize, eps: &Tensor) -> Tensor {
    let a = schedule.alpha_bar(t);
    let (sa, sn) = (a.sqrt(), (1.0 - a).sqrt());
    z_t.zip(eps, |z, e| (z - sn * e) / sa)
}

/// Runs `c` deterministic (η = 0) DDIM steps of size one from `t` down to
/// `t − c`, using the provider's schedule.
pub fn ddim_estimate<P: ScoreProvider + ?Sized>(
    provider: &P,
    stage: Stage,
    z_t: &Tensor,
    t: usize,
    c: usize,
    cond: &ConditionSet,
) -> Result<Tensor, ProviderError> {
    if c > t {
        return Err(ProviderError::TooManySteps { c, t });
    }
    let schedule = provider.schedule();
    schedule.check(t).map_err(|_| ProviderError::Timestep { t, max: schedule.steps() })?;
    let mut z = z_t.clone();
    for s in (t - c + 1..=t).rev() {
        let eps = predict_checked(provider, stage, &z, s, cond)?;
        let x0 = predict_x0(schedule, &z, s, &eps);
        let a = schedule.alpha_bar(s - 1);
        let (sa, sn) = (a.sqrt(), (1.0 - a).sqrt());
        z = x0.zip(&eps, |x, e| sa * x + sn * e);
    }
    Ok(z)
}
