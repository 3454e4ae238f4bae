use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // inherent under std, trait-provided without it
use num_traits::Float;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use super::source::ProviderSource;
use super::state::{rotate_frame, CanonicalGrad, SceneState, StageMarker};
use super::{images, Adam, OptimError};
use crate::diffusion::{
    add_noise, ddim_estimate, predict_checked, predict_x0, ConditionSet, NoiseSchedule, ProviderError, ScoreProvider,
    Stage, Tensor,
};
use crate::render::{backward, render, Camera, FieldGrad, ParamGradients, RenderSettings};
use crate::sampler::{CameraSampler, SamplerConfig};
use crate::{seeded_rng, Rng, Vec3};

const CAMERA_STREAM: u64 = 0x5a_0001;
const DRAW_STREAM: u64 = 0x5a_0002;
const VIEW_STREAM: u64 = 0x5a_0003;

/// Per-group Adam step sizes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearningRates {
    /// Canonical position rate, decayed exponentially from start to end.
    pub position_start: f64,
    pub position_end: f64,
    pub orientation: f64,
    /// Applied to log scale.
    pub scale: f64,
    pub opacity: f64,
    pub color: f64,
    pub background: f64,
}

impl Default for LearningRates {
    fn default() -> Self {
        Self {
            position_start: 4e-3,
            position_end: 8e-5,
            orientation: 5e-3,
            scale: 5e-3,
            opacity: 5e-2,
            color: 5e-3,
            background: 1e-2,
        }
    }
}

impl LearningRates {
    /// Position rate at `step` of `steps`.
    pub fn position_at(&self, step: usize, steps: usize) -> f64 {
        let f = if steps > 1 { step as f64 / (steps - 1) as f64 } else { 0.0 };
        self.position_start * (self.position_end / self.position_start).powf(f)
    }

    fn valid(&self) -> bool {
        [self.position_start, self.position_end, self.orientation, self.scale, self.opacity, self.color, self.background]
            .iter()
            .all(|r| r.is_finite() && *r > 0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageConfig {
    pub steps: usize,
    pub lr: LearningRates,
    /// Classifier-free guidance weight on the conditional/unconditional gap.
    pub cfg_scale: f64,
    /// DDIM steps between z_t and z_{t-c}.
    pub ddim_c: usize,
    /// Reconstruction weight.
    pub gamma: f64,
    pub seed: u64,
    pub cameras_per_step: usize,
    /// Timesteps are drawn uniformly from `[lo·T, hi·T]`.
    pub t_range: (f64, f64),
    /// When set, the upper fraction is annealed linearly to this value.
    pub t_max_end: Option<f64>,
    pub sampler: SamplerConfig,
    pub settings: RenderSettings,
}

impl StageConfig {
    pub fn geometry_default() -> Self {
        Self {
            steps: 5000,
            lr: LearningRates::default(),
            cfg_scale: 7.5,
            ddim_c: 50,
            gamma: 1.0,
            seed: 0,
            cameras_per_step: 1,
            t_range: (0.02, 0.98),
            t_max_end: None,
            sampler: SamplerConfig::default(),
            settings: RenderSettings::default(),
        }
    }

    pub fn appearance_default() -> Self {
        Self { steps: 10000, ..Self::geometry_default() }
    }

    pub fn validate(&self, stage: Stage) -> Result<(), OptimError> {
        if !self.lr.valid() {
            return Err(OptimError::Config("learning rates must be positive"));
        }
        if self.cameras_per_step == 0 {
            return Err(OptimError::Config("cameras_per_step must be at least 1"));
        }
        let (lo, hi) = self.t_range;
        if !(0.0..=1.0).contains(&lo) || !(lo..=1.0).contains(&hi) {
            return Err(OptimError::Config("t_range must satisfy 0 <= lo <= hi <= 1"));
        }
        if self.t_max_end.is_some_and(|e| !(lo..=1.0).contains(&e)) {
            return Err(OptimError::Config("t_max_end must lie in [lo, 1]"));
        }
        if stage == Stage::Appearance && self.ddim_c == 0 {
            return Err(OptimError::Config("ddim_c must be at least 1 for appearance"));
        }
        if !(self.cfg_scale.is_finite() && self.gamma.is_finite() && self.gamma >= 0.0) {
            return Err(OptimError::Config("cfg_scale and gamma must be finite, gamma non-negative"));
        }
        Ok(())
    }

    fn t_bounds(&self, schedule: &NoiseSchedule, step: usize) -> (usize, usize) {
        let hi = match self.t_max_end {
            Some(end) if self.steps > 1 => {
                let f = step as f64 / (self.steps - 1) as f64;
                self.t_range.1 + (end - self.t_range.1) * f
            }
            _ => self.t_range.1,
        };
        schedule.range(self.t_range.0, hi)
    }
}

/// What one optimization step did.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    /// Timestep used for each camera.
    pub timesteps: Vec<usize>,
    /// Mean over cameras of the latent residual norm.
    pub residual_norm: f64,
    /// Norm of the largest parameter change applied.
    pub max_update: f64,
}

/// Adam state for the geometry group.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometryOptimizer {
    position: Adam,
    rotation: Adam,
    scale: Adam,
    opacity: Adam,
}

impl GeometryOptimizer {
    pub fn new(state: &SceneState) -> Self {
        let n = state.surfel_count();
        Self { position: Adam::new(3 * n), rotation: Adam::new(3 * n), scale: Adam::new(2 * n), opacity: Adam::new(n) }
    }
}

/// Adam state for the appearance group.
#[derive(Debug, Clone, PartialEq)]
pub struct AppearanceOptimizer {
    color: Adam,
    tables: Adam,
    weight: Adam,
    bias: Adam,
}

impl AppearanceOptimizer {
    pub fn new(state: &SceneState) -> Self {
        let f = &state.appearance().field;
        Self {
            color: Adam::new(3 * state.surfel_count()),
            tables: Adam::new(f.tables().len()),
            weight: Adam::new(f.weight().len()),
            bias: Adam::new(3),
        }
    }
}

fn gaussian_like(t: &Tensor, rng: &mut Rng) -> Tensor {
    Tensor::from_fn(t.channels(), t.height(), t.width(), |_, _, _| StandardNormal.sample(rng))
}

/// ω(t)(ε̂(z_t; t, cond) − ε) for z_t = add_noise(x, t, ε): the latent-space
/// gradient of the geometry distillation loss.
pub fn gsds_residual<P: ScoreProvider + ?Sized>(
    provider: &P,
    x: &Tensor,
    cond: &ConditionSet,
    t: usize,
    eps: &Tensor,
) -> Result<Tensor, ProviderError> {
    let s = provider.schedule();
    let z = add_noise(s, x, t, eps);
    let e = predict_checked(provider, Stage::Geometry, &z, t, cond)?;
    let w = s.omega(t);
    Ok(e.zip(eps, |a, b| w * (a - b)))
}

/// The pieces of one appearance distillation evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct IsdTerms {
    /// ε̂(z_{t−c}; y, t−c) − ε̂(z_t; y, t).
    pub delta_inv: Tensor,
    /// ε̂(z_t; y, t) − ε̂(z_t; ∅, t).
    pub delta_cls: Tensor,
    /// ω(t)(λ(t)·δ_inv + cfg_scale·δ_cls).
    pub residual: Tensor,
    /// Clean-latent estimate at z_{t−c}.
    pub x0: Tensor,
}

pub fn isd_terms<P: ScoreProvider + ?Sized>(
    provider: &P,
    x: &Tensor,
    cond: &ConditionSet,
    t: usize,
    c: usize,
    eps: &Tensor,
    cfg_scale: f64,
) -> Result<IsdTerms, ProviderError> {
    if c >= t {
        return Err(ProviderError::TooManySteps { c, t });
    }
    let s = provider.schedule();
    let uncond = cond.with_prompt(false);
    let z = add_noise(s, x, t, eps);
    let e_y = predict_checked(provider, Stage::Appearance, &z, t, cond)?;
    let e_n = predict_checked(provider, Stage::Appearance, &z, t, &uncond)?;
    let zc = ddim_estimate(provider, Stage::Appearance, &z, t, c, cond)?;
    let e_c = if c == 0 { e_y.clone() } else { predict_checked(provider, Stage::Appearance, &zc, t - c, cond)? };
    let delta_inv = e_c.sub(&e_y);
    let delta_cls = e_y.sub(&e_n);
    let (w, l) = (s.omega(t), s.lambda(t));
    let residual = delta_inv.zip(&delta_cls, |i, k| w * (l * i + cfg_scale * k));
    let x0 = predict_x0(s, &zc, t - c, &e_c);
    Ok(IsdTerms { delta_inv, delta_cls, residual, x0 })
}

struct ViewResult {
    t: usize,
    residual_norm: f64,
    grads: ParamGradients,
}

fn sum_grads(results: &[ViewResult]) -> ParamGradients {
    let mut it = results.iter();
    let mut acc = it.next().expect("at least one camera").grads.clone();
    for r in it {
        for (a, b) in acc.objects.iter_mut().flatten().zip(r.grads.objects.iter().flatten()) {
            *a += *b;
        }
        if let (Some(a), Some(b)) = (acc.field.as_mut(), r.grads.field.as_ref()) {
            a.tables.iter_mut().zip(&b.tables).for_each(|(x, y)| *x += y);
            a.weight.iter_mut().zip(&b.weight).for_each(|(x, y)| *x += y);
            a.bias += b.bias;
        }
    }
    let k = 1.0 / results.len() as f64;
    for g in acc.objects.iter_mut().flatten() {
        g.position *= k;
        g.rotation *= k;
        g.scale *= k;
        g.opacity *= k;
        g.color *= k;
    }
    if let Some(f) = acc.field.as_mut() {
        f.tables.iter_mut().chain(f.weight.iter_mut()).for_each(|v| *v *= k);
        f.bias *= k;
    }
    acc
}

fn view_seeds(n: usize, rng: &mut Rng) -> Vec<u64> {
    (0..n).map(|_| rng.random()).collect()
}

/// One geometry distillation step over `cams`; only geometry is written.
pub fn gsds_step<S: ProviderSource + ?Sized>(
    state: &mut SceneState,
    cams: &[Camera],
    source: &S,
    opt: &mut GeometryOptimizer,
    config: &StageConfig,
    step: usize,
    rng: &mut Rng,
) -> Result<StepReport, OptimError> {
    if cams.is_empty() {
        return Err(OptimError::Config("no cameras"));
    }
    let seeds = view_seeds(cams.len(), rng);
    let results = {
        let world = state.world();
        let view = world.view();
        let jobs: Vec<(&Camera, u64)> = cams.iter().zip(seeds).collect();
        crate::par::map_ordered(&jobs, |&(cam, seed)| -> Result<ViewResult, OptimError> {
            let provider = source.for_view(cam)?;
            if !provider.supports(Stage::Geometry) {
                return Err(ProviderError::UnsupportedStage(Stage::Geometry).into());
            }
            let bundle = render(&view, cam, &config.settings);
            let codec = provider.codec();
            images::check_codec(codec, &bundle)?;
            let x = images::encode_geometry(codec, &bundle)?;
            let cond = images::geometry_conditions(&bundle);
            let mut r = seeded_rng(seed, VIEW_STREAM);
            let (lo, hi) = config.t_bounds(provider.schedule(), step);
            let t = r.random_range(lo..=hi);
            let eps = gaussian_like(&x, &mut r);
            let res = gsds_residual(&*provider, &x, &cond, t, &eps)?;
            let up = images::geometry_image_adjoint(&bundle, &images::latent_to_image_grad(codec, &res));
            let grads = backward(&view, cam, &config.settings, &up)?;
            Ok(ViewResult { t, residual_norm: res.norm(), grads })
        })
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?
    };
    let grads = state.canonical_grads(&sum_grads(&results));
    let max_update = apply_geometry(state, &grads, opt, config, step)?;
    Ok(report(&results, max_update))
}

/// One appearance distillation step over `cams`; only colors and the
/// background field are written.
pub fn isd_step<S: ProviderSource + ?Sized>(
    state: &mut SceneState,
    cams: &[Camera],
    source: &S,
    opt: &mut AppearanceOptimizer,
    config: &StageConfig,
    step: usize,
    rng: &mut Rng,
) -> Result<StepReport, OptimError> {
    if cams.is_empty() {
        return Err(OptimError::Config("no cameras"));
    }
    let seeds = view_seeds(cams.len(), rng);
    let results = {
        let world = state.world();
        let view = world.view();
        let jobs: Vec<(&Camera, u64)> = cams.iter().zip(seeds).collect();
        crate::par::map_ordered(&jobs, |&(cam, seed)| -> Result<ViewResult, OptimError> {
            let provider = source.for_view(cam)?;
            if !provider.supports(Stage::Appearance) {
                return Err(ProviderError::UnsupportedStage(Stage::Appearance).into());
            }
            let bundle = render(&view, cam, &config.settings);
            let codec = provider.codec();
            images::check_codec(codec, &bundle)?;
            let x = images::encode_color(codec, &bundle)?;
            let cond = images::appearance_conditions(&bundle);
            let mut r = seeded_rng(seed, VIEW_STREAM);
            let (lo, hi) = config.t_bounds(provider.schedule(), step);
            let lo = lo.max(config.ddim_c + 1);
            if lo > hi {
                return Err(OptimError::Config("ddim_c leaves no valid timestep"));
            }
            let t = r.random_range(lo..=hi);
            let eps = gaussian_like(&x, &mut r);
            let terms = isd_terms(&*provider, &x, &cond, t, config.ddim_c, &eps, config.cfg_scale)?;
            let mut g = images::latent_to_image_grad(codec, &terms.residual);
            if config.gamma != 0.0 {
                let target = codec.decode(&terms.x0);
                let img = images::color_image(&bundle);
                let k = 2.0 * config.gamma;
                g = g.add(&img.zip(&target, |a, b| k * (a - b)));
            }
            let up = images::color_image_adjoint(&bundle, &g);
            let grads = backward(&view, cam, &config.settings, &up)?;
            Ok(ViewResult { t, residual_norm: terms.residual.norm(), grads })
        })
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?
    };
    let acc = sum_grads(&results);
    let canon = state.canonical_grads(&acc);
    let field = acc.field.ok_or(OptimError::Config("scene has no background field"))?;
    let max_update = apply_appearance(state, &canon, &field, opt, config)?;
    Ok(report(&results, max_update))
}

fn report(results: &[ViewResult], max_update: f64) -> StepReport {
    StepReport {
        timesteps: results.iter().map(|r| r.t).collect(),
        residual_norm: results.iter().map(|r| r.residual_norm).sum::<f64>() / results.len() as f64,
        max_update,
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn apply_geometry(
    state: &mut SceneState,
    grads: &[Vec<CanonicalGrad>],
    opt: &mut GeometryOptimizer,
    config: &StageConfig,
    step: usize,
) -> Result<f64, OptimError> {
    let flat: Vec<&CanonicalGrad> = grads.iter().flatten().collect();
    let n = flat.len();
    if n != opt.opacity.len() {
        return Err(OptimError::Config("optimizer does not match the scene"));
    }
    let gp: Vec<f64> = flat.iter().flat_map(|g| g.position.iter().copied()).collect();
    let gr: Vec<f64> = flat.iter().flat_map(|g| g.rotation.iter().copied()).collect();
    let gs: Vec<f64> = flat.iter().flat_map(|g| g.log_scale.iter().copied()).collect();
    let go: Vec<f64> = flat.iter().map(|g| g.opacity).collect();
    if gp.iter().chain(&gr).chain(&gs).chain(&go).any(|v| !v.is_finite()) {
        return Err(OptimError::NonFinite("geometry gradient"));
    }
    let (mut dp, mut dr, mut ds, mut dopa) = (vec![0.0; 3 * n], vec![0.0; 3 * n], vec![0.0; 2 * n], vec![0.0; n]);
    let lr = &config.lr;
    opt.position.delta(&gp, lr.position_at(step, config.steps), &mut dp);
    opt.rotation.delta(&gr, lr.orientation, &mut dr);
    opt.scale.delta(&gs, lr.scale, &mut ds);
    opt.opacity.delta(&go, lr.opacity, &mut dopa);

    let mut next = state.geometry().clone();
    let mut i = 0;
    for s in next.objects.iter_mut().flatten() {
        s.position = (s.position + Vec3::new(dp[3 * i], dp[3 * i + 1], dp[3 * i + 2])).map(|v| v.clamp(-0.5, 0.5));
        s.orientation = rotate_frame(&s.orientation, &Vec3::new(dr[3 * i], dr[3 * i + 1], dr[3 * i + 2]));
        s.scale.x *= ds[2 * i].exp();
        s.scale.y *= ds[2 * i + 1].exp();
        s.opacity = (s.opacity + dopa[i]).clamp(0.0, 1.0);
        i += 1;
    }
    let finite = next.objects.iter().flatten().all(|s| {
        s.position.iter().chain(s.orientation.iter()).chain(s.scale.iter()).all(|v| v.is_finite())
            && s.opacity.is_finite()
            && s.scale.iter().all(|&v| v > 0.0)
    });
    if !finite {
        return Err(OptimError::NonFinite("geometry update"));
    }
    *state.geometry_mut() = next;
    Ok([max_abs(&dp), max_abs(&dr), max_abs(&ds), max_abs(&dopa)].into_iter().fold(0.0, f64::max))
}

fn apply_appearance(
    state: &mut SceneState,
    grads: &[Vec<CanonicalGrad>],
    field: &FieldGrad,
    opt: &mut AppearanceOptimizer,
    config: &StageConfig,
) -> Result<f64, OptimError> {
    let gc: Vec<f64> = grads.iter().flatten().flat_map(|g| g.color.iter().copied()).collect();
    if gc.len() != opt.color.len() || field.tables.len() != opt.tables.len() {
        return Err(OptimError::Config("optimizer does not match the scene"));
    }
    let gb = [field.bias.x, field.bias.y, field.bias.z];
    if gc.iter().chain(&field.tables).chain(&field.weight).chain(&gb).any(|v| !v.is_finite()) {
        return Err(OptimError::NonFinite("appearance gradient"));
    }
    let lr = &config.lr;
    let mut dc = vec![0.0; gc.len()];
    let mut dt = vec![0.0; field.tables.len()];
    let mut dw = vec![0.0; field.weight.len()];
    let mut db = [0.0; 3];
    opt.color.delta(&gc, lr.color, &mut dc);
    opt.tables.delta(&field.tables, lr.background, &mut dt);
    opt.weight.delta(&field.weight, lr.background, &mut dw);
    opt.bias.delta(&gb, lr.background, &mut db);

    let mut next = state.appearance().clone();
    for (i, c) in next.colors.iter_mut().flatten().enumerate() {
        *c = (*c + Vec3::new(dc[3 * i], dc[3 * i + 1], dc[3 * i + 2])).map(|v| v.clamp(0.0, 1.0));
    }
    {
        let (tables, weight, bias) = next.field.params_mut();
        tables.iter_mut().zip(&dt).for_each(|(p, d)| *p += d);
        weight.iter_mut().zip(&dw).for_each(|(p, d)| *p += d);
        *bias += Vec3::from(db);
    }
    let f = &next.field;
    let finite = next.colors.iter().flatten().all(|c| c.iter().all(|v| v.is_finite()))
        && f.tables().iter().chain(f.weight()).chain(f.bias().iter()).all(|v| v.is_finite());
    if !finite {
        return Err(OptimError::NonFinite("appearance update"));
    }
    *state.appearance_mut() = next;
    Ok([max_abs(&dc), max_abs(&dt), max_abs(&dw), max_abs(&db)].into_iter().fold(0.0, f64::max))
}

/// Progress hook called after every step with the step index and state.
pub type Observer<'a> = &'a mut dyn FnMut(usize, &SceneState, &StepReport);

/// Geometry refinement: `config.steps` distillation steps over freshly
/// sampled layout-aware cameras. Marks the state geometry-refined.
pub fn run_stage1<S: ProviderSource + ?Sized>(
    state: &mut SceneState,
    source: &S,
    config: &StageConfig,
    mut observer: Option<Observer<'_>>,
) -> Result<(), OptimError> {
    config.validate(Stage::Geometry)?;
    if state.stage() == StageMarker::AppearanceGenerated {
        return Err(OptimError::StageOrder("geometry refinement after appearance generation"));
    }
    if config.steps > 0 {
        let sampler = CameraSampler::new(state.layout(), config.sampler)?;
        let mut cam_rng = seeded_rng(config.seed, CAMERA_STREAM);
        let mut rng = seeded_rng(config.seed, DRAW_STREAM);
        let mut opt = GeometryOptimizer::new(state);
        for step in 0..config.steps {
            let cams = sample_batch(&sampler, state, config.cameras_per_step, &mut cam_rng)?;
            let rep = gsds_step(state, &cams, source, &mut opt, config, step, &mut rng)?;
            if let Some(o) = observer.as_mut() {
                o(step, state, &rep);
            }
        }
    }
    state.set_stage(StageMarker::GeometryRefined);
    Ok(())
}

/// Appearance generation: `config.steps` distillation steps with the
/// reconstruction term. Needs a geometry-refined state (or an
/// appearance-generated one, to continue) and marks it appearance-generated.
pub fn run_stage2<S: ProviderSource + ?Sized>(
    state: &mut SceneState,
    source: &S,
    config: &StageConfig,
    mut observer: Option<Observer<'_>>,
) -> Result<(), OptimError> {
    config.validate(Stage::Appearance)?;
    if state.stage() == StageMarker::Initialized {
        return Err(OptimError::StageOrder("appearance generation before geometry refinement"));
    }
    if config.steps > 0 {
        let sampler = CameraSampler::new(state.layout(), config.sampler)?;
        let mut cam_rng = seeded_rng(config.seed, CAMERA_STREAM);
        let mut rng = seeded_rng(config.seed, DRAW_STREAM);
        let mut opt = AppearanceOptimizer::new(state);
        for step in 0..config.steps {
            let cams = sample_batch(&sampler, state, config.cameras_per_step, &mut cam_rng)?;
            let rep = isd_step(state, &cams, source, &mut opt, config, step, &mut rng)?;
            if let Some(o) = observer.as_mut() {
                o(step, state, &rep);
            }
        }
    }
    state.set_stage(StageMarker::AppearanceGenerated);
    Ok(())
}

fn sample_batch(sampler: &CameraSampler, state: &SceneState, n: usize, rng: &mut Rng) -> Result<Vec<Camera>, OptimError> {
    (0..n).map(|_| sampler.sample(state.layout(), rng).map_err(OptimError::from)).collect()
}
