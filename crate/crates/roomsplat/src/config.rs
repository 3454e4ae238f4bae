//! TOML run configuration.
//!
//! Every section and key is optional except `paths.layout`; relative paths
//! resolve against the config file's directory. See `configs/example.toml`
//! for the full schema with defaults.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use roomsplat_core::diffusion::{Codec, NoiseSchedule, ScheduleKind};
use roomsplat_core::init::{InitConfig, InitSource, ShapeFamily};
use roomsplat_core::optim::{LearningRates, StageConfig};
use roomsplat_core::render::{FieldConfig, RenderSettings};
use roomsplat_core::sampler::SamplerConfig;
use serde::Deserialize;

use crate::error::{read_text, Error, Result};
use crate::inputs::load_points;

/// Where a stage's scores come from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProviderSpec {
    /// Closed-form targets built from the layout itself.
    Analytic,
    /// A toy denoiser trained at startup on a TDS1 dataset.
    Toy(PathBuf),
    /// An HTTP score service base URL.
    Remote(String),
}

impl FromStr for ProviderSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.split_once(':') {
            _ if s == "analytic" => Ok(ProviderSpec::Analytic),
            Some(("toy", p)) if !p.is_empty() => Ok(ProviderSpec::Toy(PathBuf::from(p))),
            Some(("remote", u)) if !u.is_empty() => Ok(ProviderSpec::Remote(u.to_string())),
            _ => Err(Error::invalid(format!("provider `{s}`: expected analytic, toy:<dataset> or remote:<url>"))),
        }
    }
}

/// Parses `identity` or `pool:<k>`.
pub fn parse_codec(s: &str) -> Result<Codec> {
    match s.split_once(':') {
        None if s == "identity" => Ok(Codec::Identity),
        Some(("pool", k)) => k
            .parse::<usize>()
            .ok()
            .filter(|&k| k >= 1)
            .map(Codec::AvgPool)
            .ok_or_else(|| Error::invalid(format!("codec `{s}`: pool size must be a positive integer"))),
        _ => Err(Error::invalid(format!("codec `{s}`: expected identity or pool:<k>"))),
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct Doc {
    seed: Option<u64>,
    output: Option<PathBuf>,
    preview_every: Option<usize>,
    #[serde(default)]
    paths: PathsDoc,
    #[serde(default)]
    render: RenderDoc,
    #[serde(default)]
    init: InitDoc,
    #[serde(default)]
    field: FieldDoc,
    #[serde(default)]
    sampler: SamplerDoc,
    #[serde(default)]
    diffusion: DiffusionDoc,
    #[serde(default)]
    provider: ProviderDoc,
    #[serde(default)]
    stage1: StageDoc,
    #[serde(default)]
    stage2: StageDoc,
    #[serde(default)]
    trajectory: Option<TrajectoryDoc>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PathsDoc {
    layout: Option<PathBuf>,
    palette: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RenderDoc {
    width: u32,
    height: u32,
    fov_deg: f64,
    cutoff_sigma: f64,
}

impl Default for RenderDoc {
    fn default() -> Self {
        Self { width: 64, height: 64, fov_deg: 60.0, cutoff_sigma: RenderSettings::default().cutoff_sigma }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct InitDoc {
    count: usize,
    scale_factor: f64,
    opacity: f64,
    color: f64,
    source: Vec<SourceDoc>,
}

impl Default for InitDoc {
    fn default() -> Self {
        let d = InitConfig::default();
        Self { count: d.default_count, scale_factor: d.scale_factor, opacity: d.opacity, color: d.color, source: Vec::new() }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SourceDoc {
    label: String,
    shape: Option<String>,
    count: Option<usize>,
    points: Option<PathBuf>,
    cap: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct FieldDoc {
    levels: usize,
    features: usize,
    log2_table_size: u32,
    base_resolution: u32,
    max_resolution: u32,
}

impl Default for FieldDoc {
    fn default() -> Self {
        let d = FieldConfig::default();
        Self {
            levels: d.levels,
            features: d.features,
            log2_table_size: d.log2_table_size,
            base_resolution: d.base_resolution,
            max_resolution: d.max_resolution,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct SamplerDoc {
    voxel: f64,
    tau: f64,
    sigma_min_deg: f64,
}

impl Default for SamplerDoc {
    fn default() -> Self {
        let d = SamplerConfig::default();
        Self { voxel: d.voxel, tau: d.tau, sigma_min_deg: d.sigma_min.to_degrees() }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct DiffusionDoc {
    steps: usize,
    schedule: String,
    codec: String,
}

impl Default for DiffusionDoc {
    fn default() -> Self {
        Self { steps: 1000, schedule: "linear".into(), codec: "identity".into() }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct ProviderDoc {
    geometry: String,
    appearance: String,
    timeout_s: f64,
    toy_steps: usize,
    toy_hidden: usize,
}

impl Default for ProviderDoc {
    fn default() -> Self {
        Self { geometry: "analytic".into(), appearance: "analytic".into(), timeout_s: 60.0, toy_steps: 2000, toy_hidden: 32 }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct StageDoc {
    steps: Option<usize>,
    position_lr_start: Option<f64>,
    position_lr_end: Option<f64>,
    orientation_lr: Option<f64>,
    scale_lr: Option<f64>,
    opacity_lr: Option<f64>,
    color_lr: Option<f64>,
    background_lr: Option<f64>,
    cfg_scale: Option<f64>,
    ddim_c: Option<usize>,
    gamma: Option<f64>,
    cameras_per_step: Option<usize>,
    t_range: Option<[f64; 2]>,
    t_max_end: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrajectoryDoc {
    spec: String,
}

/// A fully resolved configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub layout: PathBuf,
    pub palette: Option<PathBuf>,
    pub output: PathBuf,
    pub seed: u64,
    pub init: InitConfig,
    pub field: FieldConfig,
    pub schedule_steps: usize,
    pub schedule_kind: ScheduleKind,
    pub codec: Codec,
    pub geometry_provider: ProviderSpec,
    pub appearance_provider: ProviderSpec,
    pub timeout_s: f64,
    pub toy_steps: usize,
    pub toy_hidden: usize,
    pub stage1: StageConfig,
    pub stage2: StageConfig,
    pub preview_every: usize,
    pub trajectory: Option<String>,
}

impl RunConfig {
    pub fn schedule(&self) -> Result<NoiseSchedule> {
        NoiseSchedule::new(self.schedule_steps, self.schedule_kind).map_err(|e| Error::invalid(format!("diffusion: {e}")))
    }

    pub fn sampler(&self) -> SamplerConfig {
        self.stage1.sampler
    }

    pub fn settings(&self) -> RenderSettings {
        self.stage1.settings
    }
}

fn stage_config(d: &StageDoc, base: StageConfig, sampler: SamplerConfig, settings: RenderSettings, seed: u64) -> StageConfig {
    let lr = LearningRates {
        position_start: d.position_lr_start.unwrap_or(base.lr.position_start),
        position_end: d.position_lr_end.unwrap_or(base.lr.position_end),
        orientation: d.orientation_lr.unwrap_or(base.lr.orientation),
        scale: d.scale_lr.unwrap_or(base.lr.scale),
        opacity: d.opacity_lr.unwrap_or(base.lr.opacity),
        color: d.color_lr.unwrap_or(base.lr.color),
        background: d.background_lr.unwrap_or(base.lr.background),
    };
    StageConfig {
        steps: d.steps.unwrap_or(base.steps),
        lr,
        cfg_scale: d.cfg_scale.unwrap_or(base.cfg_scale),
        ddim_c: d.ddim_c.unwrap_or(base.ddim_c),
        gamma: d.gamma.unwrap_or(base.gamma),
        seed,
        cameras_per_step: d.cameras_per_step.unwrap_or(base.cameras_per_step),
        t_range: d.t_range.map(|[a, b]| (a, b)).unwrap_or(base.t_range),
        t_max_end: d.t_max_end.or(base.t_max_end),
        sampler,
        settings,
    }
}

fn resolve(base: &Path, p: PathBuf) -> PathBuf {
    if p.is_absolute() {
        p
    } else {
        base.join(p)
    }
}

pub fn parse_config(text: &str, base: &Path) -> Result<RunConfig> {
    let doc: Doc = toml::from_str(text).map_err(|e| Error::invalid(format!("config: {e}")))?;
    let seed = doc.seed.unwrap_or(0);
    let layout = doc.paths.layout.ok_or_else(|| Error::invalid("config: missing `paths.layout`"))?;

    let r = &doc.render;
    if r.width == 0 || r.height == 0 || !(r.fov_deg > 0.0 && r.fov_deg < 180.0) {
        return Err(Error::invalid("config: render width/height must be positive and fov_deg in (0, 180)"));
    }
    let s = &doc.sampler;
    let sampler = SamplerConfig {
        voxel: s.voxel,
        tau: s.tau,
        sigma_min: s.sigma_min_deg.to_radians(),
        fov_y: r.fov_deg.to_radians(),
        width: r.width,
        height: r.height,
        ..SamplerConfig::default()
    };
    let settings = RenderSettings { cutoff_sigma: r.cutoff_sigma, ..RenderSettings::default() };

    let mut sources = Vec::new();
    for (i, src) in doc.init.source.into_iter().enumerate() {
        let err = |m: &str| Error::invalid(format!("config: init.source[{i}] ({}): {m}", src.label));
        let source = match (&src.shape, &src.points) {
            (Some(shape), None) => {
                let shape = match shape.as_str() {
                    "box" => ShapeFamily::BoxFill,
                    "ellipsoid" => ShapeFamily::Ellipsoid,
                    "slab" => ShapeFamily::FlatSlab,
                    _ => return Err(err("shape must be box, ellipsoid or slab")),
                };
                InitSource::Procedural { shape, count: src.count.unwrap_or(doc.init.count) }
            }
            (None, Some(points)) => {
                InitSource::PointCloud { points: load_points(&resolve(base, points.clone()))?, cap: src.cap.unwrap_or(usize::MAX) }
            }
            _ => return Err(err("give exactly one of `shape` or `points`")),
        };
        sources.push((src.label.clone(), source));
    }
    let init = InitConfig {
        default_count: doc.init.count,
        scale_factor: doc.init.scale_factor,
        opacity: doc.init.opacity,
        color: doc.init.color,
        sources,
        seed,
    };

    let f = &doc.field;
    if f.levels == 0 || f.features == 0 || f.base_resolution == 0 || f.max_resolution < f.base_resolution || f.log2_table_size > 24 {
        return Err(Error::invalid("config: field needs levels, features, base_resolution >= 1, max >= base, log2_table_size <= 24"));
    }
    let field = FieldConfig {
        levels: f.levels,
        features: f.features,
        log2_table_size: f.log2_table_size,
        base_resolution: f.base_resolution,
        max_resolution: f.max_resolution,
        ..FieldConfig::default()
    };

    if !(doc.provider.timeout_s.is_finite() && doc.provider.timeout_s > 0.0) {
        return Err(Error::invalid("config: provider.timeout_s must be positive"));
    }
    let schedule_kind = match doc.diffusion.schedule.as_str() {
        "linear" => ScheduleKind::LINEAR,
        "cosine" => ScheduleKind::COSINE,
        other => return Err(Error::invalid(format!("config: diffusion.schedule `{other}`: expected linear or cosine"))),
    };
    let fix = |p: ProviderSpec| match p {
        ProviderSpec::Toy(path) => ProviderSpec::Toy(resolve(base, path)),
        p => p,
    };
    let stage1 = stage_config(&doc.stage1, StageConfig::geometry_default(), sampler, settings, seed);
    let stage2 = stage_config(&doc.stage2, StageConfig::appearance_default(), sampler, settings, seed.wrapping_add(1));
    Ok(RunConfig {
        layout: resolve(base, layout),
        palette: doc.paths.palette.map(|p| resolve(base, p)),
        output: resolve(base, doc.output.unwrap_or_else(|| PathBuf::from("out"))),
        seed,
        init,
        field,
        schedule_steps: doc.diffusion.steps,
        schedule_kind,
        codec: parse_codec(&doc.diffusion.codec)?,
        geometry_provider: fix(doc.provider.geometry.parse()?),
        appearance_provider: fix(doc.provider.appearance.parse()?),
        timeout_s: doc.provider.timeout_s,
        toy_steps: doc.provider.toy_steps,
        toy_hidden: doc.provider.toy_hidden,
        stage1,
        stage2,
        preview_every: doc.preview_every.unwrap_or(100),
        trajectory: doc.trajectory.map(|t| t.spec),
    })
}

/// Parses a config file and checks that every input path it names exists.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let base = path.parent().unwrap_or(Path::new("."));
    let cfg = parse_config(&read_text(path)?, base).map_err(|e| Error::invalid(format!("{}: {e}", path.display())))?;
    let toy = [&cfg.geometry_provider, &cfg.appearance_provider].into_iter().filter_map(|p| match p {
        ProviderSpec::Toy(d) => Some(d),
        _ => None,
    });
    for p in std::iter::once(&cfg.layout).chain(&cfg.palette).chain(toy) {
        if !p.is_file() {
            return Err(Error::invalid(format!("{}: input file {} does not exist", path.display(), p.display())));
        }
    }
    Ok(cfg)
}
