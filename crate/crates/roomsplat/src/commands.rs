//! Command implementations behind the CLI. Each returns a report and leaves
//! printing to the binary.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use roomsplat_core::diffusion::{Stage, ToyConfig, ToyDenoiser};
use roomsplat_core::fixtures::flat_color_provider;
use roomsplat_core::init::init_scene;
use roomsplat_core::metrics::{evaluate, MetricsReport};
use roomsplat_core::optim::{run_stage1, run_stage2, LayoutGeometryOracle, ProviderSource, SceneState, StepReport};
use roomsplat_core::render::{render, BackgroundField, Camera, RenderBundle, RenderSettings};
use roomsplat_core::sampler::{coverage_report, CameraSampler, CoverageReport, SamplerConfig};
use roomsplat_core::scene::{SemanticLayout, SemanticPalette};
use roomsplat_core::Vec3;
use sha2::{Digest, Sha256};

use crate::config::{ProviderSpec, RunConfig};
use crate::error::{Error, Result};
use crate::export::{depth_preview_pixels, load_cameras, normal_pixels, save_cameras, save_png, write_views};
use crate::inputs::load_palette;
use crate::layout_file::load_layout;
use crate::remote::RemoteProvider;
use crate::trajectory::{trajectory, Lens};
use crate::{checkpoint, dataset};

// Seed offsets so the preview, dataset and evaluation cameras never reuse a
// training stream.
const PREVIEW_SEED: u64 = 0x5052_4556;
const DATASET_SEED: u64 = 0x4441_5441;

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    /// Step count of whichever stage the command runs.
    pub steps: Option<usize>,
    /// Provider of whichever stage the command runs.
    pub provider: Option<ProviderSpec>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut RunConfig) {
        if let Some(seed) = self.seed {
            cfg.seed = seed;
            cfg.init.seed = seed;
            cfg.stage1.seed = seed;
            cfg.stage2.seed = seed.wrapping_add(1);
        }
        if let Some(steps) = self.steps {
            cfg.stage1.steps = steps;
            cfg.stage2.steps = steps;
        }
        if let Some(p) = &self.provider {
            cfg.geometry_provider = p.clone();
            cfg.appearance_provider = p.clone();
        }
    }
}

pub fn load_inputs(cfg: &RunConfig) -> Result<(SemanticLayout, SemanticPalette)> {
    let layout = load_layout(&cfg.layout)?;
    let palette = match &cfg.palette {
        Some(p) => load_palette(p)?,
        None => SemanticPalette::indoor(),
    };
    Ok((layout, palette))
}

/// Hex sha256 of a checkpoint's bytes.
pub fn digest_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn save_state(path: &Path, state: &SceneState) -> Result<String> {
    let bytes = checkpoint::encode(state);
    crate::error::write(path, &bytes)?;
    Ok(digest_hex(&bytes))
}

fn sampler_for(layout: &SemanticLayout, config: SamplerConfig) -> Result<CameraSampler> {
    CameraSampler::new(layout, config).map_err(|e| Error::invalid(format!("camera sampler: {e}")))
}

fn sample(layout: &SemanticLayout, config: SamplerConfig, n: usize, seed: u64) -> Result<(CameraSampler, Vec<Camera>)> {
    let sampler = sampler_for(layout, config)?;
    let cams = sampler.sample_n(layout, n, seed).map_err(|e| Error::invalid(format!("camera sampler: {e}")))?;
    Ok((sampler, cams))
}

fn preview_camera(layout: &SemanticLayout, cfg: &RunConfig) -> Result<Camera> {
    Ok(sample(layout, cfg.sampler(), 1, cfg.seed ^ PREVIEW_SEED)?.1.remove(0))
}

/// RGB, semantic, normal and depth tiled two by two.
fn preview_grid(b: &RenderBundle) -> (usize, usize, Vec<Vec3>) {
    let (w, h) = (b.width, b.height);
    let tiles = [b.color.clone(), b.semantic.clone(), normal_pixels(b), depth_preview_pixels(b)];
    let mut out = vec![Vec3::zeros(); 4 * w * h];
    for (k, tile) in tiles.iter().enumerate() {
        let (ox, oy) = ((k % 2) * w, (k / 2) * h);
        for y in 0..h {
            out[(oy + y) * 2 * w + ox..][..w].copy_from_slice(&tile[y * w..][..w]);
        }
    }
    (2 * w, 2 * h, out)
}

#[derive(Debug, Clone)]
pub struct InitReport {
    pub checkpoint: PathBuf,
    pub digest: String,
    pub surfels: usize,
    pub preview: PathBuf,
}

/// Builds the initialized state from the config's layout.
pub fn initial_state(cfg: &RunConfig) -> Result<SceneState> {
    let (layout, palette) = load_inputs(cfg)?;
    let objects = init_scene(&layout, &palette, &cfg.init).map_err(|e| Error::invalid(format!("init: {e}")))?;
    let (lo, hi) = layout.room().bounds();
    let field = BackgroundField::new(cfg.field, lo, hi, cfg.seed);
    Ok(SceneState::new(layout, palette, objects, field)?)
}

pub fn cmd_init(cfg: &RunConfig, out: Option<&Path>) -> Result<InitReport> {
    let state = initial_state(cfg)?;
    let path = out.map(Path::to_path_buf).unwrap_or_else(|| cfg.output.join("init.l2s"));
    let digest = save_state(&path, &state)?;
    let cam = preview_camera(state.layout(), cfg)?;
    let (w, h, pixels) = preview_grid(&render(&state.world().view(), &cam, &cfg.settings()));
    let preview = cfg.output.join("previews").join("init.png");
    save_png(&preview, w, h, &pixels)?;
    Ok(InitReport { checkpoint: path, digest, surfels: state.surfel_count(), preview })
}

/// Score source for `stage` as selected by the config.
pub fn build_source(cfg: &RunConfig, stage: Stage, state: &SceneState) -> Result<Box<dyn ProviderSource>> {
    let schedule = cfg.schedule()?;
    let sampler = cfg.sampler();
    let (width, height) = (sampler.width as usize, sampler.height as usize);
    let spec = match stage {
        Stage::Geometry => &cfg.geometry_provider,
        Stage::Appearance => &cfg.appearance_provider,
    };
    Ok(match (spec, stage) {
        (ProviderSpec::Analytic, Stage::Geometry) => {
            Box::new(LayoutGeometryOracle::new(state.layout().clone(), state.palette().clone(), schedule, cfg.codec))
        }
        (ProviderSpec::Analytic, Stage::Appearance) => Box::new(flat_color_provider(schedule, cfg.codec, width, height)?),
        (ProviderSpec::Toy(path), _) => {
            let (data_stage, pairs) = dataset::load(path)?;
            if data_stage != stage {
                return Err(Error::invalid(format!("{}: dataset is for the {data_stage:?} stage, not {stage:?}", path.display())));
            }
            let want = cfg.codec.latent_size(height, width).map_err(|e| Error::invalid(format!("codec: {e}")))?;
            if let Some(p) = pairs.iter().find(|p| (p.target.height(), p.target.width()) != want) {
                return Err(Error::invalid(format!(
                    "{}: dataset latents are {}x{}, renders need {}x{}",
                    path.display(),
                    p.target.width(),
                    p.target.height(),
                    want.1,
                    want.0
                )));
            }
            let toy = ToyConfig { hidden: cfg.toy_hidden, steps: cfg.toy_steps, seed: cfg.seed, ..ToyConfig::default() };
            Box::new(ToyDenoiser::train(stage, schedule, cfg.codec, &pairs, &toy)?.0)
        }
        (ProviderSpec::Remote(url), _) => {
            let timeout = Duration::from_secs_f64(cfg.timeout_s);
            Box::new(RemoteProvider::new(url, stage, schedule, cfg.codec, timeout)?)
        }
    })
}

#[derive(Debug, Clone)]
pub struct StageReport {
    pub checkpoint: PathBuf,
    pub digest: String,
    pub steps: usize,
    pub previews: Vec<PathBuf>,
}

fn write_preview(dir: &Path, stem: &str, stage: Stage, b: &RenderBundle) -> Result<Vec<PathBuf>> {
    let files: Vec<(PathBuf, Vec<Vec3>)> = match stage {
        Stage::Geometry => vec![
            (dir.join(format!("{stem}_normal.png")), normal_pixels(b)),
            (dir.join(format!("{stem}_depth.png")), depth_preview_pixels(b)),
        ],
        Stage::Appearance => vec![(dir.join(format!("{stem}_rgb.png")), b.color.clone())],
    };
    for (path, pixels) in &files {
        save_png(path, b.width, b.height, pixels)?;
    }
    Ok(files.into_iter().map(|(p, _)| p).collect())
}

fn run_stage(cfg: &RunConfig, stage: Stage, input: &Path, out: Option<&Path>) -> Result<StageReport> {
    let mut state = checkpoint::load(input)?;
    let source = build_source(cfg, stage, &state)?;
    let cam = preview_camera(state.layout(), cfg)?;
    let settings = cfg.settings();
    let dir = cfg.output.join("previews");
    let (tag, config, default_name) = match stage {
        Stage::Geometry => ("geometry", &cfg.stage1, "geometry.l2s"),
        Stage::Appearance => ("appearance", &cfg.stage2, "appearance.l2s"),
    };

    let mut previews = Vec::new();
    let mut failure = None;
    let every = cfg.preview_every;
    let mut observer = |i: usize, s: &SceneState, _: &StepReport| {
        if every == 0 || (i + 1) % every != 0 || failure.is_some() {
            return;
        }
        let b = render(&s.world().view(), &cam, &settings);
        match write_preview(&dir, &format!("{tag}_{:05}", i + 1), stage, &b) {
            Ok(files) => previews.extend(files),
            Err(e) => failure = Some(e),
        }
    };
    match stage {
        Stage::Geometry => run_stage1(&mut state, source.as_ref(), config, Some(&mut observer))?,
        Stage::Appearance => run_stage2(&mut state, source.as_ref(), config, Some(&mut observer))?,
    }
    if let Some(e) = failure {
        return Err(e);
    }
    let b = render(&state.world().view(), &cam, &settings);
    previews.extend(write_preview(&dir, &format!("{tag}_final"), stage, &b)?);
    let path = out.map(Path::to_path_buf).unwrap_or_else(|| cfg.output.join(default_name));
    let digest = save_state(&path, &state)?;
    Ok(StageReport { checkpoint: path, digest, steps: config.steps, previews })
}

pub fn cmd_refine_geometry(cfg: &RunConfig, input: &Path, out: Option<&Path>) -> Result<StageReport> {
    run_stage(cfg, Stage::Geometry, input, out)
}

pub fn cmd_generate_appearance(cfg: &RunConfig, input: &Path, out: Option<&Path>) -> Result<StageReport> {
    run_stage(cfg, Stage::Appearance, input, out)
}

#[derive(Debug, Clone)]
pub struct RenderReport {
    pub files: Vec<PathBuf>,
    pub cameras: usize,
    /// Frames per second of rendering alone, excluding file output.
    pub fps: f64,
}

/// Where `render` takes its cameras from.
#[derive(Debug, Clone)]
pub enum CameraSource {
    /// A camera table as written by `cameras`.
    Table(PathBuf),
    /// A trajectory spec over the checkpoint's layout.
    Trajectory(String, Lens),
}

/// Renders every camera and writes RGB, semantic, normal and depth files
/// named by camera index.
pub fn cmd_render(input: &Path, source: &CameraSource, settings: &RenderSettings, out_dir: &Path) -> Result<RenderReport> {
    let state = checkpoint::load(input)?;
    let cams = match source {
        CameraSource::Table(path) => load_cameras(path)?,
        CameraSource::Trajectory(spec, lens) => trajectory(spec, state.layout(), *lens)?,
    };
    let world = state.world();
    let view = world.view();
    let mut files = Vec::new();
    let mut busy = Duration::ZERO;
    for (i, cam) in cams.iter().enumerate() {
        let start = Instant::now();
        let b = render(&view, cam, settings);
        busy += start.elapsed();
        files.extend(write_views(out_dir, &format!("{i:04}"), &b)?);
    }
    let fps = if busy.is_zero() { f64::INFINITY } else { cams.len() as f64 / busy.as_secs_f64() };
    Ok(RenderReport { files, cameras: cams.len(), fps })
}

/// How evaluation cameras are drawn.
#[derive(Debug, Clone, Copy)]
pub struct EvalOptions {
    pub views: usize,
    pub seed: u64,
    pub sampler: SamplerConfig,
    pub settings: RenderSettings,
}

/// Scores a checkpoint against its own layout or against `layout`.
pub fn cmd_metrics(input: &Path, layout: Option<&Path>, opts: &EvalOptions) -> Result<MetricsReport> {
    let state = checkpoint::load(input)?;
    let layout = match layout {
        Some(p) => load_layout(p)?,
        None => state.layout().clone(),
    };
    let (sampler, cams) = sample(&layout, opts.sampler, opts.views, opts.seed)?;
    Ok(evaluate(&state.world().view(), &layout, state.palette(), &cams, sampler.grid(), &opts.settings))
}

pub fn metrics_json(report: &MetricsReport) -> serde_json::Value {
    let iou: serde_json::Map<String, serde_json::Value> = report.iou.iter().map(|l| (l.label.clone(), l.iou().into())).collect();
    serde_json::json!({
        "mean_iou": report.mean_iou(),
        "iou": iou,
        "free_voxel_coverage": report.free_voxel_coverage,
        "opacity_inside": report.opacity_inside,
        "opacity_outside": report.opacity_outside,
    })
}

/// Samples `n` training cameras, writes them as a table and reports their
/// coverage of the layout.
pub fn cmd_cameras(cfg: &RunConfig, n: usize, out: &Path) -> Result<CoverageReport> {
    let (layout, _) = load_inputs(cfg)?;
    let (sampler, cams) = sample(&layout, cfg.sampler(), n, cfg.seed)?;
    save_cameras(out, &cams)?;
    Ok(coverage_report(&cams, &layout, sampler.grid()))
}

/// Writes a toy-denoiser dataset of `n` views rendered from the layout.
pub fn cmd_make_dataset(cfg: &RunConfig, stage: Stage, n: usize, out: &Path) -> Result<usize> {
    let (layout, palette) = load_inputs(cfg)?;
    let (_, cams) = sample(&layout, cfg.sampler(), n, cfg.seed ^ DATASET_SEED)?;
    let pairs = dataset::layout_pairs(&layout, &palette, &cams, stage, cfg.codec)?;
    dataset::save(out, stage, &pairs)?;
    Ok(pairs.len())
}
