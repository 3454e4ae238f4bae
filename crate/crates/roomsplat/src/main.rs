use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use roomsplat::commands::{self, CameraSource, EvalOptions, Overrides};
use roomsplat::config::{load_config, ProviderSpec, RunConfig};
use roomsplat::trajectory::Lens;
use roomsplat::{Error, Result};
use roomsplat_core::diffusion::Stage;
use roomsplat_core::render::RenderSettings;
use roomsplat_core::sampler::SamplerConfig;

/// Layout-guided indoor scene generation with 2D Gaussian surfels.
#[derive(Debug, Parser)]
#[command(version, about)]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the step count of the stage being run.
    #[arg(long, global = true)]
    steps: Option<usize>,
    /// Overrides the score provider: analytic, toy:<dataset> or remote:<url>.
    #[arg(long, global = true)]
    provider: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum StageArg {
    Geometry,
    Appearance,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Places surfels in every layout box and writes the initial checkpoint.
    Init {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Stage one: refines surfel geometry.
    RefineGeometry {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Stage two: generates surfel colors and the background.
    GenerateAppearance {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Renders RGB, semantic, normal and depth for a camera set.
    Render {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Camera table as written by `cameras`.
        #[arg(long, conflicts_with = "trajectory")]
        cameras: Option<PathBuf>,
        /// `circle:n[:radius[:height]]` or `line:n:x,y,z:x,y,z`; defaults to
        /// the config's `trajectory.spec`.
        #[arg(long)]
        trajectory: Option<String>,
        #[arg(long)]
        width: Option<u32>,
        #[arg(long)]
        height: Option<u32>,
        #[arg(long)]
        fov_deg: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Semantic IoU, free-space coverage and opacity placement as JSON.
    Metrics {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Reference layout; defaults to the checkpoint's own.
        #[arg(long)]
        layout: Option<PathBuf>,
        #[arg(long, default_value_t = 16)]
        views: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Samples training cameras and reports their coverage.
    Cameras {
        #[arg(long, default_value_t = 100)]
        count: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Renders a toy-denoiser training set from the layout.
    MakeDataset {
        #[arg(long, value_enum)]
        stage: StageArg,
        #[arg(long, default_value_t = 64)]
        count: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

impl Cli {
    fn overrides(&self) -> Result<Overrides> {
        Ok(Overrides { seed: self.seed, steps: self.steps, provider: self.provider.as_deref().map(str::parse::<ProviderSpec>).transpose()? })
    }

    fn optional_config(&self) -> Result<Option<RunConfig>> {
        let Some(path) = &self.config else { return Ok(None) };
        let mut cfg = load_config(path)?;
        self.overrides()?.apply(&mut cfg);
        Ok(Some(cfg))
    }

    fn config(&self) -> Result<RunConfig> {
        self.optional_config()?.ok_or_else(|| Error::invalid("this command needs --config"))
    }
}

fn show(p: &Path) -> String {
    p.display().to_string()
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Init { out } => {
            let r = commands::cmd_init(&cli.config()?, out.as_deref())?;
            println!("wrote {} ({} surfels)", show(&r.checkpoint), r.surfels);
            println!("sha256 {}", r.digest);
            println!("preview {}", show(&r.preview));
        }
        Command::RefineGeometry { input, out } | Command::GenerateAppearance { input, out } => {
            let cfg = cli.config()?;
            let r = match cli.command {
                Command::RefineGeometry { .. } => commands::cmd_refine_geometry(&cfg, input, out.as_deref())?,
                _ => commands::cmd_generate_appearance(&cfg, input, out.as_deref())?,
            };
            println!("ran {} steps, wrote {}", r.steps, show(&r.checkpoint));
            println!("sha256 {}", r.digest);
            println!("{} preview images", r.previews.len());
        }
        Command::Render { checkpoint, cameras, trajectory, width, height, fov_deg, out } => {
            let cfg = cli.optional_config()?;
            let base = cfg.as_ref().map(|c| c.sampler()).unwrap_or_default();
            let settings = cfg.as_ref().map(|c| c.settings()).unwrap_or_default();
            let spec = trajectory.clone().or_else(|| cfg.as_ref().and_then(|c| c.trajectory.clone()));
            let source = match (cameras, spec) {
                (Some(path), _) => CameraSource::Table(path.clone()),
                (None, Some(spec)) => CameraSource::Trajectory(
                    spec,
                    Lens {
                        fov_y: fov_deg.map_or(base.fov_y, f64::to_radians),
                        width: width.unwrap_or(base.width),
                        height: height.unwrap_or(base.height),
                    },
                ),
                (None, None) => return Err(Error::invalid("render needs --cameras or --trajectory")),
            };
            let r = commands::cmd_render(checkpoint, &source, &settings, out)?;
            println!("rendered {} cameras, {} files in {}", r.cameras, r.files.len(), show(out));
            println!("{:.1} frames per second", r.fps);
        }
        Command::Metrics { checkpoint, layout, views, out } => {
            let cfg = cli.optional_config()?;
            let opts = EvalOptions {
                views: *views,
                seed: cli.seed.or(cfg.as_ref().map(|c| c.seed)).unwrap_or(0),
                sampler: cfg.as_ref().map(|c| c.sampler()).unwrap_or_else(SamplerConfig::default),
                settings: cfg.as_ref().map(|c| c.settings()).unwrap_or_else(RenderSettings::default),
            };
            let report = commands::cmd_metrics(checkpoint, layout.as_deref(), &opts)?;
            let text = serde_json::to_string_pretty(&commands::metrics_json(&report)).expect("metrics serialize") + "\n";
            if let Some(path) = out {
                std::fs::write(path, &text).map_err(|e| Error::io(path, e))?;
            }
            print!("{text}");
        }
        Command::Cameras { count, out } => {
            let r = commands::cmd_cameras(&cli.config()?, *count, out)?;
            println!("wrote {count} cameras to {}", show(out));
            println!("free-voxel coverage {:.4}", r.free_voxel_coverage);
            println!("box visibility {:?}", r.box_visibility);
            println!("min surface distance {:.4}", r.min_surface_distance);
        }
        Command::MakeDataset { stage, count, out } => {
            let stage = match stage {
                StageArg::Geometry => Stage::Geometry,
                StageArg::Appearance => Stage::Appearance,
            };
            let n = commands::cmd_make_dataset(&cli.config()?, stage, *count, out)?;
            println!("wrote {n} pairs to {}", show(out));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
