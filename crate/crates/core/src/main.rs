use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use metamorph::cli_io::{
    exit_code, interpolate_command, register_command, shoot_command, synth_command, viz_command,
    RunConfig, Scene, EXIT_CONFIG,
};
use metamorph::{Error, Result};

#[derive(Parser)]
#[command(name = "metamorph", version, about = "Geodesic shooting and interpolation of grayscale images")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// `key = value` configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Spline level N (default: image level - 1)
    #[arg(long)]
    spline_level: Option<u32>,
    /// Extra `key=value` settings, applied after the configuration file
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Register the second image to the first
    Register {
        #[arg(long)]
        u0: Option<PathBuf>,
        #[arg(long)]
        u1: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Extrapolate an image sequence from two consecutive images
    Shoot {
        #[arg(long)]
        u0: Option<PathBuf>,
        #[arg(long)]
        u1: Option<PathBuf>,
        /// Number of steps K
        #[arg(long)]
        steps: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Compute a discrete geodesic between two images
    Interpolate {
        #[arg(long)]
        u0: Option<PathBuf>,
        #[arg(long = "uK", alias = "uk")]
        uk: Option<PathBuf>,
        /// Number of segments K
        #[arg(long)]
        segments: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Color-code the velocity of a deformation file
    VizVelocity {
        #[arg(long)]
        phi: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Velocity scale K
        #[arg(long, default_value_t = 1)]
        steps: usize,
        /// Level of the sampling grid (default: spline level + 1)
        #[arg(long)]
        image_level: Option<u32>,
    },
    /// Write a synthetic image pair
    Synth {
        #[arg(long, value_enum, default_value_t = SceneArg::Ellipses)]
        scene: SceneArg,
        /// Image level M (side 2^M + 1)
        #[arg(long, default_value_t = 7)]
        level: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "png")]
        format: String,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SceneArg {
    Ellipses,
    Blobs,
    Random,
}

fn load_config(common: &Common, u0: Option<PathBuf>, u1: Option<PathBuf>) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            RunConfig::parse(&text)?
        }
        None => RunConfig::default(),
    };
    for kv in &common.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set {kv:?}: expected KEY=VALUE")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    cfg.u0 = u0.or(cfg.u0);
    cfg.u1 = u1.or(cfg.u1);
    cfg.out = common.out.clone().or(cfg.out);
    cfg.spline_level = common.spline_level.or(cfg.spline_level);
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Register { u0, u1, common } => register_command(&load_config(&common, u0, u1)?),
        Command::Shoot { u0, u1, steps, common } => {
            let mut cfg = load_config(&common, u0, u1)?;
            cfg.steps = steps.unwrap_or(cfg.steps);
            shoot_command(&cfg)
        }
        Command::Interpolate { u0, uk, segments, common } => {
            let mut cfg = load_config(&common, u0, uk)?;
            cfg.segments = segments.unwrap_or(cfg.segments);
            interpolate_command(&cfg)
        }
        Command::VizVelocity { phi, out, steps, image_level } => viz_command(&phi, &out, steps, image_level),
        Command::Synth { scene, level, seed, format, out } => {
            let scene = match scene {
                SceneArg::Ellipses => Scene::Ellipses,
                SceneArg::Blobs => Scene::Blobs,
                SceneArg::Random => Scene::Random,
            };
            synth_command(scene, level, seed, &out, &format)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG as u8 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
