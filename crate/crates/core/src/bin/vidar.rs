use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use vidar::pipeline::{self, Context, FrameSelection, ImageFormat, Method, PipelineConfig};
use vidar::{Error, Result};

#[derive(Parser)]
#[command(name = "vidar", version, about = "Spike-camera simulation, reconstruction, tracking and recognition")]
struct Cli {
    /// TOML pipeline config; flags below override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Start from a named scenario (disc, two-lanes) instead of the defaults.
    #[arg(long, global = true, conflicts_with = "config")]
    preset: Option<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for relative output paths (default: $VIDAR_OUT_DIR, then `.`).
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Tfw,
    Tfi,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Tfw => Method::Tfw,
            MethodArg::Tfi => Method::Tfi,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Pgm,
    Png,
}

#[derive(Subcommand)]
enum Command {
    /// Print the resolved config as TOML.
    Config,
    /// Simulate the configured scene into a .vdr cube plus ground truth.
    Simulate {
        #[arg(long, default_value = "scene.vdr")]
        out: PathBuf,
    },
    /// Reconstruct images at one tick or every `stride` ticks.
    Reconstruct {
        vdr: PathBuf,
        #[arg(long, value_enum)]
        method: Option<MethodArg>,
        #[arg(long, conflicts_with = "stride")]
        tick: Option<u64>,
        #[arg(long)]
        stride: Option<u64>,
        #[arg(long, value_enum)]
        format: Option<FormatArg>,
        #[arg(long, default_value = "frames")]
        out: PathBuf,
    },
    /// Emit numbered playback frames, one every `stride` ticks.
    Play {
        vdr: PathBuf,
        #[arg(long)]
        stride: Option<u64>,
        #[arg(long, value_enum)]
        method: Option<MethodArg>,
        #[arg(long, value_enum)]
        format: Option<FormatArg>,
        #[arg(long, default_value = "play")]
        out: PathBuf,
    },
    /// Drop static background with the plasticity gate.
    Filter {
        vdr: PathBuf,
        #[arg(long, default_value = "filtered.vdr")]
        out: PathBuf,
    },
    /// Detect and track objects; score against ground truth if given.
    Track {
        vdr: PathBuf,
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long, default_value = "tracks.jsonl")]
        out: PathBuf,
    },
    /// Anticipative position predictions along every track.
    Predict {
        tracks: PathBuf,
        #[arg(long, requires = "height")]
        width: Option<u32>,
        #[arg(long, requires = "width")]
        height: Option<u32>,
        #[arg(long, default_value = "predictions.jsonl")]
        out: PathBuf,
    },
    /// Generate the synthetic glyph sample set and its manifest.
    Samples {
        #[arg(long, default_value = "samples")]
        out: PathBuf,
        #[arg(long, default_value = "train")]
        prefix: String,
        #[arg(long)]
        per_class: Option<usize>,
    },
    /// Train the recognizer on a sample manifest.
    Train {
        manifest: PathBuf,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long, default_value = "recognizer.ckpt")]
        out: PathBuf,
    },
    /// Classify every sample of a manifest.
    Classify {
        manifest: PathBuf,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, default_value = "labels.jsonl")]
        out: PathBuf,
    },
    /// Track objects in a gated stream and label each track.
    Recognize {
        vdr: PathBuf,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, default_value = "recognized.jsonl")]
        out: PathBuf,
    },
    /// Linear speed (m/s) at `radius_m` on a disc spinning at `rpm`.
    Velocity { rpm: f64, radius_m: f64 },
    /// Catalogue .vdr files into a dataset manifest.
    Manifest {
        files: Vec<PathBuf>,
        #[arg(long, default_value = "manifest.toml")]
        out: PathBuf,
    },
    /// Recompute spike counts and lengths for a dataset manifest.
    ValidateManifest { manifest: PathBuf },
}

fn print<T: Serialize>(value: &T) -> Result<()> {
    println!(
        "{}",
        serde_json::to_string(value).map_err(|e| Error::Format(e.to_string()))?
    );
    Ok(())
}

fn checkpoint(given: Option<PathBuf>, ctx: &Context) -> Result<PathBuf> {
    given
        .or_else(|| ctx.config.recognizer.checkpoint.clone())
        .ok_or_else(|| Error::Argument("no checkpoint given and none in the config".into()))
}

fn set_format(cfg: &mut PipelineConfig, method: Option<MethodArg>, format: Option<FormatArg>) {
    if let Some(m) = method {
        cfg.reconstruct.method = m.into();
    }
    match format {
        Some(FormatArg::Pgm) => cfg.reconstruct.format = ImageFormat::Pgm,
        Some(FormatArg::Png) => cfg.reconstruct.format = ImageFormat::Png,
        None => {}
    }
}

/// Returns whether the command's own check passed.
fn run(cli: Cli) -> Result<bool> {
    let mut cfg = match (&cli.config, &cli.preset) {
        (Some(path), _) => PipelineConfig::load(path)?,
        (None, Some(name)) => PipelineConfig::preset(name)?,
        (None, None) => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    match &cli.command {
        Command::Reconstruct { method, format, .. } | Command::Play { method, format, .. } => {
            set_format(&mut cfg, *method, *format)
        }
        Command::Samples {
            per_class: Some(n), ..
        } => cfg.recognizer.dataset.per_class = *n,
        Command::Train { epochs: Some(n), .. } => cfg.recognizer.train.epochs = *n,
        _ => {}
    }
    let ctx = Context::new(&cfg, cli.out_dir)?;
    match cli.command {
        Command::Config => print!("{}", ctx.config.to_toml()?),
        Command::Simulate { out } => print(&pipeline::cmd_simulate(&ctx, &out)?)?,
        Command::Reconstruct {
            vdr, tick, stride, out, ..
        } => {
            let selection = match tick {
                Some(t) => FrameSelection::At(t),
                None => FrameSelection::Every(stride.unwrap_or(ctx.config.reconstruct.stride)),
            };
            let frames = pipeline::cmd_reconstruct(&ctx, &vdr, ctx.config.reconstruct.method, selection, &out)?;
            print(&frames)?
        }
        Command::Play { vdr, stride, out, .. } => {
            let stride = stride.unwrap_or(ctx.config.reconstruct.stride);
            print(&pipeline::cmd_play(&ctx, &vdr, stride, &out)?.len())?
        }
        Command::Filter { vdr, out } => print(&pipeline::cmd_filter(&ctx, &vdr, &out)?)?,
        Command::Track { vdr, truth, out } => {
            print(&pipeline::cmd_track(&ctx, &vdr, truth.as_deref(), &out)?)?
        }
        Command::Predict {
            tracks,
            width,
            height,
            out,
        } => {
            let frame = width.zip(height);
            print(&pipeline::cmd_predict(&ctx, &tracks, frame, &out)?)?
        }
        Command::Samples { out, prefix, .. } => {
            print(&pipeline::cmd_make_samples(&ctx, &out, &prefix)?.samples.len())?
        }
        Command::Train { manifest, out, .. } => {
            for s in pipeline::cmd_train(&ctx, &manifest, &out)? {
                print(&s)?;
            }
        }
        Command::Classify {
            manifest,
            checkpoint: ckpt,
            out,
        } => {
            let ckpt = checkpoint(ckpt, &ctx)?;
            print(&pipeline::cmd_classify(&ctx, &manifest, &ckpt, &out)?)?
        }
        Command::Recognize {
            vdr,
            checkpoint: ckpt,
            out,
        } => {
            let ckpt = checkpoint(ckpt, &ctx)?;
            for v in pipeline::cmd_recognize(&ctx, &vdr, &ckpt, &out)? {
                print(&v)?;
            }
        }
        Command::Velocity { rpm, radius_m } => println!("{}", pipeline::cmd_velocity(rpm, radius_m)?),
        Command::Manifest { files, out } => {
            print(&pipeline::cmd_manifest(&ctx, &files, &out)?.sequences.len())?
        }
        Command::ValidateManifest { manifest } => {
            let report = pipeline::cmd_validate_manifest(Path::new(&manifest))?;
            print(&report)?;
            return Ok(report.is_clean());
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error[{}]: {e}", pipeline::error_category(&e));
            ExitCode::from(pipeline::exit_code(&e))
        }
    }
}
