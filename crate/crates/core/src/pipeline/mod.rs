//! Config files, output metadata and the commands behind the `vidar` binary.
//!
//! A run is described by one TOML [`PipelineConfig`]. Every command writes
//! its artifacts atomically and leaves a `<artifact>.meta.json` sidecar next
//! to each one holding the resolved config and the tool version.

mod commands;
mod manifest;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cann::CannParams;
use crate::error::{Error, Result};
use crate::gate::{GateParams, StpParams};
use crate::recognizer::{GlyphDatasetSpec, NeuronParams, SnnTopology, TrainConfig};
use crate::reconstruct::{TfiParams, TfwParams};
use crate::sim::{MovingBoxes, RotatingDisc, SceneSpec, SimConfig};
use crate::tracking::{DetectTrackConfig, EvalParams};

pub use commands::{
    cmd_classify, cmd_filter, cmd_make_samples, cmd_manifest, cmd_play, cmd_predict, cmd_recognize,
    cmd_reconstruct, cmd_simulate, cmd_track, cmd_train, cmd_validate_manifest, cmd_velocity,
    ClassifyRecord, FilterSummary, FrameSelection, PredictionRecord, SimulateSummary, TrackSummary,
};
pub use manifest::{DatasetManifest, ManifestReport, Mismatch, SequenceEntry};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "VIDAR_OUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Tfw,
    #[default]
    Tfi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ImageFormat {
    #[default]
    Pgm,
    Png,
}

impl ImageFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ImageFormat::Pgm => "pgm",
            ImageFormat::Png => "png",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReconstructConfig {
    pub method: Method,
    /// Ticks between emitted frames.
    pub stride: u64,
    pub format: ImageFormat,
    pub tfw: TfwParams,
    pub tfi: TfiParams,
}

impl Default for ReconstructConfig {
    fn default() -> Self {
        ReconstructConfig {
            method: Method::Tfi,
            stride: 400,
            format: ImageFormat::Pgm,
            tfw: TfwParams::default(),
            tfi: TfiParams::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluateConfig {
    pub iou_threshold: f64,
    pub dsp_window: u64,
    /// Ground truth before this tick is ignored (gate and tracker warm-up).
    pub from_tick: u64,
}

impl Default for EvaluateConfig {
    fn default() -> Self {
        let p = EvalParams::default();
        EvaluateConfig {
            iou_threshold: p.iou_threshold,
            dsp_window: p.dsp_window,
            from_tick: 0,
        }
    }
}

impl EvaluateConfig {
    pub fn params(&self) -> EvalParams {
        EvalParams {
            iou_threshold: self.iou_threshold,
            dsp_window: self.dsp_window,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RecognizerConfig {
    pub topology: SnnTopology,
    pub neurons: NeuronParams,
    pub train: TrainConfig,
    pub dataset: GlyphDatasetSpec,
    /// Seed for the initial weights.
    pub weight_seed: u64,
    /// Ticks between classified windows along a track.
    pub vote_stride: u64,
    /// Ticks skipped at the start of a stream before voting.
    pub vote_from: u64,
    pub checkpoint: Option<PathBuf>,
}

impl Default for RecognizerConfig {
    fn default() -> Self {
        RecognizerConfig {
            topology: SnnTopology::default(),
            neurons: NeuronParams::default(),
            train: TrainConfig::default(),
            dataset: GlyphDatasetSpec::default(),
            weight_seed: 0,
            vote_stride: 16,
            vote_from: 500,
            checkpoint: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    /// Directory for relative output paths. Falls back to `$VIDAR_OUT_DIR`,
    /// then the working directory.
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    /// Master seed. The simulator, dataset, weight and shuffle seeds are
    /// derived from it when the config is resolved.
    pub seed: u64,
    pub scene: SceneSpec,
    pub sim: SimConfig,
    pub reconstruct: ReconstructConfig,
    pub stp: StpParams,
    pub gate: GateParams,
    pub track: DetectTrackConfig,
    pub evaluate: EvaluateConfig,
    pub cann: CannParams,
    pub recognizer: RecognizerConfig,
    pub output: OutputConfig,
}

/// SplitMix64 finaliser over `master` and a per-consumer tag.
pub fn derive_seed(master: u64, tag: u64) -> u64 {
    let mut z = master ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| crate::io::open_error(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Named scenario with the detection settings it was tuned with:
    /// `disc` (three glyphs on a 2400 rpm disc, two rotations) or
    /// `two-lanes` (two boxes crossing in opposite lanes).
    pub fn preset(name: &str) -> Result<Self> {
        let mut cfg = PipelineConfig::default();
        cfg.sim.random_phase = true;
        cfg.track.min_area = 16;
        match name {
            "disc" => {
                cfg.scene = SceneSpec::RotatingDisc(RotatingDisc {
                    duration: 2000,
                    ..RotatingDisc::default()
                });
                cfg.evaluate.from_tick = 1000;
            }
            "two-lanes" => {
                let enter = 700;
                cfg.scene = SceneSpec::MovingBoxes(MovingBoxes::two_lanes(96, 64, 12.0, 0.5, enter));
                cfg.evaluate.from_tick = enter;
            }
            other => {
                return Err(Error::Config(format!(
                    "unknown preset {other:?}; expected disc or two-lanes"
                )))
            }
        }
        Ok(cfg)
    }

    /// Copy with every subordinate seed derived from `seed`.
    pub fn resolved(&self) -> Self {
        let mut c = self.clone();
        c.sim.seed = derive_seed(self.seed, 1);
        c.recognizer.dataset.seed = derive_seed(self.seed, 2);
        c.recognizer.weight_seed = derive_seed(self.seed, 3);
        c.recognizer.train.seed = derive_seed(self.seed, 4);
        c
    }

    pub fn validate(&self) -> Result<()> {
        let wrap = |e: Error| Error::Config(e.to_string());
        self.scene.build().map_err(wrap)?;
        self.sim.validate().map_err(wrap)?;
        self.stp.validate().map_err(wrap)?;
        self.gate.validate().map_err(wrap)?;
        self.track.lif.validate().map_err(wrap)?;
        self.cann.validate().map_err(wrap)?;
        self.recognizer.topology.validate().map_err(wrap)?;
        self.recognizer.neurons.validate().map_err(wrap)?;
        self.recognizer.train.validate().map_err(wrap)?;
        if self.reconstruct.stride == 0 || self.track.stride == 0 || self.recognizer.vote_stride == 0 {
            return Err(Error::Config("strides must be at least 1".into()));
        }
        Ok(())
    }
}

/// Resolved config plus the output directory; the commands run in one.
#[derive(Debug, Clone)]
pub struct Context {
    pub config: PipelineConfig,
    pub out_dir: PathBuf,
}

impl Context {
    /// Validates and resolves `config`. The output directory is `out_dir`
    /// if given, else `output.dir` from the config, else `$VIDAR_OUT_DIR`,
    /// else the working directory.
    pub fn new(config: &PipelineConfig, out_dir: Option<PathBuf>) -> Result<Self> {
        config.validate()?;
        let out_dir = out_dir
            .or_else(|| config.output.dir.clone())
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."));
        Ok(Context {
            config: config.resolved(),
            out_dir,
        })
    }

    /// Resolves an output path against the output directory.
    pub fn output(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.out_dir.join(path)
        }
    }

    /// Writes the metadata sidecar for `artifact`.
    pub fn write_sidecar(
        &self,
        artifact: &Path,
        command: &str,
        inputs: &[&Path],
        details: serde_json::Value,
    ) -> Result<()> {
        let meta = Metadata {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            inputs: inputs.iter().map(|p| p.to_path_buf()).collect(),
            config: self.config.clone(),
            details,
        };
        let text = serde_json::to_string_pretty(&meta).map_err(|e| Error::Format(e.to_string()))?;
        crate::io::write_atomic(&sidecar_path(artifact), text.as_bytes())
    }
}

/// Provenance record written next to every artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub inputs: Vec<PathBuf>,
    pub config: PipelineConfig,
    pub details: serde_json::Value,
}

impl Metadata {
    pub fn load(artifact: &Path) -> Result<Self> {
        let path = sidecar_path(artifact);
        let text = std::fs::read_to_string(&path).map_err(|e| crate::io::open_error(&path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
    }
}

/// `<artifact>.meta.json`.
pub fn sidecar_path(artifact: &Path) -> PathBuf {
    let mut name = artifact.file_name().unwrap_or_default().to_os_string();
    name.push(".meta.json");
    artifact.with_file_name(name)
}

/// Short category name for an error, printed as `error[<category>]`.
pub fn error_category(e: &Error) -> &'static str {
    match e {
        Error::MissingFile(_) => "missing-file",
        Error::Config(_) => "config",
        Error::Dimension(_) => "dimension",
        Error::Format(_) | Error::Truncated { .. } => "format",
        Error::Argument(_) | Error::Range { .. } => "argument",
        Error::Divergence { .. } | Error::NoBump => "numeric",
        Error::Evaluation(_) => "evaluation",
        Error::Io(_) => "io",
    }
}

/// Process exit status for an error. 2 is left to argument-parser usage errors.
pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::MissingFile(_) => 3,
        Error::Config(_) => 4,
        Error::Dimension(_) => 5,
        Error::Format(_) | Error::Truncated { .. } => 6,
        Error::Argument(_) | Error::Range { .. } => 7,
        Error::Divergence { .. } | Error::NoBump => 8,
        Error::Evaluation(_) => 9,
        Error::Io(_) => 10,
    }
}
