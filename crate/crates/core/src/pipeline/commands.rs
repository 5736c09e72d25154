use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::manifest::{DatasetManifest, ManifestReport};
use super::{Context, Method};
use crate::cann::predict_centroids;
use crate::error::{Error, Result};
use crate::gate::filter_cube;
use crate::io::{load_cube, save_cube, write_atomic_with};
use crate::recognizer::{
    classify, classify_track, evaluate, glyph_dataset, load_checkpoint, save_checkpoint, train, EpochStats,
    EvalReport, SampleManifest, SnnWeights, TrackVotes,
};
use crate::reconstruct::{tfi, tfw, GrayImage, TfiStream};
use crate::sim::{linear_velocity, simulate};
use crate::spike::SpikeCube;
use crate::tracking::{self, GtFrame, MotReport, TrackRecord};

fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    write_atomic_with(path, |out| {
        for item in items {
            serde_json::to_writer(&mut *out, item).map_err(|e| Error::Format(e.to_string()))?;
            out.write_all(b"\n")?;
        }
        Ok(())
    })
}

fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| crate::io::open_error(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| Error::Format(format!("{}:{}: {e}", path.display(), i + 1)))?,
        );
    }
    Ok(out)
}

/// Path of the ground-truth records written beside a simulated cube.
pub(crate) fn truth_path(cube: &Path) -> PathBuf {
    cube.with_extension("gt.jsonl")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateSummary {
    pub cube: PathBuf,
    pub truth: PathBuf,
    pub frames: usize,
    pub spikes: u64,
}

/// Simulates the configured scene into `out` and writes its ground truth,
/// one JSON line per tick, to `<out stem>.gt.jsonl`.
pub fn cmd_simulate(ctx: &Context, out: &Path) -> Result<SimulateSummary> {
    let cfg = &ctx.config;
    let scene = cfg.scene.build()?;
    let cube = simulate(scene.as_ref(), &cfg.sim)?;
    let out = ctx.output(out);
    save_cube(&out, &cube)?;
    let truth: Vec<GtFrame> = (0..cube.len() as u64)
        .map(|tick| GtFrame {
            tick,
            objects: scene.objects_at(tick),
        })
        .collect();
    let truth_file = truth_path(&out);
    write_jsonl(&truth_file, &truth)?;
    let summary = SimulateSummary {
        cube: out.clone(),
        truth: truth_file.clone(),
        frames: cube.len(),
        spikes: cube.spike_count(),
    };
    let details = json!({ "frames": summary.frames, "spikes": summary.spikes });
    ctx.write_sidecar(&out, "simulate", &[], details.clone())?;
    ctx.write_sidecar(&truth_file, "simulate", &[], details)?;
    Ok(summary)
}

/// Which ticks to reconstruct.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameSelection {
    At(u64),
    /// Ticks `0, stride, 2*stride, ...` before the end of the stream.
    Every(u64),
}

fn frame_name(dir: &Path, index: usize, ext: &str) -> PathBuf {
    dir.join(format!("frame_{index:06}.{ext}"))
}

fn reconstruct_at(cube: &SpikeCube, method: Method, t: u64, ctx: &Context) -> Result<GrayImage> {
    match method {
        Method::Tfw => tfw(cube, t, &ctx.config.reconstruct.tfw),
        Method::Tfi => tfi(cube, t, &ctx.config.reconstruct.tfi),
    }
}

/// Writes reconstructed images as numbered files in `out_dir`.
pub fn cmd_reconstruct(
    ctx: &Context,
    vdr: &Path,
    method: Method,
    selection: FrameSelection,
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    let cube = load_cube(vdr)?;
    let ticks: Vec<u64> = match selection {
        FrameSelection::At(t) => {
            if t >= cube.len() as u64 {
                return Err(Error::range(
                    "tick",
                    format!("{t} beyond stream of {} frames", cube.len()),
                ));
            }
            vec![t]
        }
        FrameSelection::Every(0) => return Err(Error::Argument("stride must be at least 1".into())),
        FrameSelection::Every(s) => (0..cube.len() as u64).step_by(s as usize).collect(),
    };
    let dir = ctx.output(out_dir);
    let ext = ctx.config.reconstruct.format.extension();
    let mut paths = Vec::with_capacity(ticks.len());
    for (i, &t) in ticks.iter().enumerate() {
        let path = frame_name(&dir, i, ext);
        reconstruct_at(&cube, method, t, ctx)?.save(&path)?;
        paths.push(path);
    }
    ctx.write_sidecar(
        &dir,
        "reconstruct",
        &[vdr],
        json!({ "method": method, "ticks": ticks }),
    )?;
    Ok(paths)
}

/// Playback: one image every `stride` ticks, `ceil(frames / stride)` in
/// all. TFI frames come from the causal streaming estimate.
pub fn cmd_play(ctx: &Context, vdr: &Path, stride: u64, out_dir: &Path) -> Result<Vec<PathBuf>> {
    if stride == 0 {
        return Err(Error::Argument("stride must be at least 1".into()));
    }
    let method = ctx.config.reconstruct.method;
    if method == Method::Tfw {
        return cmd_reconstruct(ctx, vdr, method, FrameSelection::Every(stride), out_dir);
    }
    let cube = load_cube(vdr)?;
    let dir = ctx.output(out_dir);
    let ext = ctx.config.reconstruct.format.extension();
    let mut stream = TfiStream::new(cube.width(), cube.height(), ctx.config.reconstruct.tfi);
    let mut paths = Vec::new();
    for (t, frame) in cube.frames().iter().enumerate() {
        stream.push(frame);
        if t as u64 % stride == 0 {
            let path = frame_name(&dir, paths.len(), ext);
            stream.image().save(&path)?;
            paths.push(path);
        }
    }
    ctx.write_sidecar(
        &dir,
        "play",
        &[vdr],
        json!({ "method": method, "stride": stride, "frames": paths.len() }),
    )?;
    Ok(paths)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterSummary {
    pub frames: usize,
    pub spikes_in: u64,
    pub spikes_out: u64,
}

/// Runs the plasticity gate over `input` and writes the surviving spikes.
pub fn cmd_filter(ctx: &Context, input: &Path, out: &Path) -> Result<FilterSummary> {
    let cube = load_cube(input)?;
    let filtered = filter_cube(&cube, &ctx.config.stp, &ctx.config.gate)?;
    let out = ctx.output(out);
    save_cube(&out, &filtered)?;
    let summary = FilterSummary {
        frames: cube.len(),
        spikes_in: cube.spike_count(),
        spikes_out: filtered.spike_count(),
    };
    ctx.write_sidecar(&out, "filter", &[input], json!(summary))?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackSummary {
    pub frame: (u32, u32),
    pub tracks: usize,
    pub records: usize,
    pub report: Option<MotReport>,
}

fn load_truth(path: &Path, from: u64, frames: usize) -> Result<Vec<GtFrame>> {
    let truth: Vec<GtFrame> = read_jsonl(path)?;
    Ok(truth
        .into_iter()
        .filter(|g| g.tick >= from && g.tick < frames as u64)
        .collect())
}

/// Detects and tracks objects in a (normally gated) stream and writes one
/// JSON line per track per emitted tick. With `truth`, the run is also
/// scored and the report written to `<out stem>.mot.json`.
pub fn cmd_track(ctx: &Context, vdr: &Path, truth: Option<&Path>, out: &Path) -> Result<TrackSummary> {
    let cube = load_cube(vdr)?;
    let run = tracking::run(&cube, &ctx.config.track)?;
    let out = ctx.output(out);
    write_jsonl(&out, &run.records)?;
    let report = match truth {
        Some(path) => {
            let gt = load_truth(path, ctx.config.evaluate.from_tick, cube.len())?;
            let report = run.evaluate(&gt, &ctx.config.evaluate.params())?;
            let report_path = out.with_extension("mot.json");
            let text = serde_json::to_string_pretty(&report).map_err(|e| Error::Format(e.to_string()))?;
            crate::io::write_atomic(&report_path, text.as_bytes())?;
            ctx.write_sidecar(&report_path, "track", &[vdr, path], json!(report))?;
            Some(report)
        }
        None => None,
    };
    let summary = TrackSummary {
        frame: (cube.width(), cube.height()),
        tracks: run.tracks.len(),
        records: run.records.len(),
        report,
    };
    let mut inputs = vec![vdr];
    inputs.extend(truth);
    ctx.write_sidecar(&out, "track", &inputs, json!(summary))?;
    Ok(summary)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub id: u64,
    pub tick: u64,
    pub position: (f64, f64),
    pub leading_time: Option<f64>,
}

/// Runs the attractor predictor along every track in a track-record file.
/// The frame size comes from `frame` or else from the file's sidecar.
pub fn cmd_predict(ctx: &Context, tracks: &Path, frame: Option<(u32, u32)>, out: &Path) -> Result<usize> {
    let records: Vec<TrackRecord> = read_jsonl(tracks)?;
    let frame = match frame {
        Some(f) => f,
        None => {
            let meta = super::Metadata::load(tracks)?;
            serde_json::from_value(meta.details["frame"].clone()).map_err(|_| {
                Error::Argument(format!(
                    "{} has no frame size in its sidecar; pass it explicitly",
                    tracks.display()
                ))
            })?
        }
    };
    let mut by_id: BTreeMap<u64, Vec<(u64, (f64, f64))>> = BTreeMap::new();
    for r in &records {
        by_id.entry(r.id).or_default().push((r.tick, r.centroid));
    }
    let mut out_records = Vec::new();
    for (id, mut samples) in by_id {
        samples.sort_by_key(|s| s.0);
        samples.dedup_by_key(|s| s.0);
        for p in predict_centroids(&samples, &ctx.config.cann, frame)? {
            out_records.push(PredictionRecord {
                id,
                tick: p.tick,
                position: p.position,
                leading_time: p.leading_time,
            });
        }
    }
    let out = ctx.output(out);
    write_jsonl(&out, &out_records)?;
    ctx.write_sidecar(
        &out,
        "predict",
        &[tracks],
        json!({ "frame": frame, "records": out_records.len() }),
    )?;
    Ok(out_records.len())
}

/// Generates the synthetic glyph set into `out_dir` as `<prefix>_NNNNN.vdr`
/// patches plus the manifest `<prefix>.toml`.
pub fn cmd_make_samples(ctx: &Context, out_dir: &Path, prefix: &str) -> Result<SampleManifest> {
    let rc = &ctx.config.recognizer;
    let samples = glyph_dataset(&rc.dataset, &rc.topology)?;
    let classes: Vec<String> = rc.dataset.glyphs.chars().map(String::from).collect();
    let dir = ctx.output(out_dir);
    let m = SampleManifest::write_samples(&dir, prefix, &classes, &samples)?;
    ctx.write_sidecar(
        &dir.join(format!("{prefix}.toml")),
        "make-samples",
        &[],
        json!({ "samples": samples.len() }),
    )?;
    Ok(m)
}

fn check_classes(m: &SampleManifest, w: &SnnWeights) -> Result<()> {
    if m.classes.len() != w.topology.classes {
        return Err(Error::Dimension(format!(
            "manifest has {} classes, network has {}",
            m.classes.len(),
            w.topology.classes
        )));
    }
    Ok(())
}

/// Trains a fresh network on the samples of `manifest` and saves it.
pub fn cmd_train(ctx: &Context, manifest: &Path, out: &Path) -> Result<Vec<EpochStats>> {
    let rc = &ctx.config.recognizer;
    let (m, samples) = SampleManifest::read_samples(manifest)?;
    let mut w = SnnWeights::init(rc.topology, rc.neurons, rc.weight_seed)?;
    check_classes(&m, &w)?;
    let stats = train(&samples, &mut w, &rc.train)?;
    let out = ctx.output(out);
    save_checkpoint(&out, &w)?;
    ctx.write_sidecar(&out, "train", &[manifest], json!({ "epochs": stats }))?;
    Ok(stats)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifyRecord {
    pub path: PathBuf,
    pub label: usize,
    pub predicted: Option<usize>,
}

/// Classifies every sample of `manifest` and writes one JSON line per
/// sample. The returned report scores predictions against the labels.
pub fn cmd_classify(ctx: &Context, manifest: &Path, checkpoint: &Path, out: &Path) -> Result<EvalReport> {
    let w = load_checkpoint(checkpoint)?;
    let (m, samples) = SampleManifest::read_samples(manifest)?;
    check_classes(&m, &w)?;
    let records = m
        .samples
        .iter()
        .zip(&samples)
        .map(|(e, s)| {
            Ok(ClassifyRecord {
                path: e.path.clone(),
                label: e.label,
                predicted: classify(&s.patch, &w)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let report = evaluate(&samples, &w)?;
    let out = ctx.output(out);
    write_jsonl(&out, &records)?;
    ctx.write_sidecar(&out, "classify", &[manifest, checkpoint], json!(report))?;
    Ok(report)
}

/// Tracks objects in a gated stream and labels each track by majority vote
/// of the classifier over windows along it.
pub fn cmd_recognize(ctx: &Context, vdr: &Path, checkpoint: &Path, out: &Path) -> Result<Vec<TrackVotes>> {
    let w = load_checkpoint(checkpoint)?;
    let cube = load_cube(vdr)?;
    let run = tracking::run(&cube, &ctx.config.track)?;
    let rc = &ctx.config.recognizer;
    let mut votes = Vec::new();
    for track in &run.tracks {
        let v = classify_track(&cube, track, &w, rc.vote_from, rc.vote_stride)?;
        if v.abstained + v.votes.iter().sum::<usize>() > 0 {
            votes.push(v);
        }
    }
    let out = ctx.output(out);
    write_jsonl(&out, &votes)?;
    ctx.write_sidecar(&out, "recognize", &[vdr, checkpoint], json!({ "tracks": votes.len() }))?;
    Ok(votes)
}

/// Linear speed in m/s of a point `radius_m` from the axis at `rpm`.
pub fn cmd_velocity(rpm: f64, radius_m: f64) -> Result<f64> {
    linear_velocity(rpm, radius_m)
}

/// Catalogues `files` into a manifest at `out`. Files under the manifest's
/// directory are stored by relative path.
pub fn cmd_manifest(ctx: &Context, files: &[PathBuf], out: &Path) -> Result<DatasetManifest> {
    let out = ctx.output(out);
    let base = std::path::absolute(out.parent().unwrap_or(Path::new(".")))?;
    let sequences = files
        .iter()
        .map(|f| {
            let abs = std::path::absolute(f)?;
            let stored = abs.strip_prefix(&base).map(Path::to_path_buf).unwrap_or(abs.clone());
            DatasetManifest::entry_for(f, stored)
        })
        .collect::<Result<Vec<_>>>()?;
    let m = DatasetManifest { sequences };
    m.save(&out)?;
    let inputs: Vec<&Path> = files.iter().map(PathBuf::as_path).collect();
    ctx.write_sidecar(&out, "manifest", &inputs, json!({ "sequences": m.sequences.len() }))?;
    Ok(m)
}

/// Recomputes spike counts and lengths for every entry of a manifest.
pub fn cmd_validate_manifest(manifest: &Path) -> Result<ManifestReport> {
    let m = DatasetManifest::load(manifest)?;
    Ok(m.validate(manifest.parent().unwrap_or(Path::new("."))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::PipelineConfig;
    use crate::sim::SceneSpec;

    fn small_ctx(dir: &Path) -> Context {
        let cfg = PipelineConfig {
            seed: 5,
            scene: SceneSpec::Uniform {
                width: 6,
                height: 4,
                duration: 37,
                radiance: 40.0,
            },
            ..PipelineConfig::default()
        };
        Context::new(&cfg, Some(dir.to_path_buf())).unwrap()
    }

    #[test]
    fn simulate_is_reproducible_and_documented() {
        let dir = tempfile::tempdir().unwrap();
        let ctx = small_ctx(dir.path());
        let a = cmd_simulate(&ctx, Path::new("a.vdr")).unwrap();
        cmd_simulate(&ctx, Path::new("b.vdr")).unwrap();
        assert_eq!(a.frames, 37);
        assert_eq!(
            std::fs::read(dir.path().join("a.vdr")).unwrap(),
            std::fs::read(dir.path().join("b.vdr")).unwrap()
        );
        let meta = super::super::Metadata::load(&a.cube).unwrap();
        assert_eq!(meta.command, "simulate");
        assert_eq!(meta.config, ctx.config);
        let truth: Vec<GtFrame> = read_jsonl(&a.truth).unwrap();
        assert_eq!(truth.len(), 37);
    }

    #[test]
    fn play_emits_ceil_frames_over_stride() {
        let dir = tempfile::tempdir().unwrap();
        let ctx = small_ctx(dir.path());
        cmd_simulate(&ctx, Path::new("a.vdr")).unwrap();
        let vdr = dir.path().join("a.vdr");
        for stride in [1u64, 5, 10, 37, 40] {
            let frames = cmd_play(&ctx, &vdr, stride, Path::new(&format!("play{stride}"))).unwrap();
            assert_eq!(frames.len() as u64, 37u64.div_ceil(stride));
        }
        let one = cmd_reconstruct(&ctx, &vdr, Method::Tfw, FrameSelection::At(20), Path::new("one")).unwrap();
        assert_eq!(one.len(), 1);
        assert!(cmd_reconstruct(&ctx, &vdr, Method::Tfw, FrameSelection::At(37), Path::new("x")).is_err());
    }

    #[test]
    fn missing_inputs_are_missing_file_errors() {
        let dir = tempfile::tempdir().unwrap();
        let ctx = small_ctx(dir.path());
        let gone = dir.path().join("gone.vdr");
        assert!(matches!(
            cmd_filter(&ctx, &gone, Path::new("f.vdr")),
            Err(Error::MissingFile(_))
        ));
        assert!(matches!(
            cmd_validate_manifest(&dir.path().join("m.toml")),
            Err(Error::MissingFile(_))
        ));
    }

    #[test]
    fn filter_output_feeds_track_and_predict() {
        let dir = tempfile::tempdir().unwrap();
        let ctx = small_ctx(dir.path());
        let sim = cmd_simulate(&ctx, Path::new("a.vdr")).unwrap();
        let f = cmd_filter(&ctx, &sim.cube, Path::new("f.vdr")).unwrap();
        assert!(f.spikes_out <= f.spikes_in);
        let t = cmd_track(&ctx, &dir.path().join("f.vdr"), Some(&sim.truth), Path::new("t.jsonl")).unwrap();
        assert_eq!(t.frame, (6, 4));
        let n = cmd_predict(&ctx, &dir.path().join("t.jsonl"), None, Path::new("p.jsonl")).unwrap();
        let preds: Vec<PredictionRecord> = read_jsonl(&dir.path().join("p.jsonl")).unwrap();
        assert_eq!(preds.len(), n);
    }

    #[test]
    fn velocity_rejects_nonpositive() {
        assert!(cmd_velocity(0.0, 1.0).is_err());
        assert!(cmd_velocity(10.0, -1.0).is_err());
    }
}
