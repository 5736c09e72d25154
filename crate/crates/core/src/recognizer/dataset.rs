//! Labelled spike patches: cropping, synthetic glyph sets and manifests.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{classify, LabeledSample, SnnTopology, SnnWeights};
use crate::error::{Error, Result};
use crate::gate::{filter_cube, GateParams, StpParams};
use crate::geom::BBox;
use crate::sim::{simulate, GroundTruth, RotatingDisc, SimConfig};
use crate::spike::SpikeCube;
use crate::tracking::{self, DetectTrackConfig, Track, TrackingRun};

/// Cuts `topology.window` ticks starting at `t0` out of `cube`, over the
/// square centered on `bbox` whose side is the box's longer edge, and
/// rescales it to the network's input size by nearest neighbour. Pixels
/// falling outside the stream read as silent.
pub fn crop_patch(cube: &SpikeCube, bbox: &BBox, t0: usize, topology: &SnnTopology) -> Result<SpikeCube> {
    if t0 + topology.window > cube.len() {
        return Err(Error::range(
            "crop window",
            format!("ticks {}..{} beyond stream of {}", t0, t0 + topology.window, cube.len()),
        ));
    }
    let side = bbox.width().max(bbox.height()) as f64;
    let (cx, cy) = bbox.center();
    let (x0, y0) = (cx + 0.5 - side / 2.0, cy + 0.5 - side / 2.0);
    let (ow, oh) = (topology.input_w, topology.input_h);
    let src: Vec<Option<usize>> = (0..oh)
        .flat_map(|oy| (0..ow).map(move |ox| (ox, oy)))
        .map(|(ox, oy)| {
            let sx = (x0 + (ox as f64 + 0.5) * side / ow as f64).floor();
            let sy = (y0 + (oy as f64 + 0.5) * side / oh as f64).floor();
            let inside = sx >= 0.0 && sy >= 0.0 && sx < cube.width() as f64 && sy < cube.height() as f64;
            inside.then(|| cube.index(sx as u32, sy as u32))
        })
        .collect();
    let mut patch = SpikeCube::new(ow, oh, cube.tick_ns())?;
    for frame in &cube.frames()[t0..t0 + topology.window] {
        let bits: Vec<bool> = src.iter().map(|s| s.is_some_and(|i| frame.get(i))).collect();
        patch.push_bools(&bits)?;
    }
    Ok(patch)
}

/// Patches cut along every track of `run`, one per track per `stride`
/// ticks from `first_tick`. The crop box is the track's detection at the
/// window's middle tick; the label is the ground-truth object overlapping
/// that box best (IoU at least 0.3). Windows without such a match are
/// skipped.
pub fn samples_from_run(
    filtered: &SpikeCube,
    run: &TrackingRun,
    truth: &dyn GroundTruth,
    topology: &SnnTopology,
    first_tick: u64,
    stride: u64,
) -> Result<Vec<LabeledSample>> {
    let window = topology.window as u64;
    let mut out = Vec::new();
    let mut t0 = first_tick;
    while t0 + window <= filtered.len() as u64 {
        let mid = t0 + window / 2;
        let objects = truth.objects_at(mid);
        for track in &run.tracks {
            let Some(det) = track.at(mid) else { continue };
            let best = objects
                .iter()
                .filter_map(|o| o.label.map(|l| (l, o.bbox.iou(&det.bbox))))
                .filter(|&(_, iou)| iou >= tracking::MATCH_IOU)
                .max_by(|a, b| a.1.total_cmp(&b.1));
            if let Some((label, _)) = best {
                if label < topology.classes {
                    out.push(LabeledSample {
                        patch: crop_patch(filtered, &det.bbox, t0 as usize, topology)?,
                        label,
                    });
                }
            }
        }
        t0 += stride.max(1);
    }
    Ok(out)
}

/// Classifier votes collected along one track.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackVotes {
    pub id: u64,
    /// Windows won by each class.
    pub votes: Vec<usize>,
    /// Windows where no output neuron fired.
    pub abstained: usize,
    /// Majority class; ties go to the lower index.
    pub label: Option<usize>,
}

/// Classifies `track` on windows starting every `stride` ticks from
/// `first_tick`, cropping around the track's detection at each window's
/// middle tick.
pub fn classify_track(
    filtered: &SpikeCube,
    track: &Track,
    w: &SnnWeights,
    first_tick: u64,
    stride: u64,
) -> Result<TrackVotes> {
    let topology = &w.topology;
    let window = topology.window as u64;
    let mut votes = vec![0; topology.classes];
    let mut abstained = 0;
    let mut t0 = first_tick;
    while t0 + window <= filtered.len() as u64 {
        if let Some(det) = track.at(t0 + window / 2) {
            let patch = crop_patch(filtered, &det.bbox, t0 as usize, topology)?;
            match classify(&patch, w)? {
                Some(c) => votes[c] += 1,
                None => abstained += 1,
            }
        }
        t0 += stride.max(1);
    }
    let label = votes
        .iter()
        .enumerate()
        .filter(|&(_, &v)| v > 0)
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
        .map(|(c, _)| c);
    Ok(TrackVotes {
        id: track.id,
        votes,
        abstained,
        label,
    })
}

/// Recipe for a synthetic glyph set cut from rotating-disc runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GlyphDatasetSpec {
    pub glyphs: String,
    pub per_class: usize,
    pub seed: u64,
    /// Ticks simulated per run.
    pub run_ticks: u64,
    /// Ticks ignored at the start of each run while the gate warms up.
    pub settle: u64,
    /// Spacing of crop windows, ticks.
    pub stride: u64,
    pub max_runs: usize,
    pub detect: DetectTrackConfig,
}

impl Default for GlyphDatasetSpec {
    fn default() -> Self {
        GlyphDatasetSpec {
            glyphs: "PKU".into(),
            per_class: 200,
            seed: 0,
            run_ticks: 1500,
            settle: 500,
            stride: 16,
            max_runs: 50,
            detect: DetectTrackConfig {
                min_area: 16,
                ..DetectTrackConfig::default()
            },
        }
    }
}

/// Builds `per_class` samples of every glyph, drawing runs with random disc
/// phase and sensor seed until each class is full. Samples are ordered by
/// class, then by the order they were cut.
pub fn glyph_dataset(spec: &GlyphDatasetSpec, topology: &SnnTopology) -> Result<Vec<LabeledSample>> {
    topology.validate()?;
    let classes = spec.glyphs.chars().count();
    if classes != topology.classes {
        return Err(Error::Argument(format!(
            "{classes} glyphs but the network has {} classes",
            topology.classes
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut buckets: Vec<Vec<LabeledSample>> = vec![Vec::new(); classes];
    for _ in 0..spec.max_runs {
        if buckets.iter().all(|b| b.len() >= spec.per_class) {
            break;
        }
        let disc = RotatingDisc {
            glyphs: spec.glyphs.clone(),
            duration: spec.run_ticks,
            phase: rng.random_range(0.0..2.0 * PI),
            ..RotatingDisc::default()
        };
        disc.validate()?;
        let sim = SimConfig {
            random_phase: true,
            seed: rng.random(),
            ..SimConfig::default()
        };
        let cube = simulate(&disc, &sim)?;
        let filtered = filter_cube(&cube, &StpParams::default(), &GateParams::default())?;
        let run = tracking::run(&filtered, &spec.detect)?;
        for s in samples_from_run(&filtered, &run, &disc, topology, spec.settle, spec.stride)? {
            if buckets[s.label].len() < spec.per_class {
                buckets[s.label].push(s);
            }
        }
    }
    if let Some((label, b)) = buckets.iter().enumerate().find(|(_, b)| b.len() < spec.per_class) {
        return Err(Error::Config(format!(
            "only {} samples of class {label} after {} runs",
            b.len(),
            spec.max_runs
        )));
    }
    Ok(buckets.into_iter().flatten().collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleEntry {
    /// `.vdr` patch, relative to the manifest's directory unless absolute.
    pub path: PathBuf,
    pub label: usize,
}

/// List of sample files with their labels, stored as TOML.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleManifest {
    pub classes: Vec<String>,
    #[serde(default, rename = "sample")]
    pub samples: Vec<SampleEntry>,
}

impl SampleManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| crate::io::open_error(path, e))?;
        let m: SampleManifest =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if let Some(s) = m.samples.iter().find(|s| s.label >= m.classes.len()) {
            return Err(Error::Config(format!(
                "{}: label {} but only {} classes",
                s.path.display(),
                s.label,
                m.classes.len()
            )));
        }
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = toml::to_string(self).map_err(|e| Error::Config(e.to_string()))?;
        crate::io::write_atomic(path, text.as_bytes())
    }

    /// Writes every sample as `<dir>/<prefix>_<index>.vdr` plus a manifest
    /// `<dir>/<prefix>.toml` referring to them.
    pub fn write_samples(dir: &Path, prefix: &str, classes: &[String], samples: &[LabeledSample]) -> Result<Self> {
        let mut entries = Vec::with_capacity(samples.len());
        for (i, s) in samples.iter().enumerate() {
            let name = PathBuf::from(format!("{prefix}_{i:05}.vdr"));
            crate::io::save_cube(&dir.join(&name), &s.patch)?;
            entries.push(SampleEntry {
                path: name,
                label: s.label,
            });
        }
        let m = SampleManifest {
            classes: classes.to_vec(),
            samples: entries,
        };
        m.save(&dir.join(format!("{prefix}.toml")))?;
        Ok(m)
    }

    /// Reads every sample listed in the manifest at `path`.
    pub fn read_samples(path: &Path) -> Result<(Self, Vec<LabeledSample>)> {
        let m = Self::load(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let samples = m
            .samples
            .iter()
            .map(|e| {
                let p = if e.path.is_absolute() {
                    e.path.clone()
                } else {
                    base.join(&e.path)
                };
                Ok(LabeledSample {
                    patch: crate::io::load_cube(&p)?,
                    label: e.label,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((m, samples))
    }
}
