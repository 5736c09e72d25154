//! Detection and tracking over a gated spike stream.
//!
//! The gated stream drives a LIF detection layer; each tick the fired neurons
//! are split into 8-connected components, and components are chained into
//! tracks by nearest-centroid association.

mod detect;
mod lif;
mod mot;
mod tracker;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::BBox;
use crate::spike::SpikeCube;

pub use detect::{detect, merge_nearby, Detection};
pub use lif::{lif_step, DetectionLayer, LifParams};
pub use mot::{evaluate, EvalParams, GtFrame, MotReport, MATCH_IOU};
pub use tracker::{associate, Track, TrackState, Tracker, TrackerParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectTrackConfig {
    pub lif: LifParams,
    pub min_area: usize,
    /// Components whose boxes are at most this many pixels apart are reported as one object.
    pub merge_gap: i64,
    pub tracker: TrackerParams,
    /// Emit records every `stride` ticks.
    pub stride: u64,
}

impl Default for DetectTrackConfig {
    fn default() -> Self {
        DetectTrackConfig {
            lif: LifParams::default(),
            min_area: 4,
            merge_gap: 3,
            tracker: TrackerParams::default(),
            stride: 1,
        }
    }
}

/// One line of track output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackRecord {
    pub tick: u64,
    pub id: u64,
    pub bbox: BBox,
    pub centroid: (f64, f64),
}

#[derive(Debug, Clone)]
pub struct TrackingRun {
    pub tracks: Vec<Track>,
    pub first_tick: u64,
    pub last_tick: u64,
    pub records: Vec<TrackRecord>,
}

impl TrackingRun {
    pub fn evaluate(&self, gt: &[GtFrame], params: &EvalParams) -> Result<MotReport> {
        evaluate(&self.tracks, (self.first_tick, self.last_tick), gt, params)
    }

    /// Tracks with at least one detection inside `first..=last`.
    pub fn tracks_in(&self, first: u64, last: u64) -> Vec<&Track> {
        self.tracks
            .iter()
            .filter(|t| t.history.iter().any(|d| d.tick >= first && d.tick <= last))
            .collect()
    }
}

/// Runs detection and tracking over every frame of `cube`.
pub fn run(cube: &SpikeCube, cfg: &DetectTrackConfig) -> Result<TrackingRun> {
    if cfg.stride == 0 {
        return Err(Error::Argument("stride must be at least 1".into()));
    }
    if cube.is_empty() {
        return Err(Error::Argument("cannot track an empty stream".into()));
    }
    let mut layer = DetectionLayer::new(cube.width(), cube.height(), cfg.lif)?;
    let mut tracker = Tracker::new(cfg.tracker);
    let mut records = Vec::new();
    for frame in cube.frames() {
        let tick = frame.tick_index;
        let fired = layer.step(frame)?;
        let detections = merge_nearby(
            detect(&fired, cube.width(), cube.height(), cfg.min_area),
            cfg.merge_gap,
        );
        let touched = tracker.associate(tick, detections);
        if tick % cfg.stride == 0 {
            for id in touched {
                let track = &tracker.tracks()[id as usize];
                let last = track.last();
                records.push(TrackRecord {
                    tick,
                    id,
                    bbox: last.bbox,
                    centroid: last.centroid,
                });
            }
        }
    }
    Ok(TrackingRun {
        tracks: tracker.into_tracks(),
        first_tick: 0,
        last_tick: cube.len() as u64 - 1,
        records,
    })
}
