use serde::{Deserialize, Serialize};

use super::detect::Detection;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrackerParams {
    /// Largest centroid distance, in pixels, at which a detection may extend a track.
    pub gate_radius: f64,
    /// Ticks without a match before a track is marked lost.
    pub lost_patience: u64,
}

impl Default for TrackerParams {
    fn default() -> Self {
        TrackerParams {
            gate_radius: 20.0,
            lost_patience: 100,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrackState {
    Active,
    Lost,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub id: u64,
    pub history: Vec<Detection>,
    pub last_seen: u64,
    pub state: TrackState,
}

impl Track {
    pub fn last(&self) -> &Detection {
        self.history.last().expect("tracks are created with a detection")
    }

    pub fn at(&self, tick: u64) -> Option<&Detection> {
        self.history
            .binary_search_by_key(&tick, |d| d.tick)
            .ok()
            .map(|i| &self.history[i])
    }

    pub fn centroids(&self) -> impl Iterator<Item = (u64, (f64, f64))> + '_ {
        self.history.iter().map(|d| (d.tick, d.centroid))
    }
}

/// Greedy nearest-centroid tracking-by-detection.
#[derive(Debug, Clone, Default)]
pub struct Tracker {
    pub params: TrackerParams,
    tracks: Vec<Track>,
    next_id: u64,
}

impl Tracker {
    pub fn new(params: TrackerParams) -> Self {
        Tracker {
            params,
            tracks: Vec::new(),
            next_id: 0,
        }
    }

    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    pub fn into_tracks(self) -> Vec<Track> {
        self.tracks
    }

    pub fn active(&self) -> impl Iterator<Item = &Track> {
        self.tracks.iter().filter(|t| t.state == TrackState::Active)
    }

    /// Matches `detections` observed at `tick` against active tracks.
    ///
    /// Candidate pairs within the gate are taken closest first; leftover
    /// detections open new tracks. Returns the ids updated or created.
    pub fn associate(&mut self, tick: u64, detections: Vec<Detection>) -> Vec<u64> {
        let r2 = self.params.gate_radius * self.params.gate_radius;
        let mut pairs = Vec::new();
        for (ti, track) in self.tracks.iter().enumerate() {
            if track.state != TrackState::Active {
                continue;
            }
            let (tx, ty) = track.last().centroid;
            for (di, det) in detections.iter().enumerate() {
                let (dx, dy) = (det.centroid.0 - tx, det.centroid.1 - ty);
                let d2 = dx * dx + dy * dy;
                if d2 <= r2 {
                    pairs.push((d2, ti, di));
                }
            }
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

        let mut track_taken = vec![false; self.tracks.len()];
        let mut assigned: Vec<Option<usize>> = vec![None; detections.len()];
        for (_, ti, di) in pairs {
            if !track_taken[ti] && assigned[di].is_none() {
                track_taken[ti] = true;
                assigned[di] = Some(ti);
            }
        }

        let mut touched = Vec::new();
        for (det, slot) in detections.into_iter().zip(assigned) {
            match slot {
                Some(ti) => {
                    let track = &mut self.tracks[ti];
                    track.last_seen = tick;
                    track.history.push(det);
                    touched.push(track.id);
                }
                None => {
                    let id = self.next_id;
                    self.next_id += 1;
                    self.tracks.push(Track {
                        id,
                        history: vec![det],
                        last_seen: tick,
                        state: TrackState::Active,
                    });
                    touched.push(id);
                }
            }
        }

        for track in &mut self.tracks {
            if track.state == TrackState::Active
                && tick.saturating_sub(track.last_seen) >= self.params.lost_patience
            {
                track.state = TrackState::Lost;
            }
        }
        touched
    }
}

/// Functional form: advance `tracker` by one tick of detections.
pub fn associate(tracker: &mut Tracker, tick: u64, detections: Vec<Detection>) -> Vec<u64> {
    tracker.associate(tick, detections)
}
