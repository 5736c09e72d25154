//! CLEAR-MOT style evaluation against per-tick ground truth.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::tracker::Track;
use crate::error::{Error, Result};
use crate::geom::BBox;
use crate::sim::GtObject;

/// Minimum IoU for a hypothesis to count as matching a ground-truth object.
pub const MATCH_IOU: f64 = 0.3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GtFrame {
    pub tick: u64,
    pub objects: Vec<GtObject>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotReport {
    /// Fraction of (object, window) pairs detected at least once.
    pub dsp: f64,
    pub mota: f64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub ids: u64,
    pub matches: u64,
    pub total_gt: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalParams {
    pub iou_threshold: f64,
    /// Window length in ticks for the detection success rate; 0 = whole run.
    pub dsp_window: u64,
}

impl Default for EvalParams {
    fn default() -> Self {
        EvalParams {
            iou_threshold: MATCH_IOU,
            dsp_window: 0,
        }
    }
}

/// Scores `tracks` (produced over ticks `tracked.0..=tracked.1`) against `gt`.
pub fn evaluate(
    tracks: &[Track],
    tracked: (u64, u64),
    gt: &[GtFrame],
    params: &EvalParams,
) -> Result<MotReport> {
    let (first, last) = match (gt.first(), gt.last()) {
        (Some(a), Some(b)) => (a.tick, b.tick),
        _ => return Err(Error::Evaluation("no ground-truth frames".into())),
    };
    if gt.windows(2).any(|w| w[1].tick <= w[0].tick) {
        return Err(Error::Evaluation("ground-truth ticks must increase".into()));
    }
    if first < tracked.0 || last > tracked.1 {
        return Err(Error::Evaluation(format!(
            "ground truth spans ticks {first}..={last} but tracking covered {}..={}",
            tracked.0, tracked.1
        )));
    }

    let mut mapping: HashMap<u32, u64> = HashMap::new();
    let (mut fp, mut fn_, mut ids, mut matches, mut total) = (0u64, 0u64, 0u64, 0u64, 0u64);
    // (window index, gt id) -> detected?
    let mut windows: BTreeMap<(u64, u32), bool> = BTreeMap::new();

    for frame in gt {
        let hyps: Vec<(u64, BBox)> = tracks
            .iter()
            .filter_map(|t| t.at(frame.tick).map(|d| (t.id, d.bbox)))
            .collect();
        let mut hyp_taken: HashSet<u64> = HashSet::new();
        let mut gt_match: Vec<Option<u64>> = vec![None; frame.objects.len()];

        // keep last tick's correspondences while they still overlap
        for (gi, obj) in frame.objects.iter().enumerate() {
            if let Some(&hid) = mapping.get(&obj.id) {
                if let Some((_, hb)) = hyps.iter().find(|(id, _)| *id == hid) {
                    if !hyp_taken.contains(&hid) && obj.bbox.iou(hb) >= params.iou_threshold {
                        hyp_taken.insert(hid);
                        gt_match[gi] = Some(hid);
                    }
                }
            }
        }

        let mut pairs = Vec::new();
        for (gi, obj) in frame.objects.iter().enumerate() {
            if gt_match[gi].is_some() {
                continue;
            }
            for (hid, hb) in &hyps {
                let iou = obj.bbox.iou(hb);
                if !hyp_taken.contains(hid) && iou >= params.iou_threshold {
                    pairs.push((iou, gi, *hid));
                }
            }
        }
        pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        for (_, gi, hid) in pairs {
            if gt_match[gi].is_none() && !hyp_taken.contains(&hid) {
                hyp_taken.insert(hid);
                gt_match[gi] = Some(hid);
                let gid = frame.objects[gi].id;
                if let Some(prev) = mapping.insert(gid, hid) {
                    if prev != hid {
                        ids += 1;
                    }
                }
            }
        }

        let window = if params.dsp_window == 0 {
            0
        } else {
            (frame.tick - first) / params.dsp_window
        };
        for (obj, m) in frame.objects.iter().zip(&gt_match) {
            total += 1;
            let hit = windows.entry((window, obj.id)).or_insert(false);
            match m {
                Some(_) => {
                    matches += 1;
                    *hit = true;
                }
                None => fn_ += 1,
            }
        }
        fp += (hyps.len() - hyp_taken.len()) as u64;
    }

    let dsp = if windows.is_empty() {
        1.0
    } else {
        windows.values().filter(|&&d| d).count() as f64 / windows.len() as f64
    };
    let mota = if total == 0 {
        1.0 - (fp + ids) as f64
    } else {
        1.0 - (fp + fn_ + ids) as f64 / total as f64
    };
    Ok(MotReport {
        dsp,
        mota,
        fp,
        fn_,
        ids,
        matches,
        total_gt: total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tracking::detect::Detection;
    use crate::tracking::tracker::TrackState;

    fn gt_obj(id: u32, x: i64) -> GtObject {
        GtObject {
            id,
            bbox: BBox::new(x, 0, x + 9, 9),
            label: None,
        }
    }

    fn track(id: u64, points: &[(u64, i64)]) -> Track {
        Track {
            id,
            history: points
                .iter()
                .map(|&(tick, x)| Detection {
                    tick,
                    mask: vec![],
                    bbox: BBox::new(x, 0, x + 9, 9),
                    centroid: (x as f64 + 4.5, 4.5),
                })
                .collect(),
            last_seen: points.last().unwrap().0,
            state: TrackState::Active,
        }
    }

    fn two_objects(ticks: u64) -> Vec<GtFrame> {
        (0..ticks)
            .map(|t| GtFrame {
                tick: t,
                objects: vec![gt_obj(0, t as i64), gt_obj(1, 100 - t as i64)],
            })
            .collect()
    }

    #[test]
    fn perfect_tracker() {
        let gt = two_objects(20);
        let a: Vec<(u64, i64)> = (0..20).map(|t| (t, t as i64)).collect();
        let b: Vec<(u64, i64)> = (0..20).map(|t| (t, 100 - t as i64)).collect();
        let r = evaluate(&[track(0, &a), track(1, &b)], (0, 19), &gt, &EvalParams::default())
            .unwrap();
        assert_eq!((r.fp, r.fn_, r.ids), (0, 0, 0));
        assert_eq!(r.dsp, 1.0);
        assert_eq!(r.mota, 1.0);
    }

    #[test]
    fn silent_tracker_is_all_misses() {
        let gt = two_objects(10);
        let r = evaluate(&[], (0, 9), &gt, &EvalParams::default()).unwrap();
        assert_eq!((r.fp, r.fn_, r.ids), (0, 20, 0));
        assert_eq!(r.mota, 0.0);
        assert_eq!(r.dsp, 0.0);
    }

    #[test]
    fn swapped_identity_counts_once() {
        let gt = two_objects(1)
            .into_iter()
            .chain((1..10).map(|t| GtFrame {
                tick: t,
                objects: vec![gt_obj(0, 0)],
            }))
            .collect::<Vec<_>>();
        // track 0 follows object 0 for 5 ticks, then track 7 takes over
        let a: Vec<(u64, i64)> = (0..5).map(|t| (t, 0)).collect();
        let b: Vec<(u64, i64)> = (5..10).map(|t| (t, 0)).collect();
        let c = [(0u64, 100i64)];
        let r = evaluate(
            &[track(0, &a), track(7, &b), track(1, &c)],
            (0, 9),
            &gt,
            &EvalParams::default(),
        )
        .unwrap();
        assert_eq!(r.ids, 1);
        assert_eq!((r.fp, r.fn_), (0, 0));
    }

    #[test]
    fn false_positive_counted() {
        let gt = vec![GtFrame {
            tick: 0,
            objects: vec![gt_obj(0, 0)],
        }];
        let r = evaluate(
            &[track(0, &[(0, 0)]), track(1, &[(0, 50)])],
            (0, 0),
            &gt,
            &EvalParams::default(),
        )
        .unwrap();
        assert_eq!((r.fp, r.fn_), (1, 0));
        assert_eq!(r.mota, 0.0);
    }

    #[test]
    fn mismatched_range_is_an_error() {
        let gt = two_objects(10);
        assert!(matches!(
            evaluate(&[], (2, 9), &gt, &EvalParams::default()),
            Err(Error::Evaluation(_))
        ));
        assert!(evaluate(&[], (0, 9), &[], &EvalParams::default()).is_err());
    }

    #[test]
    fn windowed_dsp() {
        let gt = two_objects(20);
        // object 0 seen only in the first window of 10 ticks
        let a: Vec<(u64, i64)> = (0..5).map(|t| (t, t as i64)).collect();
        let b: Vec<(u64, i64)> = (0..20).map(|t| (t, 100 - t as i64)).collect();
        let p = EvalParams {
            dsp_window: 10,
            ..EvalParams::default()
        };
        let r = evaluate(&[track(0, &a), track(1, &b)], (0, 19), &gt, &p).unwrap();
        assert_eq!(r.dsp, 0.75);
    }
}
