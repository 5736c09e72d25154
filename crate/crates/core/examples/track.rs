//! Two boxes cross the frame in opposite lanes; gate the stream, track
//! them with the LIF detection layer and score the result.

use vidar::gate::{filter_cube, GateParams, StpParams};
use vidar::sim::{simulate, GroundTruth, MovingBoxes, SimConfig};
use vidar::tracking::{run, DetectTrackConfig, EvalParams, GtFrame};

fn main() -> vidar::Result<()> {
    let enter = 700;
    let scene = MovingBoxes::two_lanes(96, 64, 12.0, 0.5, enter);
    let sim = SimConfig {
        random_phase: true,
        ..SimConfig::default()
    };
    let cube = simulate(&scene, &sim)?;
    let gated = filter_cube(&cube, &StpParams::default(), &GateParams::default())?;

    let cfg = DetectTrackConfig {
        min_area: 16,
        ..DetectTrackConfig::default()
    };
    let tracking = run(&gated, &cfg)?;
    for t in &tracking.tracks {
        let (first, last) = (&t.history[0], t.last());
        println!(
            "track {}: ticks {}..{}, ({:.1}, {:.1}) -> ({:.1}, {:.1})",
            t.id, first.tick, last.tick, first.centroid.0, first.centroid.1, last.centroid.0, last.centroid.1
        );
    }
    // score from the moment the boxes appear
    let truth: Vec<GtFrame> = (enter..cube.len() as u64)
        .map(|tick| GtFrame {
            tick,
            objects: scene.objects_at(tick),
        })
        .collect();
    let report = tracking.evaluate(&truth, &EvalParams::default())?;
    println!(
        "DSP {:.3}  MOTA {:.3}  FP {}  FN {}  IDS {}",
        report.dsp, report.mota, report.fp, report.fn_, report.ids
    );
    Ok(())
}
