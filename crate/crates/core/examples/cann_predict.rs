//! Anticipation with an adaptive continuous attractor: the bump runs ahead
//! of a moving stimulus by a roughly constant time, whatever the speed.

use vidar::cann::{constant_velocity_lag, leading_time, predict_centroids, CannParams};

fn main() -> vidar::Result<()> {
    let p = CannParams::default();
    for speed in [0.01, 0.015, 0.02] {
        println!("speed {speed:.3} rad/tick: leads by {:.2} ticks", leading_time(&p, speed, 400)?);
    }
    let passive = CannParams { m: 0.0, ..p };
    println!(
        "without adaptation the bump trails: lag {:+.4} rad",
        constant_velocity_lag(&passive, 0.02, 400)?
    );

    // a target sweeping across a 96 px wide frame at 0.3 px/tick
    let path: Vec<(u64, (f64, f64))> = (0..200).map(|t| (t, (10.0 + 0.3 * t as f64, 48.0))).collect();
    let preds = predict_centroids(&path, &p, (96, 96))?;
    for pr in preds.iter().step_by(50) {
        println!(
            "tick {:3}: target x {:5.1}, predicted x {:5.1}, lead {:?}",
            pr.tick,
            path[pr.tick as usize].1 .0,
            pr.position.0,
            pr.leading_time.map(|l| (l * 10.0).round() / 10.0)
        );
    }
    Ok(())
}
