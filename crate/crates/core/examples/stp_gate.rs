//! Drop the static background of the spinning-disc scene with the
//! short-term-plasticity gate and show what survives.

use vidar::gate::{filter_cube, periodic_psp, GateParams, StpParams};
use vidar::sim::{simulate, RotatingDisc, Scene, SimConfig};

fn main() -> vidar::Result<()> {
    let stp = StpParams::default();
    // a steady input settles to a fixed response
    let psp = periodic_psp(10.0, 40, &stp);
    println!("psp for a 10-tick train: first {:.4}, last {:.4}", psp[0], psp[39]);

    let disc = RotatingDisc {
        duration: 1500,
        ..RotatingDisc::default()
    };
    let cube = simulate(&disc, &SimConfig { random_phase: true, ..SimConfig::default() })?;
    let gated = filter_cube(&cube, &stp, &GateParams::default())?;
    println!("kept {} of {} spikes", gated.spike_count(), cube.spike_count());

    // pixels outside the disc never change; count what passes there after warm-up
    let (cx, cy) = disc.center;
    let outside = |x: u32, y: u32| {
        let (dx, dy) = (x as f64 + 0.5 - cx, y as f64 + 0.5 - cy);
        dx.hypot(dy) > disc.radius_px + 1.0
    };
    let (mut seen, mut passed) = (0u64, 0u64);
    for t in 1000..cube.len() {
        for y in 0..disc.height() {
            for x in 0..disc.width() {
                if outside(x, y) && cube.get(x, y, t) {
                    seen += 1;
                    passed += gated.get(x, y, t) as u64;
                }
            }
        }
    }
    println!("static ground: {passed} of {seen} spikes passed");
    Ok(())
}
