//! Simulate the spike camera looking at a disc with three characters
//! spinning at 2400 rpm, and report how the spikes are spread.

use vidar::sim::{linear_velocity, simulate, GroundTruth, RotatingDisc, SimConfig};

fn main() -> vidar::Result<()> {
    let disc = RotatingDisc {
        duration: 1000,
        ..RotatingDisc::default()
    };
    let cube = simulate(&disc, &SimConfig::default())?;
    println!(
        "{} frames ({:.1} ms of stream), {} spikes, {:.1} per pixel per tick",
        cube.len(),
        cube.duration_secs() * 1e3,
        cube.spike_count(),
        cube.spike_count() as f64 / (cube.len() * cube.pixel_count()) as f64
    );
    println!("one revolution = {} ticks", disc.period_ticks());
    for obj in disc.objects_at(250) {
        println!("glyph {} at tick 250: {:?}", obj.id, obj.bbox);
    }
    // a real fan at this speed, characters 12 cm from the axis
    println!("character speed on a 12 cm fan: {:.2} m/s", linear_velocity(2400.0, 0.12)?);
    Ok(())
}
