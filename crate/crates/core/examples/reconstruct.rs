//! Reconstruct a fast moving bar by spike counting (TFW) and by interspike
//! interval (TFI), compare edge sharpness, and write both images.
//!
//!     cargo run --example reconstruct -- [out_dir]

use std::path::PathBuf;

use vidar::reconstruct::{entropy2d, max_gradient_x, std_metric, tfi, tfw, TfiParams, TfwParams};
use vidar::sim::{scene_moving_bar, simulate, SimConfig};

fn main() -> vidar::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "target/reconstruct".into()));
    let bar = scene_moving_bar(128, 16, 60, 2.0, 16.0, 200.0, 20.0);
    let cube = simulate(&bar, &SimConfig::default())?;
    // bar spans x = 80..96 here
    let t = 40;

    let by_count = tfw(&cube, t, &TfwParams::default())?;
    let by_interval = tfi(&cube, t, &TfiParams::default())?;
    for (name, img) in [("tfw", &by_count), ("tfi", &by_interval)] {
        println!(
            "{name}: std {:.1}, entropy {:.2}, steepest edge {:.1}",
            std_metric(img),
            entropy2d(img),
            max_gradient_x(img)
        );
        img.save(&out.join(format!("{name}.pgm")))?;
    }
    println!("images in {}", out.display());
    Ok(())
}
