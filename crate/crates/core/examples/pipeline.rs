//! The whole chain through the command layer, as the `vidar` binary runs
//! it: simulate, gate, track, predict, play back, and catalogue the files.
//!
//!     cargo run --release --example pipeline -- [out_dir]

use std::path::{Path, PathBuf};

use vidar::pipeline::{
    cmd_filter, cmd_manifest, cmd_play, cmd_predict, cmd_simulate, cmd_track, cmd_validate_manifest, Context,
    PipelineConfig,
};

fn main() -> vidar::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "target/pipeline".into()));
    let cfg = PipelineConfig::preset("disc")?;
    let ctx = Context::new(&cfg, Some(out.clone()))?;

    let sim = cmd_simulate(&ctx, Path::new("disc.vdr"))?;
    println!("simulated {} frames, {} spikes", sim.frames, sim.spikes);
    let f = cmd_filter(&ctx, &sim.cube, Path::new("gated.vdr"))?;
    println!("gate kept {} of {} spikes", f.spikes_out, f.spikes_in);
    let t = cmd_track(&ctx, &out.join("gated.vdr"), Some(&sim.truth), Path::new("tracks.jsonl"))?;
    println!("{} tracks, report {:?}", t.tracks, t.report);
    let n = cmd_predict(&ctx, &out.join("tracks.jsonl"), None, Path::new("predictions.jsonl"))?;
    println!("{n} prediction records");
    let frames = cmd_play(&ctx, &sim.cube, 400, Path::new("play"))?;
    println!("{} playback frames", frames.len());

    let files = [out.join("disc.vdr"), out.join("gated.vdr")];
    cmd_manifest(&ctx, &files, Path::new("manifest.toml"))?;
    let report = cmd_validate_manifest(&out.join("manifest.toml"))?;
    println!("manifest: {} entries, {} mismatches", report.checked, report.mismatches.len());
    Ok(())
}
