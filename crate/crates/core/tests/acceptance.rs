//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Runs without the libtest harness so the lines always show up in
//! `cargo test` output; exits nonzero if any gating criterion fails.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vidar::cann::{constant_velocity_lag, leading_time, CannParams};
use vidar::gate::{filter_cube, periodic_psp, StpParams};
use vidar::pipeline::{cmd_velocity, PipelineConfig};
use vidar::recognizer::{evaluate, glyph_dataset, train_with, GlyphDatasetSpec, NeuronParams, SnnTopology, SnnWeights, TrainConfig};
use vidar::reconstruct::{max_gradient_x, tfi, tfw, TfiParams, TfiStream, TfwParams};
use vidar::sim::{scene_moving_bar, simulate, GroundTruth, LevelsScene, SceneSpec, SimConfig, UniformScene};
use vidar::spike::{decode, encode, SpikeCube, SpikeFrame, DEFAULT_TICK_NS};
use vidar::tracking::{self, GtFrame, MATCH_IOU};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn random_cube(rng: &mut ChaCha8Rng, w: u32, h: u32, len: usize) -> SpikeCube {
    let pixels = (w * h) as usize;
    let mut cube = SpikeCube::new(w, h, DEFAULT_TICK_NS).unwrap();
    for t in 0..len {
        let mut bits = vec![0u8; pixels.div_ceil(8)];
        rng.fill_bytes(&mut bits);
        if pixels % 8 != 0 {
            *bits.last_mut().unwrap() &= (1u8 << (pixels % 8)) - 1;
        }
        cube.push_frame(SpikeFrame::from_bytes(bits, pixels, t as u64).unwrap()).unwrap();
    }
    cube
}

fn c1_codec_round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut elapsed = 0.0;
    let mut bad = 0;
    for _ in 0..1000 {
        let (w, h, len) = (rng.random_range(1..=64), rng.random_range(1..=64), rng.random_range(0..=256));
        let cube = random_cube(&mut rng, w, h, len);
        let start = Instant::now();
        let back = decode(&encode(&cube)).unwrap();
        elapsed += start.elapsed().as_secs_f64();
        bad += (back != cube) as usize;
    }
    outcome(
        bad == 0 && elapsed < 5.0,
        format!("1000 cubes, {bad} mismatches, {elapsed:.2} s encode+decode (limit 5 s)"),
    )
}

fn c2_rate_law() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let phi = 255.0;
    let ticks = 1000u64;
    let mut worst = String::new();
    let mut failures = 0;
    for _ in 0..50 {
        let radiance: f64 = rng.random_range(0.0..phi);
        let cube = simulate(&UniformScene::new(4, 4, ticks, radiance), &SimConfig::default()).unwrap();
        let exact = ticks as f64 * radiance / phi;
        for train in cube.all_trains() {
            let n = train.len() as f64;
            if n != exact.floor() && n != exact.ceil() {
                failures += 1;
                worst = format!("I = {radiance}: {n} spikes vs T*I/phi = {exact}");
            }
        }
    }
    outcome(failures == 0, format!("50 radiances x 16 pixels, {failures} outside floor/ceil {worst}"))
}

fn c3_tfi_exactness() -> Outcome {
    let level = 3.0;
    let mut max_err: f64 = 0.0;
    for p in 2..=64u64 {
        let phi = level * p as f64;
        let cube = simulate(
            &UniformScene::new(2, 2, 6 * p, level),
            &SimConfig {
                threshold: phi,
                ..SimConfig::default()
            },
        )
        .unwrap();
        let params = TfiParams {
            dynamic_range: phi,
            fallback: 0.0,
        };
        for t in 2 * p..5 * p {
            let img = tfi(&cube, t, &params).unwrap();
            for &v in img.pixels() {
                max_err = max_err.max((v - phi / p as f64).abs());
            }
        }
    }
    outcome(max_err == 0.0, format!("p = 2..64, C = phi, max |tfi - phi/p| = {max_err:e}"))
}

fn c4_tfw_tfi_consistency() -> Outcome {
    // every radiance phi/p is an integer, so intervals are exactly p
    let phi = 720_720.0;
    let scene = LevelsScene::from_fn(4, 4, 400, |x, y| phi / (1 + x + 4 * y) as f64);
    let sim = SimConfig {
        threshold: phi,
        random_phase: true,
        seed: 4,
        ..SimConfig::default()
    };
    let cube = simulate(&scene, &sim).unwrap();
    let mut lines = Vec::new();
    let mut pass = true;
    for w in [10u32, 40, 100] {
        let mut worst: f64 = 0.0;
        for t in (200..400).step_by(7) {
            let a = tfw(&cube, t, &TfwParams { window: w, dynamic_range: phi }).unwrap();
            let b = tfi(&cube, t, &TfiParams { dynamic_range: phi, fallback: 0.0 }).unwrap();
            for (x, y) in a.pixels().iter().zip(b.pixels()) {
                worst = worst.max((x - y).abs() / (phi / w as f64));
            }
        }
        pass &= worst <= 1.0;
        lines.push(format!("w={w}: max |tfw-tfi| = {worst:.3} C/w"));
    }
    outcome(pass, lines.join(", "))
}

fn c5_sharpness() -> Outcome {
    let bar = scene_moving_bar(128, 16, 60, 2.0, 16.0, 200.0, 20.0);
    let cube = simulate(&bar, &SimConfig::default()).unwrap();
    let t = 40;
    let g_tfw = max_gradient_x(&tfw(&cube, t, &TfwParams { window: 40, dynamic_range: 255.0 }).unwrap());
    let g_tfi = max_gradient_x(&tfi(&cube, t, &TfiParams::default()).unwrap());
    let ratio = g_tfi / g_tfw;
    outcome(
        ratio >= 1.5,
        format!("bar at 2 px/tick, w = 40: tfi edge {g_tfi:.1}, tfw edge {g_tfw:.1}, ratio {ratio:.2} (need 1.5)"),
    )
}

/// Fixed point of the relax, facilitate, read, deplete map for period `t`,
/// solved in closed form.
fn stp_fixed_point(t: f64, p: &StpParams) -> f64 {
    let (u0, a, b) = (p.release, (-t / p.tau_f).exp(), (-t / p.tau_d).exp());
    let u = (u0 + (1.0 - u0) * u0 * (1.0 - a)) / (1.0 - (1.0 - u0) * a);
    let x = (1.0 - b) / (1.0 - b * (1.0 - u));
    p.amplitude * u * x
}

fn c6_stp_fixed_point() -> Outcome {
    let p = StpParams::default();
    let mut worst = (0.0, 0);
    for t in 2..=2000u32 {
        let psp = periodic_psp(t as f64, 50, &p);
        let err = (psp[49] - stp_fixed_point(t as f64, &p)).abs();
        if err > worst.0 {
            worst = (err, t);
        }
    }
    outcome(
        worst.0 <= 1e-9,
        format!("T = 2..2000, worst |psp_50 - psp*| = {:.2e} at T = {}", worst.0, worst.1),
    )
}

fn c7_gate_selectivity() -> Outcome {
    let cfg = PipelineConfig::preset("disc").unwrap().resolved();
    let scene = cfg.scene.build().unwrap();
    let cube = simulate(scene.as_ref(), &cfg.sim).unwrap();
    let gated = filter_cube(&cube, &cfg.stp, &cfg.gate).unwrap();
    let (w, h) = (scene.width(), scene.height());
    let n = (w * h) as usize;
    let settle = 1000u64;
    let edge_window = 16u64;

    let mut changes_ever = vec![false; n];
    let mut last_change: Vec<Option<u64>> = vec![None; n];
    let mut prev: Vec<f64> = (0..n).map(|i| scene.radiance(i as u32 % w, i as u32 / w, 0)).collect();
    let (mut bg_in, mut bg_pass, mut edge_in, mut edge_pass) = (0u64, 0u64, 0u64, 0u64);
    let mut static_spikes: Vec<(usize, usize)> = Vec::new();
    for t in 1..cube.len() as u64 {
        for (i, p) in prev.iter_mut().enumerate() {
            let r = scene.radiance(i as u32 % w, i as u32 / w, t);
            if r != *p {
                changes_ever[i] = true;
                last_change[i] = Some(t);
                *p = r;
            }
        }
        if t < settle {
            continue;
        }
        let (raw, kept) = (&cube.frames()[t as usize], &gated.frames()[t as usize]);
        for i in raw.ones() {
            if last_change[i].is_some_and(|c| t - c < edge_window) {
                edge_in += 1;
                edge_pass += kept.get(i) as u64;
            }
            static_spikes.push((t as usize, i));
        }
    }
    for &(t, i) in &static_spikes {
        if !changes_ever[i] {
            bg_in += 1;
            bg_pass += gated.frames()[t].get(i) as u64;
        }
    }
    let bg_rate = bg_pass as f64 / bg_in as f64;
    let keep = edge_pass as f64 / edge_in as f64;
    outcome(
        bg_rate <= 0.05 && keep >= 0.80,
        format!(
            "disc, ticks 1000..2000: background pass {bg_pass}/{bg_in} = {:.2}% (max 5%), edge retention {:.1}% (min 80%)",
            100.0 * bg_rate,
            100.0 * keep
        ),
    )
}

fn c8_tracking() -> Outcome {
    // two boxes in separate lanes
    let cfg = PipelineConfig::preset("two-lanes").unwrap().resolved();
    let scene = cfg.scene.build().unwrap();
    let cube = simulate(scene.as_ref(), &cfg.sim).unwrap();
    let gated = filter_cube(&cube, &cfg.stp, &cfg.gate).unwrap();
    let run = tracking::run(&gated, &cfg.track).unwrap();
    let truth: Vec<GtFrame> = (cfg.evaluate.from_tick..cube.len() as u64)
        .map(|tick| GtFrame {
            tick,
            objects: scene.objects_at(tick),
        })
        .collect();
    let lanes = run.evaluate(&truth, &cfg.evaluate.params()).unwrap();
    let lanes_ok = lanes.dsp == 1.0 && lanes.ids == 0 && lanes.fp == 0 && lanes.fn_ == 0;

    // three glyphs over one revolution, after one revolution of warm-up
    let cfg = PipelineConfig::preset("disc").unwrap().resolved();
    let SceneSpec::RotatingDisc(disc) = &cfg.scene else {
        unreachable!()
    };
    let cube = simulate(disc, &cfg.sim).unwrap();
    let gated = filter_cube(&cube, &cfg.stp, &cfg.gate).unwrap();
    let run = tracking::run(&gated, &cfg.track).unwrap();
    let (first, period) = (cfg.evaluate.from_tick, disc.period_ticks().round() as u64);
    let last = first + period - 1;
    let mut stable_glyphs = Vec::new();
    for track in run.tracks_in(first, last) {
        let mut hits = vec![0u64; 3];
        let mut detected = 0u64;
        for d in track.history.iter().filter(|d| d.tick >= first && d.tick <= last) {
            detected += 1;
            let best = disc
                .objects_at(d.tick)
                .into_iter()
                .map(|o| (o.label.unwrap(), o.bbox.iou(&d.bbox)))
                .filter(|&(_, iou)| iou >= MATCH_IOU)
                .max_by(|a, b| a.1.total_cmp(&b.1));
            if let Some((g, _)) = best {
                hits[g] += 1;
            }
        }
        let (g, &n) = hits.iter().enumerate().max_by_key(|&(_, n)| *n).unwrap();
        let one_glyph = hits.iter().filter(|&&k| k > 0).count() == 1;
        if one_glyph && n as f64 >= 0.95 * period as f64 && detected >= n {
            stable_glyphs.push(g);
        }
    }
    let gt: Vec<GtFrame> = (first..=last)
        .map(|tick| GtFrame {
            tick,
            objects: disc.objects_at(tick),
        })
        .collect();
    let disc_report = run.evaluate(&gt, &cfg.evaluate.params()).unwrap();
    let mut distinct = stable_glyphs.clone();
    distinct.sort();
    distinct.dedup();
    let disc_ok = stable_glyphs.len() == 3 && distinct.len() == 3 && disc_report.ids == 0;
    outcome(
        lanes_ok && disc_ok,
        format!(
            "two lanes: DSP {:.3} IDS {} FP {} FN {}; disc ticks {first}..={last}: {} stable tracks on glyphs {:?}, IDS {}, FP {}, MOTA {:.4}",
            lanes.dsp,
            lanes.ids,
            lanes.fp,
            lanes.fn_,
            stable_glyphs.len(),
            stable_glyphs,
            disc_report.ids,
            disc_report.fp,
            disc_report.mota
        ),
    )
}

fn c9_cann_anticipation() -> Outcome {
    let start = Instant::now();
    let p = CannParams::default();
    let speed = 0.02;
    let passive = constant_velocity_lag(&CannParams { m: 0.0, ..p }, speed, 400).unwrap();
    let active = constant_velocity_lag(&CannParams { m: 1.0, ..p }, speed, 400).unwrap();
    let slow = leading_time(&p, 0.01, 400).unwrap();
    let fast = leading_time(&p, 0.02, 400).unwrap();
    let change = (fast - slow).abs() / slow;
    let secs = start.elapsed().as_secs_f64();
    outcome(
        passive > 0.0 && active < 0.0 && change <= 0.25 && secs < 60.0,
        format!(
            "lag m=0 {passive:+.4} rad, m=1 {active:+.4} rad; leading time {slow:.2} -> {fast:.2} ticks when speed doubles ({:.1}% change, max 25%); {secs:.1} s",
            100.0 * change
        ),
    )
}

fn c10_recognition() -> Outcome {
    let topo = SnnTopology::default();
    let spec = |seed, per_class| GlyphDatasetSpec {
        per_class,
        seed,
        ..GlyphDatasetSpec::default()
    };
    let train_set = glyph_dataset(&spec(1, 200), &topo).unwrap();
    let test_set = glyph_dataset(&spec(2, 50), &topo).unwrap();
    let cfg = TrainConfig::default();
    let fit = || {
        let mut w = SnnWeights::init(topo, NeuronParams::default(), 0).unwrap();
        let mut curve = Vec::new();
        train_with(&train_set, &mut w, &cfg, |_, w| curve.push(evaluate(&test_set, w).unwrap().accuracy)).unwrap();
        (w, curve)
    };
    let (w, curve) = fit();
    let final_acc = *curve.last().unwrap();
    let reached = curve.iter().position(|&a| a >= 0.9);
    // rerun from scratch, dataset included
    let again_train = glyph_dataset(&spec(1, 200), &topo).unwrap();
    let (w2, _) = fit();
    let deterministic = again_train == train_set && w2 == w;
    outcome(
        final_acc >= 0.9 && deterministic,
        format!(
            "{} train / {} test patches, {} epochs: held-out {final_acc:.3} (first >= 0.9 at epoch {}), rerun identical: {deterministic}",
            train_set.len(),
            test_set.len(),
            cfg.epochs,
            reached.map_or("never".into(), |e| (e + 1).to_string())
        ),
    )
}

fn c11_velocity() -> Outcome {
    let v = cmd_velocity(2400.0, 0.12).unwrap();
    let limit = cmd_velocity(1e-9, 0.12).unwrap();
    let other = cmd_velocity(7200.0, 0.05).unwrap();
    outcome(
        (30.1..=30.2).contains(&v) && limit < 1e-9 && (other - 12.0 * PI).abs() < 1e-9 && cmd_velocity(0.0, 0.1).is_err(),
        format!("2400 rpm at 0.12 m: {v:.4} m/s; 7200 rpm at 0.05 m: {other:.4} m/s"),
    )
}

fn c12_throughput() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let (w, h, len) = (400u32, 250u32, 2000usize);
    let mut cube = SpikeCube::new(w, h, DEFAULT_TICK_NS).unwrap();
    for _ in 0..len {
        let bits: Vec<bool> = (0..w * h).map(|_| rng.random_bool(0.1)).collect();
        cube.push_bools(&bits).unwrap();
    }
    let bytes = encode(&cube);
    let start = Instant::now();
    let decoded = decode(&bytes).unwrap();
    let mut stream = TfiStream::new(w, h, TfiParams::default());
    for f in decoded.frames() {
        stream.push(f);
    }
    let img = stream.image();
    let secs = start.elapsed().as_secs_f64();
    assert_eq!(img.width(), w);
    outcome(
        true,
        format!(
            "decode + streaming TFI, 400x250: {:.0} frames/s (reference 10000, not gated)",
            len as f64 / secs
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("1 codec round trip", c1_codec_round_trip),
        ("2 rate law", c2_rate_law),
        ("3 TFI exactness", c3_tfi_exactness),
        ("4 TFW/TFI consistency", c4_tfw_tfi_consistency),
        ("5 sharpness ordering", c5_sharpness),
        ("6 STP fixed point", c6_stp_fixed_point),
        ("7 gate selectivity", c7_gate_selectivity),
        ("8 detection/tracking", c8_tracking),
        ("9 CANN anticipation", c9_cann_anticipation),
        ("10 recognition", c10_recognition),
        ("11 velocity utility", c11_velocity),
        ("12 throughput (informational)", c12_throughput),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        failed += !result.pass as usize;
        println!(
            "criterion {name}: {} [{:.1} s] {}",
            if result.pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            result.detail
        );
    }
    println!("acceptance: {} of 12 criteria passed", 12 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
