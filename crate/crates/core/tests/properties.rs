use proptest::prelude::*;

use vidar::cann::{wrap, Cann1d, CannParams};
use vidar::gate::{filter_cube, synapse_on_spike, GateParams, StpParams, SynapseState};
use vidar::reconstruct::{entropy2d, tfi, tfw, TfiParams, TfwParams};
use vidar::sim::{simulate, LevelsScene, SimConfig, UniformScene};
use vidar::spike::{decode, encode, frame_bytes, SpikeCube, SpikeTrain, DEFAULT_TICK_NS};
use vidar::tracking::{detect, DetectionLayer, LifParams, Tracker, TrackerParams};

fn cube_strategy(max_side: u32, max_len: usize) -> impl Strategy<Value = SpikeCube> {
    (1..=max_side, 1..=max_side, 0..=max_len, 0.0f64..1.0).prop_flat_map(|(w, h, len, density)| {
        let n = (w * h) as usize * len;
        proptest::collection::vec(proptest::bool::weighted(density), n).prop_map(move |bits| {
            let mut cube = SpikeCube::new(w, h, DEFAULT_TICK_NS).unwrap();
            for frame in bits.chunks((w * h) as usize) {
                cube.push_bools(frame).unwrap();
            }
            cube
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn codec_round_trip(cube in cube_strategy(13, 20)) {
        let bytes = encode(&cube);
        prop_assert_eq!(bytes.len(), 28 + cube.len() * frame_bytes(cube.width(), cube.height()));
        prop_assert_eq!(decode(&bytes).unwrap(), cube);
    }

    #[test]
    fn spike_count_equals_train_lengths(cube in cube_strategy(9, 30)) {
        let total: usize = cube.all_trains().iter().map(SpikeTrain::len).sum();
        prop_assert_eq!(cube.spike_count(), total as u64);
        let rebuilt = SpikeCube::from_trains(cube.width(), cube.height(), cube.tick_ns(), cube.len(), &cube.all_trains()).unwrap();
        prop_assert_eq!(rebuilt, cube);
    }

    #[test]
    fn frame_size_is_ceil_of_pixels_over_eight(w in 1u32..300, h in 1u32..300) {
        prop_assert_eq!(frame_bytes(w, h), ((w * h) as usize).div_ceil(8));
    }

    #[test]
    fn rate_law_brackets_counts(radiance in 0.0f64..600.0, ticks in 1u64..400) {
        let phi = 255.0;
        let scene = UniformScene::new(2, 1, ticks, radiance);
        let cube = simulate(&scene, &SimConfig::default()).unwrap();
        let exact = ticks as f64 * radiance.min(phi) / phi;
        for train in cube.all_trains() {
            let n = train.len() as f64;
            prop_assert!(n >= exact.floor() - 1e-9 && n <= exact.ceil() + 1e-9, "{} spikes, expected ~{}", n, exact);
        }
    }

    #[test]
    fn brighter_never_fires_less(lo in 0.0f64..300.0, extra in 0.0f64..300.0, ticks in 1u64..300) {
        let scene = LevelsScene::split(2, 1, ticks, lo, lo + extra);
        let cube = simulate(&scene, &SimConfig::default()).unwrap();
        let trains = cube.all_trains();
        prop_assert!(trains[1].len() >= trains[0].len());
    }

    #[test]
    fn noisy_simulation_is_seed_deterministic(seed in any::<u64>()) {
        let scene = UniformScene::new(4, 3, 50, 90.0);
        let cfg = SimConfig { noise_std: 30.0, random_phase: true, seed, ..SimConfig::default() };
        prop_assert_eq!(simulate(&scene, &cfg).unwrap(), simulate(&scene, &cfg).unwrap());
    }

    #[test]
    fn reconstructions_stay_in_range(cube in cube_strategy(6, 60), t in 0u64..60, w in 1u32..50) {
        prop_assume!(!cube.is_empty());
        let t = t % cube.len() as u64;
        let a = tfw(&cube, t, &TfwParams { window: w, dynamic_range: 255.0 }).unwrap();
        let b = tfi(&cube, t, &TfiParams::default()).unwrap();
        for img in [&a, &b] {
            prop_assert!(img.pixels().iter().all(|&v| (0.0..=255.0).contains(&v)));
            prop_assert!(entropy2d(img) >= 0.0);
        }
    }

    #[test]
    fn synapse_state_stays_bounded(gaps in proptest::collection::vec(1.0f64..3000.0, 1..200)) {
        let p = StpParams::default();
        let mut s = SynapseState::at_rest(&p);
        for (i, &d) in gaps.iter().enumerate() {
            let psp = synapse_on_spike(&mut s, if i == 0 { f64::INFINITY } else { d }, &p);
            prop_assert!(s.x > 0.0 && s.x <= 1.0);
            prop_assert!(s.u >= p.release && s.u < 1.0);
            prop_assert!(psp > 0.0 && psp.is_finite());
        }
    }

    #[test]
    fn gating_twice_passes_nothing_new(cube in cube_strategy(5, 200)) {
        let (p, g) = (StpParams::default(), GateParams::default());
        let once = filter_cube(&cube, &p, &g).unwrap();
        let twice = filter_cube(&once, &p, &g).unwrap();
        for (a, b) in once.frames().iter().zip(twice.frames()) {
            prop_assert!(b.ones().all(|i| a.get(i)));
        }
    }

    #[test]
    fn detections_partition_the_fired_mask(cube in cube_strategy(12, 6), min_area in 1usize..6) {
        prop_assume!(!cube.is_empty());
        let (w, h) = (cube.width(), cube.height());
        let mut layer = DetectionLayer::new(w, h, LifParams { tau_m: 4.0, w_syn: 0.5, ..LifParams::default() }).unwrap();
        let mut tracker = Tracker::new(TrackerParams::default());
        for frame in cube.frames() {
            let fired = layer.step(frame).unwrap();
            prop_assert!(layer.potentials().iter().all(|&v| v < 1.0));
            let dets = detect(&fired, w, h, min_area);
            let mut seen = std::collections::HashSet::new();
            for d in &dets {
                prop_assert!(d.area() >= min_area);
                for &(x, y) in &d.mask {
                    prop_assert!(fired.get((y * w + x) as usize));
                    prop_assert!(d.bbox.x_min <= x as i64 && x as i64 <= d.bbox.x_max);
                    prop_assert!(d.bbox.y_min <= y as i64 && y as i64 <= d.bbox.y_max);
                    prop_assert!(seen.insert((x, y)), "masks overlap");
                }
            }
            // everything left out belongs to a component smaller than min_area
            let all = detect(&fired, w, h, 1);
            let dropped: usize = all.iter().filter(|d| d.area() < min_area).map(|d| d.area()).sum();
            prop_assert_eq!(seen.len() + dropped, fired.count_ones() as usize);
            tracker.associate(frame.tick_index, dets);
        }
        let ids: Vec<u64> = tracker.tracks().iter().map(|t| t.id).collect();
        prop_assert!(ids.windows(2).all(|p| p[1] > p[0]));
        for t in tracker.tracks() {
            prop_assert!(t.history.windows(2).all(|p| p[1].tick > p[0].tick));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn cann_is_translation_equivariant(shift in 1usize..64, speed in -0.05f64..0.05, start in -3.0f64..3.0) {
        let p = CannParams { n: 64, ..CannParams::default() };
        let offset = shift as f64 * 2.0 * std::f64::consts::PI / p.n as f64;
        let mut a = Cann1d::new(p).unwrap();
        let mut b = Cann1d::new(p).unwrap();
        for t in 0..60 {
            let s = wrap(start + speed * t as f64);
            a.advance_tick(s).unwrap();
            b.advance_tick(wrap(s + offset)).unwrap();
            let d = wrap(b.center().unwrap() - a.center().unwrap() - offset);
            prop_assert!(d.abs() < 1e-6, "tick {}: off by {}", t, d);
        }
    }
}
