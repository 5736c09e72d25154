//! Integrate-and-fire pixel simulator.
//!
//! Every pixel accumulates incoming intensity once per readout tick and
//! emits a spike when the accumulator reaches the threshold. The threshold is
//! subtracted on firing, so the fractional residue carries into the next vit.
//! Intensity is expressed in the same units as the threshold.

mod glyphs;
mod scenes;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::BBox;
use crate::spike::{SpikeCube, SpikeFrame, DEFAULT_TICK_NS};

pub use glyphs::{Glyph, GLYPH_SIZE};
pub use scenes::{
    linear_velocity, scene_falling_ball, scene_moving_bar, scene_rotating_disc, BoxSpec, FallingBall, LevelsScene,
    MovingBar, MovingBoxes, RotatingDisc, SceneSpec, UniformScene,
};

/// A time-varying radiance field sampled at pixel centers, once per tick.
pub trait Scene: Sync {
    fn width(&self) -> u32;
    fn height(&self) -> u32;
    fn duration_ticks(&self) -> u64;
    /// Intensity delivered to pixel (`x`, `y`) during tick `t`; never negative.
    fn radiance(&self, x: u32, y: u32, t: u64) -> f64;
}

/// One labelled object in a synthetic scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GtObject {
    pub id: u32,
    pub bbox: BBox,
    /// Category index for recognition tasks, when the object has one.
    pub label: Option<usize>,
}

/// Scenes that know where their moving objects are.
pub trait GroundTruth {
    /// Objects visible at tick `t`, clipped to the frame.
    fn objects_at(&self, t: u64) -> Vec<GtObject>;
}

pub trait SyntheticScene: Scene + GroundTruth {}
impl<T: Scene + GroundTruth> SyntheticScene for T {}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub threshold: f64,
    pub tick_ns: u64,
    /// Standard deviation of additive Gaussian noise on per-tick intensity.
    pub noise_std: f64,
    /// Start every pixel with a uniform random charge in `[0, threshold)`
    /// instead of an empty integrator, as a sensor does after power-up.
    pub random_phase: bool,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            threshold: 255.0,
            tick_ns: DEFAULT_TICK_NS,
            noise_std: 0.0,
            random_phase: false,
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0 && self.threshold.is_finite()) {
            return Err(Error::Argument(format!(
                "threshold must be positive, got {}",
                self.threshold
            )));
        }
        if self.tick_ns == 0 {
            return Err(Error::Argument("tick_ns must be at least 1".into()));
        }
        if !(self.noise_std >= 0.0) {
            return Err(Error::Argument(format!(
                "noise_std must be nonnegative, got {}",
                self.noise_std
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelState {
    pub accumulator: f64,
    pub threshold: f64,
    /// Readout latch: whether the most recent readout carried a spike.
    pub fired: bool,
}

impl PixelState {
    pub fn new(threshold: f64) -> Self {
        PixelState {
            accumulator: 0.0,
            threshold,
            fired: false,
        }
    }

    /// Integrates one tick of intensity and reads the pixel out.
    ///
    /// At most one spike leaves the pixel per readout. Charge beyond one
    /// threshold's worth in a single tick is dropped, keeping the residue in
    /// `[0, threshold)`.
    #[inline]
    pub fn step(&mut self, intensity: f64) -> bool {
        debug_assert!(intensity >= 0.0);
        self.accumulator += intensity;
        self.fired = self.accumulator >= self.threshold;
        if self.fired {
            self.accumulator -= self.threshold;
            if self.accumulator >= self.threshold {
                self.accumulator %= self.threshold;
            }
        }
        self.fired
    }
}

/// Functional form of [`PixelState::step`].
pub fn step(state: PixelState, intensity: f64) -> (PixelState, bool) {
    let mut next = state;
    let spike = next.step(intensity);
    (next, spike)
}

struct PixelSim {
    state: PixelState,
    rng: Option<ChaCha8Rng>,
}

fn pixel_seed(seed: u64, index: u64) -> u64 {
    // splitmix64 finalizer over (seed, index)
    let mut z = seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Runs every pixel of `scene` through the integrate-and-fire model.
///
/// Noise streams are derived per pixel from `(seed, pixel index)`, so the
/// output does not depend on thread scheduling.
pub fn simulate<S: Scene + ?Sized>(scene: &S, cfg: &SimConfig) -> Result<SpikeCube> {
    cfg.validate()?;
    let (width, height) = (scene.width(), scene.height());
    let mut cube = SpikeCube::new(width, height, cfg.tick_ns)?;
    let noise = if cfg.noise_std > 0.0 {
        Some(Normal::new(0.0, cfg.noise_std).map_err(|e| Error::Argument(e.to_string()))?)
    } else {
        None
    };
    let mut pixels: Vec<PixelSim> = (0..width as u64 * height as u64)
        .map(|i| {
            let mut state = PixelState::new(cfg.threshold);
            if cfg.random_phase {
                let mut rng = ChaCha8Rng::seed_from_u64(pixel_seed(!cfg.seed, i));
                state.accumulator = rng.random_range(0.0..cfg.threshold);
            }
            PixelSim {
                state,
                rng: noise.map(|_| ChaCha8Rng::seed_from_u64(pixel_seed(cfg.seed, i))),
            }
        })
        .collect();
    let mut spikes = vec![false; pixels.len()];
    for t in 0..scene.duration_ticks() {
        pixels
            .par_iter_mut()
            .zip(spikes.par_iter_mut())
            .enumerate()
            .with_min_len(256)
            .for_each(|(i, (px, out))| {
                let x = (i % width as usize) as u32;
                let y = (i / width as usize) as u32;
                let mut intensity = scene.radiance(x, y, t);
                if let (Some(dist), Some(rng)) = (noise.as_ref(), px.rng.as_mut()) {
                    intensity += dist.sample(rng);
                }
                *out = px.state.step(intensity.max(0.0));
            });
        cube.push_frame(SpikeFrame::from_bools(&spikes, t))?;
    }
    Ok(cube)
}
