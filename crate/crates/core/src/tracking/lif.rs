use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spike::SpikeFrame;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LifParams {
    /// Membrane time constant, ticks.
    pub tau_m: f64,
    pub v_th: f64,
    pub v_reset: f64,
    /// Potential added per presynaptic spike.
    pub w_syn: f64,
}

impl Default for LifParams {
    fn default() -> Self {
        LifParams {
            tau_m: 2.0,
            v_th: 1.0,
            v_reset: 0.0,
            w_syn: 0.25,
        }
    }
}

impl LifParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau_m > 0.0) {
            return Err(Error::Argument("tau_m must be positive".into()));
        }
        if !(self.v_th > self.v_reset) {
            return Err(Error::Argument("v_th must exceed v_reset".into()));
        }
        Ok(())
    }
}

/// Grid of LIF neurons, one per pixel, each fed by the 3x3 block of filter
/// positions around it (clipped at the borders).
#[derive(Debug, Clone)]
pub struct DetectionLayer {
    width: u32,
    height: u32,
    potential: Vec<f64>,
    input: Vec<f64>,
    params: LifParams,
    decay: f64,
}

impl DetectionLayer {
    pub fn new(width: u32, height: u32, params: LifParams) -> Result<Self> {
        params.validate()?;
        let n = width as usize * height as usize;
        Ok(DetectionLayer {
            width,
            height,
            potential: vec![params.v_reset; n],
            input: vec![0.0; n],
            params,
            decay: (-1.0 / params.tau_m).exp(),
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn potentials(&self) -> &[f64] {
        &self.potential
    }

    /// Number of filter positions feeding neuron (`x`, `y`).
    pub fn fan_in(&self, x: u32, y: u32) -> usize {
        let span = |c: u32, n: u32| (c.saturating_sub(1)..=(c + 1).min(n - 1)).count();
        span(x, self.width) * span(y, self.height)
    }

    /// Leak, integrate one frame of input, fire and reset.
    pub fn step(&mut self, frame: &SpikeFrame) -> Result<SpikeFrame> {
        let n = self.potential.len();
        if frame.pixel_count() != n {
            return Err(Error::Dimension(format!(
                "frame has {} pixels, layer has {n}",
                frame.pixel_count()
            )));
        }
        let (w, h) = (self.width as usize, self.height as usize);
        self.input.iter_mut().for_each(|v| *v = 0.0);
        for idx in frame.ones() {
            let (x, y) = (idx % w, idx / w);
            for ny in y.saturating_sub(1)..=(y + 1).min(h - 1) {
                for nx in x.saturating_sub(1)..=(x + 1).min(w - 1) {
                    self.input[ny * w + nx] += self.params.w_syn;
                }
            }
        }
        let mut fired = SpikeFrame::zeros(n, frame.tick_index);
        let (v_th, v_reset, decay) = (self.params.v_th, self.params.v_reset, self.decay);
        for (i, (v, inp)) in self.potential.iter_mut().zip(&self.input).enumerate() {
            // leak toward the resting potential
            *v = v_reset + (*v - v_reset) * decay + inp;
            if *v >= v_th {
                *v = v_reset;
                fired.set(i, true);
            }
        }
        Ok(fired)
    }
}

/// Functional wrapper over [`DetectionLayer::step`].
pub fn lif_step(layer: &mut DetectionLayer, frame: &SpikeFrame) -> Result<SpikeFrame> {
    layer.step(frame)
}
