//! Continuous attractor network with adaptation, used to anticipate where a
//! tracked object will be.
//!
//! Each image axis gets its own periodic 1-D field over preferred positions
//! in `[-pi, pi)`:
//!
//! ```text
//! tau   du/dt = -u + rho * int J(x - x') r(x') dx' - v + I(x)
//! tau_v dv/dt = -v + m u
//! r = u+^2 / (1 + k rho int u+^2 dx)
//! J(d) = J0 / (sqrt(2 pi) a) exp(-d^2 / 2a^2),   I(x) = alpha exp(-|x - z|^2 / 4a^2)
//! ```
//!
//! With `m = 0` the bump trails a moving stimulus. Strong enough adaptation
//! makes it run ahead by a roughly constant time.
//!
//! Time is measured in ticks with `tau = 1`, and every tick is split into
//! `round(1 / dt)` Euler steps.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tracking::Track;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CannParams {
    /// Neurons per axis.
    pub n: usize,
    pub tau: f64,
    /// Adaptation time constant; must exceed `tau`.
    pub tau_v: f64,
    /// Adaptation strength.
    pub m: f64,
    pub j0: f64,
    /// Interaction range in radians of preferred position.
    pub a: f64,
    /// Neuron density; `None` means `n / 2pi`.
    pub rho: Option<f64>,
    /// Divisive inhibition.
    pub k: f64,
    /// Stimulus strength.
    pub alpha: f64,
    /// Euler step, ticks.
    pub dt: f64,
    /// Ticks over which the stimulus velocity is estimated for leading times.
    pub velocity_window: u64,
}

impl Default for CannParams {
    fn default() -> Self {
        CannParams {
            n: 128,
            tau: 1.0,
            tau_v: 10.0,
            m: 1.0,
            j0: 1.0,
            a: 0.5,
            rho: None,
            k: 0.5,
            alpha: 1.0,
            dt: 0.05,
            velocity_window: 10,
        }
    }
}

impl CannParams {
    pub fn density(&self) -> f64 {
        self.rho.unwrap_or(self.n as f64 / (2.0 * PI))
    }

    /// Euler steps per tick.
    pub fn substeps(&self) -> usize {
        ((1.0 / self.dt).round() as usize).max(1)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("tau", self.tau),
            ("tau_v", self.tau_v),
            ("j0", self.j0),
            ("a", self.a),
            ("rho", self.density()),
            ("k", self.k),
            ("alpha", self.alpha),
            ("dt", self.dt),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Argument(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.m >= 0.0 && self.m.is_finite()) {
            return Err(Error::Argument(format!("m must be nonnegative, got {}", self.m)));
        }
        if self.n < 8 {
            return Err(Error::Argument(format!("need at least 8 neurons, got {}", self.n)));
        }
        if self.tau_v <= self.tau {
            return Err(Error::Argument(format!(
                "tau_v ({}) must exceed tau ({})",
                self.tau_v, self.tau
            )));
        }
        if self.dt > self.tau / 10.0 {
            return Err(Error::Argument(format!(
                "dt = {} is too coarse for tau = {}; use at most tau/10",
                self.dt, self.tau
            )));
        }
        Ok(())
    }

    fn regime(&self) -> String {
        format!(
            "m={}, tau_v={}, j0={}, k={}, alpha={}, dt={}",
            self.m, self.tau_v, self.j0, self.k, self.alpha, self.dt
        )
    }
}

/// Wraps an angle into `[-pi, pi)`.
pub fn wrap(theta: f64) -> f64 {
    (theta + PI).rem_euclid(2.0 * PI) - PI
}

/// State of one periodic field.
#[derive(Debug, Clone, PartialEq)]
pub struct CannField {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub r: Vec<f64>,
    /// Recurrent weights by circular offset, already scaled by `rho dx`.
    kernel: Vec<f64>,
    kernel_key: (usize, u64, u64, u64),
}

impl CannField {
    /// A silent field sized for `p`.
    pub fn new(p: &CannParams) -> Result<Self> {
        p.validate()?;
        Ok(CannField {
            u: vec![0.0; p.n],
            v: vec![0.0; p.n],
            r: vec![0.0; p.n],
            kernel: build_kernel(p),
            kernel_key: kernel_key(p),
        })
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    /// Preferred position of neuron `i`.
    pub fn position(&self, i: usize) -> f64 {
        -PI + 2.0 * PI * i as f64 / self.len() as f64
    }

    pub fn max_abs_u(&self) -> f64 {
        self.u.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

fn kernel_key(p: &CannParams) -> (usize, u64, u64, u64) {
    (p.n, p.j0.to_bits(), p.a.to_bits(), p.density().to_bits())
}

fn build_kernel(p: &CannParams) -> Vec<f64> {
    let dx = 2.0 * PI / p.n as f64;
    let scale = p.j0 / ((2.0 * PI).sqrt() * p.a) * p.density() * dx;
    (0..p.n)
        .map(|off| {
            let d = wrap(off as f64 * dx);
            scale * (-d * d / (2.0 * p.a * p.a)).exp()
        })
        .collect()
}

/// Recomputes `r` from `u` with divisive normalization.
fn update_rates(field: &mut CannField, p: &CannParams) {
    let dx = 2.0 * PI / p.n as f64;
    let sq: f64 = field.u.iter().map(|&u| u.max(0.0).powi(2)).sum::<f64>() * dx;
    let denom = 1.0 + p.k * p.density() * sq;
    for (r, &u) in field.r.iter_mut().zip(&field.u) {
        *r = u.max(0.0).powi(2) / denom;
    }
}

/// One Euler step of length `dt` with the stimulus centered at `stimulus`
/// (radians).
pub fn cann_step(field: &mut CannField, stimulus: f64, p: &CannParams, dt: f64) -> Result<()> {
    if field.len() != p.n {
        return Err(Error::Dimension(format!(
            "field has {} neurons, parameters say {}",
            field.len(),
            p.n
        )));
    }
    if !(dt > 0.0 && dt <= p.tau / 10.0) {
        return Err(Error::Argument(format!("dt = {dt} outside (0, tau/10]")));
    }
    if field.kernel_key != kernel_key(p) {
        field.kernel = build_kernel(p);
        field.kernel_key = kernel_key(p);
    }
    update_rates(field, p);
    let n = p.n;
    let four_a2 = 4.0 * p.a * p.a;
    let mut du = vec![0.0; n];
    for (i, slot) in du.iter_mut().enumerate() {
        let mut rec = 0.0;
        for (j, &r) in field.r.iter().enumerate() {
            if r != 0.0 {
                rec += field.kernel[(i + n - j) % n] * r;
            }
        }
        let d = wrap(field.position(i) - stimulus);
        let input = p.alpha * (-d * d / four_a2).exp();
        *slot = (-field.u[i] + rec - field.v[i] + input) / p.tau;
    }
    for i in 0..n {
        let dv = (-field.v[i] + p.m * field.u[i]) / p.tau_v;
        field.u[i] += dt * du[i];
        field.v[i] += dt * dv;
    }
    if let Some(i) = field.u.iter().zip(&field.v).position(|(u, v)| !u.is_finite() || !v.is_finite()) {
        return Err(Error::Divergence {
            regime: p.regime(),
            detail: format!("non-finite state at neuron {i}"),
        });
    }
    update_rates(field, p);
    Ok(())
}

/// Circular center of mass of the firing-rate field, in radians.
pub fn bump_center(field: &CannField) -> Result<f64> {
    let total: f64 = field.r.iter().sum();
    if !(total > 0.0) {
        return Err(Error::NoBump);
    }
    let (mut s, mut c) = (0.0, 0.0);
    for (i, &r) in field.r.iter().enumerate() {
        let x = field.position(i);
        s += r * x.sin();
        c += r * x.cos();
    }
    Ok(s.atan2(c))
}

/// A field advanced tick by tick toward a stimulus.
#[derive(Debug, Clone)]
pub struct Cann1d {
    pub field: CannField,
    pub params: CannParams,
}

impl Cann1d {
    pub fn new(params: CannParams) -> Result<Self> {
        Ok(Cann1d {
            field: CannField::new(&params)?,
            params,
        })
    }

    /// Runs one tick worth of Euler steps with the stimulus held at `stimulus`.
    pub fn advance_tick(&mut self, stimulus: f64) -> Result<()> {
        let steps = self.params.substeps();
        let dt = 1.0 / steps as f64;
        for _ in 0..steps {
            cann_step(&mut self.field, stimulus, &self.params, dt)?;
        }
        Ok(())
    }

    pub fn center(&self) -> Result<f64> {
        bump_center(&self.field)
    }
}

/// Mean lag (stimulus minus bump, radians) on a stimulus moving at `speed`
/// rad/tick, averaged over the second half of `ticks`. Positive means the
/// bump trails.
pub fn constant_velocity_lag(p: &CannParams, speed: f64, ticks: u64) -> Result<f64> {
    let mut net = Cann1d::new(*p)?;
    let mut stim = 0.0;
    let mut acc = Vec::new();
    for t in 0..ticks {
        net.advance_tick(stim)?;
        if t >= ticks / 2 {
            acc.push(wrap(stim - net.center()?));
        }
        stim = wrap(stim + speed);
    }
    Ok(acc.iter().sum::<f64>() / acc.len().max(1) as f64)
}

/// Leading time (ticks) on constant-velocity input: `-lag / speed`.
pub fn leading_time(p: &CannParams, speed: f64, ticks: u64) -> Result<f64> {
    if speed == 0.0 {
        return Err(Error::Argument("leading time is undefined at zero speed".into()));
    }
    Ok(-constant_velocity_lag(p, speed, ticks)? / speed)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub tick: u64,
    /// Predicted centroid in image coordinates.
    pub position: (f64, f64),
    /// Estimated lead over the stimulus, ticks; `None` while the stimulus is still.
    pub leading_time: Option<f64>,
}

/// Pair of independent fields, one per image axis.
#[derive(Debug, Clone)]
pub struct CannPredictor {
    x: Cann1d,
    y: Cann1d,
    frame: (f64, f64),
}

impl CannPredictor {
    /// `frame` is the image size in pixels; `[0, w)` maps linearly onto the
    /// periodic preferred-position axis.
    pub fn new(params: CannParams, frame: (u32, u32)) -> Result<Self> {
        if frame.0 == 0 || frame.1 == 0 {
            return Err(Error::Argument("frame must be nonempty".into()));
        }
        Ok(CannPredictor {
            x: Cann1d::new(params)?,
            y: Cann1d::new(params)?,
            frame: (frame.0 as f64, frame.1 as f64),
        })
    }

    fn to_angle(px: f64, size: f64) -> f64 {
        wrap(-PI + 2.0 * PI * px / size)
    }

    fn to_pixel(theta: f64, size: f64) -> f64 {
        ((theta + PI) / (2.0 * PI) * size).rem_euclid(size)
    }

    /// Feeds one tick of stimulus at `centroid` and returns the bump center
    /// in image coordinates.
    pub fn feed(&mut self, centroid: (f64, f64)) -> Result<(f64, f64)> {
        self.x.advance_tick(Self::to_angle(centroid.0, self.frame.0))?;
        self.y.advance_tick(Self::to_angle(centroid.1, self.frame.1))?;
        self.position()
    }

    pub fn position(&self) -> Result<(f64, f64)> {
        Ok((
            Self::to_pixel(self.x.center()?, self.frame.0),
            Self::to_pixel(self.y.center()?, self.frame.1),
        ))
    }

    /// Offset from `from` to the bump along each axis, taking the short way
    /// round the periodic domain.
    fn offset_from(&self, from: (f64, f64)) -> Result<(f64, f64)> {
        let (bx, by) = (self.x.center()?, self.y.center()?);
        let dx = wrap(bx - Self::to_angle(from.0, self.frame.0)) / (2.0 * PI) * self.frame.0;
        let dy = wrap(by - Self::to_angle(from.1, self.frame.1)) / (2.0 * PI) * self.frame.1;
        Ok((dx, dy))
    }
}

/// Runs a predictor along `track`, one prediction per tick from its first to
/// its last detection. Ticks without a detection hold the last centroid.
pub fn predict_track(track: &Track, p: &CannParams, frame: (u32, u32)) -> Result<Vec<Prediction>> {
    let samples: Vec<(u64, (f64, f64))> = track.centroids().collect();
    predict_centroids(&samples, p, frame)
}

/// Same as [`predict_track`] over `(tick, centroid)` samples in increasing
/// tick order.
pub fn predict_centroids(samples: &[(u64, (f64, f64))], p: &CannParams, frame: (u32, u32)) -> Result<Vec<Prediction>> {
    let (Some(&(first_tick, first)), Some(&(last_tick, _))) = (samples.first(), samples.last()) else {
        return Err(Error::Argument("track has no detections".into()));
    };
    if samples.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(Error::Argument("track samples must be in increasing tick order".into()));
    }
    let mut net = CannPredictor::new(*p, frame)?;
    let mut stimulus: Vec<(f64, f64)> = Vec::new();
    let mut out = Vec::new();
    let mut next = 0;
    let mut current = first;
    let w = p.velocity_window.max(1) as usize;
    for tick in first_tick..=last_tick {
        if next < samples.len() && samples[next].0 == tick {
            current = samples[next].1;
            next += 1;
        }
        stimulus.push(current);
        let position = net.feed(current)?;
        let leading_time = if stimulus.len() > w {
            let then = stimulus[stimulus.len() - 1 - w];
            let vel = (
                (current.0 - then.0) / w as f64,
                (current.1 - then.1) / w as f64,
            );
            let speed2 = vel.0 * vel.0 + vel.1 * vel.1;
            if speed2 > 1e-12 {
                let d = net.offset_from(current)?;
                Some((d.0 * vel.0 + d.1 * vel.1) / speed2)
            } else {
                None
            }
        } else {
            None
        };
        out.push(Prediction {
            tick,
            position,
            leading_time,
        });
    }
    Ok(out)
}
