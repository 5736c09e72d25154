//! Dynamic connection gate built on short-term synaptic plasticity.
//!
//! Each pixel drives one depressing/facilitating synapse. A train with a fixed
//! rate settles the postsynaptic potential (`PSP = A * x * u`) onto a fixed
//! point, and the gate stays shut. When the rate changes the PSP leaves the
//! band around its running mean and the gate lets the spike through.
//!
//! Update order on every presynaptic spike, after `delta` ticks of silence:
//!
//! 1. relax: `x <- 1 - (1 - x) e^(-delta/tau_d)`, `u <- U + (u - U) e^(-delta/tau_f)`
//! 2. facilitate: `u <- u + U (1 - u)`
//! 3. read out: `psp = A u x`
//! 4. deplete: `x <- x (1 - u)`

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spike::{SpikeCube, SpikeTrain};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StpParams {
    /// Largest PSP a single spike can evoke.
    pub amplitude: f64,
    /// Baseline release-probability increment, in (0, 1).
    pub release: f64,
    /// Recovery time constant of available resources, ticks.
    pub tau_d: f64,
    /// Decay time constant of facilitation, ticks.
    pub tau_f: f64,
}

impl Default for StpParams {
    fn default() -> Self {
        StpParams {
            amplitude: 1.0,
            release: 0.3,
            tau_d: 400.0,
            tau_f: 100.0,
        }
    }
}

impl StpParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.release > 0.0 && self.release < 1.0) {
            return Err(Error::Argument(format!(
                "release probability must lie in (0, 1), got {}",
                self.release
            )));
        }
        if !(self.amplitude > 0.0 && self.tau_d > 0.0 && self.tau_f > 0.0) {
            return Err(Error::Argument(
                "amplitude and time constants must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GateParams {
    /// Relative half-width of the stable band around the running mean.
    pub tolerance: f64,
    pub warmup_spikes: u32,
    /// Weight of the newest PSP in the running mean.
    pub ema_decay: f64,
}

impl Default for GateParams {
    fn default() -> Self {
        GateParams {
            tolerance: 0.1,
            warmup_spikes: 40,
            ema_decay: 0.2,
        }
    }
}

impl GateParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(Error::Argument("gate tolerance must be positive".into()));
        }
        if !(self.ema_decay > 0.0 && self.ema_decay < 1.0) {
            return Err(Error::Argument("ema_decay must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynapseState {
    /// Fraction of transmitter still available.
    pub x: f64,
    /// Release probability.
    pub u: f64,
    pub last_spike_tick: Option<u64>,
    pub spikes_seen: u32,
    pub psp_ema: f64,
    pub psp_last: f64,
}

impl SynapseState {
    pub fn at_rest(p: &StpParams) -> Self {
        SynapseState {
            x: 1.0,
            u: p.release,
            last_spike_tick: None,
            spikes_seen: 0,
            psp_ema: 0.0,
            psp_last: 0.0,
        }
    }
}

/// Advances the synapse by one presynaptic spike arriving `delta` ticks after
/// the previous one. Pass `f64::INFINITY` for the first spike from rest.
pub fn synapse_on_spike(state: &mut SynapseState, delta: f64, p: &StpParams) -> f64 {
    debug_assert!(delta >= 1.0);
    let u0 = p.release;
    state.x = 1.0 - (1.0 - state.x) * (-delta / p.tau_d).exp();
    state.u = u0 + (state.u - u0) * (-delta / p.tau_f).exp();
    state.u += u0 * (1.0 - state.u);
    let psp = p.amplitude * state.u * state.x;
    state.x *= 1.0 - state.u;
    debug_assert!(state.x > 0.0 && state.x <= 1.0, "x = {}", state.x);
    debug_assert!(state.u >= u0 && state.u < 1.0, "u = {}", state.u);
    state.psp_last = psp;
    psp
}

/// Decides whether the spike that produced `psp` passes, then folds `psp`
/// into the running mean.
pub fn gate_decide(state: &mut SynapseState, psp: f64, g: &GateParams) -> bool {
    state.spikes_seen = state.spikes_seen.saturating_add(1);
    if state.spikes_seen == 1 {
        state.psp_ema = psp;
        return false;
    }
    let open = state.spikes_seen > g.warmup_spikes
        && (psp - state.psp_ema).abs() > g.tolerance * state.psp_ema;
    state.psp_ema += g.ema_decay * (psp - state.psp_ema);
    open
}

/// One gated pixel: synapse plus gate bookkeeping.
#[derive(Debug, Clone, Copy)]
pub struct PixelGate {
    pub state: SynapseState,
    stp: StpParams,
    gate: GateParams,
}

impl PixelGate {
    pub fn new(stp: StpParams, gate: GateParams) -> Self {
        PixelGate {
            state: SynapseState::at_rest(&stp),
            stp,
            gate,
        }
    }

    /// Feeds a spike at tick `t`; returns whether it passes the gate.
    pub fn on_spike(&mut self, t: u64) -> bool {
        let delta = match self.state.last_spike_tick {
            Some(prev) => (t - prev) as f64,
            None => f64::INFINITY,
        };
        self.state.last_spike_tick = Some(t);
        let psp = synapse_on_spike(&mut self.state, delta, &self.stp);
        gate_decide(&mut self.state, psp, &self.gate)
    }
}

/// Spikes of one train that pass the gate.
pub fn filter_train(train: &SpikeTrain, p: &StpParams, g: &GateParams) -> Vec<u64> {
    let mut gate = PixelGate::new(*p, *g);
    train
        .ticks()
        .iter()
        .copied()
        .filter(|&t| gate.on_spike(t))
        .collect()
}

/// Runs an independent gate on every pixel and keeps only passing spikes.
pub fn filter_cube(cube: &SpikeCube, p: &StpParams, g: &GateParams) -> Result<SpikeCube> {
    p.validate()?;
    g.validate()?;
    let kept: Vec<SpikeTrain> = cube
        .all_trains()
        .par_iter()
        .map(|train| {
            SpikeTrain::new(filter_train(train, p, g)).expect("subsequence stays increasing")
        })
        .collect();
    SpikeCube::from_trains(cube.width(), cube.height(), cube.tick_ns(), cube.len(), &kept)
}

/// PSP sequence for a strictly periodic train starting from rest.
pub fn periodic_psp(period: f64, spikes: usize, p: &StpParams) -> Vec<f64> {
    let mut state = SynapseState::at_rest(p);
    (0..spikes)
        .map(|k| {
            let delta = if k == 0 { f64::INFINITY } else { period };
            synapse_on_spike(&mut state, delta, p)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Fixed point of the periodic map found by plain iteration.
    fn iterated_fixed_point(period: f64, p: &StpParams) -> f64 {
        *periodic_psp(period, 5000, p).last().unwrap()
    }

    #[test]
    fn first_spike_from_rest() {
        let p = StpParams::default();
        let psp = periodic_psp(10.0, 1, &p)[0];
        let u = p.release;
        assert!((psp - p.amplitude * u * (2.0 - u)).abs() < 1e-15);
    }

    #[test]
    fn long_silence_returns_to_rest() {
        let p = StpParams::default();
        let mut s = SynapseState::at_rest(&p);
        let first = synapse_on_spike(&mut s, f64::INFINITY, &p);
        for _ in 0..20 {
            synapse_on_spike(&mut s, 3.0, &p);
        }
        let again = synapse_on_spike(&mut s, 1e9, &p);
        assert!((again - first).abs() < 1e-12);
    }

    #[test]
    fn thirty_hz_train_settles() {
        // 30 Hz at 25 us ticks is a period of 1333 ticks
        let p = StpParams::default();
        let psp = periodic_psp(1333.0, 60, &p);
        let fp = iterated_fixed_point(1333.0, &p);
        assert!(psp[20..].iter().all(|v| (v - fp).abs() < 1e-9));
    }

    #[test]
    fn state_bounds_hold() {
        let p = StpParams::default();
        let mut s = SynapseState::at_rest(&p);
        for (k, delta) in [1.0, 1.0, 500.0, 2.0, 1.0, 90.0, 1.0].iter().cycle().take(300).enumerate() {
            let d = if k == 0 { f64::INFINITY } else { *delta };
            synapse_on_spike(&mut s, d, &p);
            assert!(s.x > 0.0 && s.x <= 1.0);
            assert!(s.u >= p.release && s.u < 1.0);
        }
    }

    #[test]
    fn steady_psp_grows_with_period() {
        let p = StpParams::default();
        let fps: Vec<f64> = [2.0, 5.0, 10.0, 25.0, 100.0, 400.0, 2000.0]
            .iter()
            .map(|&t| iterated_fixed_point(t, &p))
            .collect();
        assert!(fps.windows(2).all(|w| w[1] > w[0]), "{fps:?}");
    }

    #[test]
    fn warmup_keeps_gate_closed() {
        let g = GateParams::default();
        let mut gate = PixelGate::new(StpParams::default(), g);
        // a wildly irregular train: still closed during warmup
        let ticks = [0u64, 1, 50, 51, 300, 302, 303, 900];
        assert!(ticks.iter().all(|&t| !gate.on_spike(t)));
    }

    #[test]
    fn periodic_train_stays_closed() {
        let train = SpikeTrain::new((0..400).map(|k| 7 + k * 13).collect()).unwrap();
        let passed = filter_train(&train, &StpParams::default(), &GateParams::default());
        assert!(passed.is_empty(), "{passed:?}");
    }

    #[test]
    fn halving_the_period_opens_the_gate() {
        let mut ticks: Vec<u64> = (0..100).map(|k| k * 25).collect();
        let switch = *ticks.last().unwrap();
        ticks.extend((1..40).map(|k| switch + k * 12));
        let train = SpikeTrain::new(ticks).unwrap();
        let passed = filter_train(&train, &StpParams::default(), &GateParams::default());
        assert_eq!(passed.first(), Some(&(switch + 12)));
    }

    #[test]
    fn empty_cube_filters_to_empty() {
        let cube = SpikeCube::new(5, 5, 1).unwrap();
        let out = filter_cube(&cube, &StpParams::default(), &GateParams::default()).unwrap();
        assert_eq!(out, cube);
    }

    #[test]
    fn rejects_bad_params() {
        let cube = SpikeCube::new(1, 1, 1).unwrap();
        let bad = StpParams {
            release: 1.0,
            ..StpParams::default()
        };
        assert!(filter_cube(&cube, &bad, &GateParams::default()).is_err());
    }
}
