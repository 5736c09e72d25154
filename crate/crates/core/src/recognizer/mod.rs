//! Three-layer spiking classifier trained with BP-STDP.
//!
//! Input neurons are the pixels of a cropped spike patch. Hidden and output
//! layers are leaky integrate-and-fire neurons. The output layer is split
//! into `classes` groups of `group_size` neurons, and the answer is the group
//! that fires most.
//!
//! Training follows the grouped rule: in each group the neuron with the
//! highest membrane potential is selected. The target group's selectee is
//! pushed toward `target_count` spikes (STDP, potentiation only), and any
//! nontarget selectee that fired is pushed back toward `nontarget_count`
//! (anti-STDP, depression only). The output error is sent back to hidden
//! neurons that were active, and each weight change scales with the
//! presynaptic activity inside the STDP window.

mod checkpoint;
mod dataset;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spike::SpikeCube;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_MAGIC};
pub use dataset::{
    classify_track, crop_patch, glyph_dataset, samples_from_run, GlyphDatasetSpec, SampleEntry,
    SampleManifest, TrackVotes,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SnnTopology {
    pub input_h: u32,
    pub input_w: u32,
    pub hidden: usize,
    /// Output neurons per category.
    pub group_size: usize,
    pub classes: usize,
    /// Ticks per sample.
    pub window: usize,
}

impl Default for SnnTopology {
    fn default() -> Self {
        SnnTopology {
            input_h: 32,
            input_w: 32,
            hidden: 256,
            group_size: 4,
            classes: 3,
            window: 64,
        }
    }
}

impl SnnTopology {
    pub fn inputs(&self) -> usize {
        self.input_h as usize * self.input_w as usize
    }

    pub fn outputs(&self) -> usize {
        self.group_size * self.classes
    }

    pub fn validate(&self) -> Result<()> {
        if self.inputs() == 0 || self.hidden == 0 || self.outputs() == 0 || self.window == 0 {
            return Err(Error::Argument(format!("every layer needs at least one neuron: {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NeuronParams {
    /// Membrane time constant, ticks.
    pub tau_m: f64,
    pub v_th_hidden: f64,
    pub v_th_output: f64,
}

impl Default for NeuronParams {
    fn default() -> Self {
        NeuronParams {
            tau_m: 8.0,
            v_th_hidden: 80.0,
            v_th_output: 20.0,
        }
    }
}

impl NeuronParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau_m > 0.0 && self.v_th_hidden > 0.0 && self.v_th_output > 0.0) {
            return Err(Error::Argument(format!("neuron parameters must be positive: {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub eta: f64,
    /// Presynaptic spikes this many ticks back still count as causal.
    pub stdp_window: usize,
    pub epochs: usize,
    /// Spikes per sample wanted from the target group's selectee.
    pub target_count: f64,
    /// Spikes per sample tolerated from a nontarget selectee.
    pub nontarget_count: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            eta: 0.002,
            stdp_window: 8,
            epochs: 20,
            target_count: 4.0,
            nontarget_count: 0.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0) {
            return Err(Error::Argument(format!("eta must be positive, got {}", self.eta)));
        }
        if self.stdp_window == 0 {
            return Err(Error::Argument("stdp_window must be at least 1".into()));
        }
        if self.target_count < self.nontarget_count {
            return Err(Error::Argument("target_count must not be below nontarget_count".into()));
        }
        Ok(())
    }
}

/// Network weights together with the shape and neuron constants they were
/// trained with.
#[derive(Debug, Clone, PartialEq)]
pub struct SnnWeights {
    pub topology: SnnTopology,
    pub neurons: NeuronParams,
    /// Input to hidden, row-major `[input][hidden]`.
    pub w_ih: Vec<f64>,
    /// Hidden to output, row-major `[hidden][output]`.
    pub w_ho: Vec<f64>,
}

impl SnnWeights {
    /// Uniform initialization in `[0, 0.1)` from `seed`.
    pub fn init(topology: SnnTopology, neurons: NeuronParams, seed: u64) -> Result<Self> {
        topology.validate()?;
        neurons.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w_ih = (0..topology.inputs() * topology.hidden).map(|_| rng.random_range(0.0..0.1)).collect();
        let w_ho = (0..topology.hidden * topology.outputs()).map(|_| rng.random_range(0.0..0.1)).collect();
        Ok(SnnWeights {
            topology,
            neurons,
            w_ih,
            w_ho,
        })
    }

    pub fn zeros(topology: SnnTopology, neurons: NeuronParams) -> Result<Self> {
        topology.validate()?;
        neurons.validate()?;
        Ok(SnnWeights {
            topology,
            neurons,
            w_ih: vec![0.0; topology.inputs() * topology.hidden],
            w_ho: vec![0.0; topology.hidden * topology.outputs()],
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.topology.validate()?;
        self.neurons.validate()?;
        let t = &self.topology;
        if self.w_ih.len() != t.inputs() * t.hidden || self.w_ho.len() != t.hidden * t.outputs() {
            return Err(Error::Dimension("weight matrices do not match the topology".into()));
        }
        if !self.w_ih.iter().chain(&self.w_ho).all(|w| w.is_finite()) {
            return Err(Error::Format("non-finite weight".into()));
        }
        Ok(())
    }
}

/// A spike patch of `input_w x input_h` pixels over `window` ticks, with its
/// category.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub patch: SpikeCube,
    pub label: usize,
}

impl LabeledSample {
    pub fn check(&self, t: &SnnTopology) -> Result<()> {
        check_patch(&self.patch, t)?;
        if self.label >= t.classes {
            return Err(Error::Argument(format!(
                "label {} out of range for {} classes",
                self.label, t.classes
            )));
        }
        Ok(())
    }
}

fn check_patch(patch: &SpikeCube, t: &SnnTopology) -> Result<()> {
    if patch.width() != t.input_w || patch.height() != t.input_h || patch.len() != t.window {
        return Err(Error::Dimension(format!(
            "patch is {}x{}x{}, network expects {}x{}x{}",
            patch.width(),
            patch.height(),
            patch.len(),
            t.input_w,
            t.input_h,
            t.window
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput {
    pub output_counts: Vec<u32>,
    /// Output membrane potentials after the last tick.
    pub output_potentials: Vec<f64>,
    /// Highest potential each output neuron reached, taken before reset.
    pub output_peaks: Vec<f64>,
    pub hidden_counts: Vec<u32>,
    hidden_ticks: Vec<Vec<u32>>,
}

/// Runs the network over one patch.
pub fn forward(patch: &SpikeCube, w: &SnnWeights) -> Result<ForwardOutput> {
    let t = &w.topology;
    check_patch(patch, t)?;
    let (nh, no) = (t.hidden, t.outputs());
    let decay = (-1.0 / w.neurons.tau_m).exp();
    let mut vh = vec![0.0; nh];
    let mut vo = vec![0.0; no];
    let mut out = ForwardOutput {
        output_counts: vec![0; no],
        output_potentials: vec![0.0; no],
        output_peaks: vec![0.0; no],
        hidden_counts: vec![0; nh],
        hidden_ticks: Vec::with_capacity(t.window),
    };
    let mut fired = Vec::with_capacity(nh);
    for (tick, frame) in patch.frames().iter().enumerate() {
        vh.iter_mut().for_each(|v| *v *= decay);
        for i in frame.ones() {
            let row = &w.w_ih[i * nh..(i + 1) * nh];
            vh.iter_mut().zip(row).for_each(|(v, w)| *v += w);
        }
        fired.clear();
        for (h, v) in vh.iter_mut().enumerate() {
            if *v >= w.neurons.v_th_hidden {
                *v = 0.0;
                fired.push(h as u32);
                out.hidden_counts[h] += 1;
            }
        }
        vo.iter_mut().for_each(|v| *v *= decay);
        for &h in &fired {
            let row = &w.w_ho[h as usize * no..(h as usize + 1) * no];
            vo.iter_mut().zip(row).for_each(|(v, w)| *v += w);
        }
        for (j, v) in vo.iter_mut().enumerate() {
            out.output_peaks[j] = if tick == 0 { *v } else { out.output_peaks[j].max(*v) };
            if *v >= w.neurons.v_th_output {
                *v = 0.0;
                out.output_counts[j] += 1;
            }
        }
        out.hidden_ticks.push(fired.clone());
    }
    out.output_potentials = vo;
    Ok(out)
}

/// Mean number of a neuron's spikes inside the trailing `window` ticks,
/// averaged over the `len` ticks of a sample. A spike at tick `s` is seen by
/// the windows ending at `s..s + window`.
fn windowed_activity(spike_ticks: impl Iterator<Item = usize>, window: usize, len: usize) -> f64 {
    spike_ticks.map(|s| window.min(len - s) as f64).sum::<f64>() / len as f64
}

/// What one training step did.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    /// Selected neuron (global output index) in every group.
    pub selected: Vec<usize>,
    /// Error signal per output neuron; zero except at selectees.
    pub xi: Vec<f64>,
    /// Nontarget selectees that fired.
    pub misfires: usize,
    pub prediction: Option<usize>,
}

/// Highest value in `values`, lowest index on ties.
fn argmax(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

/// One BP-STDP update on a single sample.
pub fn train_step(sample: &LabeledSample, w: &mut SnnWeights, cfg: &TrainConfig) -> Result<StepReport> {
    let t = w.topology;
    sample.check(&t)?;
    let out = forward(&sample.patch, w)?;
    let (ni, nh, no, k) = (t.inputs(), t.hidden, t.outputs(), t.group_size);

    let mut xi = vec![0.0; no];
    let mut selected = Vec::with_capacity(t.classes);
    let mut misfires = 0;
    for g in 0..t.classes {
        let j = g * k + argmax(out.output_peaks[g * k..(g + 1) * k].iter().copied());
        selected.push(j);
        let count = out.output_counts[j] as f64;
        if g == sample.label {
            xi[j] = (cfg.target_count - count).max(0.0);
        } else if count > 0.0 {
            misfires += 1;
            xi[j] = (cfg.nontarget_count - count).min(0.0);
        }
    }
    let prediction = classify_output(&out, &t);

    if xi.iter().all(|&x| x == 0.0) {
        return Ok(StepReport {
            selected,
            xi,
            misfires,
            prediction,
        });
    }

    let mut hidden_spikes: Vec<Vec<usize>> = vec![Vec::new(); nh];
    for (tick, fired) in out.hidden_ticks.iter().enumerate() {
        for &h in fired {
            hidden_spikes[h as usize].push(tick);
        }
    }
    let a_h: Vec<f64> = hidden_spikes
        .iter()
        .map(|s| windowed_activity(s.iter().copied(), cfg.stdp_window, t.window))
        .collect();

    // error reaching each hidden neuron, through the weights used in the pass
    let delta: Vec<f64> = (0..nh)
        .map(|h| {
            if out.hidden_counts[h] == 0 {
                return 0.0;
            }
            selected.iter().map(|&j| xi[j] * w.w_ho[h * no + j]).sum()
        })
        .collect();

    for &j in &selected {
        if xi[j] == 0.0 {
            continue;
        }
        for h in 0..nh {
            w.w_ho[h * no + j] += cfg.eta * xi[j] * a_h[h];
        }
    }

    let mut input_spikes: Vec<Vec<usize>> = vec![Vec::new(); ni];
    for (tick, frame) in sample.patch.frames().iter().enumerate() {
        for i in frame.ones() {
            input_spikes[i].push(tick);
        }
    }
    let active_hidden: Vec<usize> = (0..nh).filter(|&h| delta[h] != 0.0).collect();
    for (i, spikes) in input_spikes.iter().enumerate() {
        if spikes.is_empty() {
            continue;
        }
        let a_i = windowed_activity(spikes.iter().copied(), cfg.stdp_window, t.window);
        let row = &mut w.w_ih[i * nh..(i + 1) * nh];
        for &h in &active_hidden {
            row[h] += cfg.eta * delta[h] * a_i;
        }
    }

    Ok(StepReport {
        selected,
        xi,
        misfires,
        prediction,
    })
}

fn classify_output(out: &ForwardOutput, t: &SnnTopology) -> Option<usize> {
    let k = t.group_size;
    let counts: Vec<u32> = (0..t.classes)
        .map(|g| out.output_counts[g * k..(g + 1) * k].iter().sum())
        .collect();
    let potentials: Vec<f64> = (0..t.classes)
        .map(|g| out.output_potentials[g * k..(g + 1) * k].iter().sum())
        .collect();
    if counts.iter().all(|&c| c == 0) && potentials.iter().all(|&p| p == 0.0) {
        return None;
    }
    let mut best = 0;
    for g in 1..t.classes {
        if counts[g] > counts[best] || (counts[g] == counts[best] && potentials[g] > potentials[best]) {
            best = g;
        }
    }
    Some(best)
}

/// Category with the most output spikes, or `None` when the output layer is
/// completely silent.
pub fn classify(patch: &SpikeCube, w: &SnnWeights) -> Result<Option<usize>> {
    let out = forward(patch, w)?;
    Ok(classify_output(&out, &w.topology))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    /// `confusion[label][predicted]`; the last column counts abstentions.
    pub confusion: Vec<Vec<u32>>,
    pub abstained: u32,
}

pub fn evaluate(dataset: &[LabeledSample], w: &SnnWeights) -> Result<EvalReport> {
    if dataset.is_empty() {
        return Err(Error::Evaluation("empty dataset".into()));
    }
    let n = w.topology.classes;
    let mut confusion = vec![vec![0u32; n + 1]; n];
    let mut correct = 0;
    for s in dataset {
        s.check(&w.topology)?;
        let col = classify(&s.patch, w)?.unwrap_or(n);
        confusion[s.label][col] += 1;
        if col == s.label {
            correct += 1;
        }
    }
    Ok(EvalReport {
        accuracy: correct as f64 / dataset.len() as f64,
        abstained: confusion.iter().map(|row| row[n]).sum(),
        confusion,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub misfires: usize,
    /// Accuracy of the predictions made during the epoch, before each update.
    pub train_accuracy: f64,
}

/// Trains for `cfg.epochs` epochs, visiting samples in a seeded order that
/// is reshuffled every epoch.
pub fn train(dataset: &[LabeledSample], w: &mut SnnWeights, cfg: &TrainConfig) -> Result<Vec<EpochStats>> {
    train_with(dataset, w, cfg, |_, _| {})
}

/// [`train`] with a callback after every epoch.
pub fn train_with(
    dataset: &[LabeledSample],
    w: &mut SnnWeights,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochStats, &SnnWeights),
) -> Result<Vec<EpochStats>> {
    cfg.validate()?;
    w.validate()?;
    if dataset.is_empty() {
        return Err(Error::Argument("cannot train on an empty dataset".into()));
    }
    for s in dataset {
        s.check(&w.topology)?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut stats = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let (mut misfires, mut correct) = (0, 0);
        for &i in &order {
            let r = train_step(&dataset[i], w, cfg)?;
            misfires += r.misfires;
            if r.prediction == Some(dataset[i].label) {
                correct += 1;
            }
        }
        let s = EpochStats {
            epoch,
            misfires,
            train_accuracy: correct as f64 / dataset.len() as f64,
        };
        on_epoch(&s, w);
        stats.push(s);
    }
    Ok(stats)
}
