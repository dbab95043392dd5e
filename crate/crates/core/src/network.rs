//! The τ-SNN: fully connected LIF layers unrolled over `T` steps, read out
//! by a non-spiking leaky integrator, trained with BPTT.
//!
//! At step `t`, layer `l` receives `W_l · a_{l-1} + b_l` where `a_0` is the
//! plan's current and `a_l` are the spikes of hidden layer `l`. Hidden
//! layers run the LIF update; the last layer integrates with the same leak
//! but never spikes or resets. Logits are its membrane after the last step.

use crate::encoding::{InputPlan, IMAGE_PIXELS};
use crate::neuron::{check_tau, surrogate_grad, LifParams, ResetMode, SpikeMode};
use crate::numerics::{gaussian_init, Matrix, Rng};
use crate::{Error, Result};

pub const IMAGE_HIDDEN: usize = 128;
pub const IMAGE_CLASSES: usize = 10;
pub const IMAGE_T_STEPS: usize = 10;
pub const SERIES_HIDDEN: [usize; 3] = [784, 256, 64];
pub const SERIES_CLASSES: usize = 4;
pub const DEFAULT_SERIES_WINDOW: usize = 128;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Architecture {
    layer_sizes: Vec<usize>,
    t_steps: usize,
}

impl Architecture {
    pub fn new(layer_sizes: Vec<usize>, t_steps: usize) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::invalid("architecture needs an input and an output size"));
        }
        if layer_sizes.contains(&0) {
            return Err(Error::invalid(format!("layer sizes must be positive: {layer_sizes:?}")));
        }
        if *layer_sizes.last().unwrap() < 2 {
            return Err(Error::invalid("output layer needs at least two classes"));
        }
        if t_steps == 0 {
            return Err(Error::invalid("t_steps must be positive"));
        }
        Ok(Self { layer_sizes, t_steps })
    }

    /// 784-128-10 over 10 steps, shared by the static and dynamic image tasks.
    pub fn image_preset() -> Self {
        Self::new(vec![IMAGE_PIXELS, IMAGE_HIDDEN, IMAGE_CLASSES], IMAGE_T_STEPS).unwrap()
    }

    /// 1-784-256-64-4, one step per window sample.
    pub fn series_preset(window: usize) -> Result<Self> {
        let mut sizes = vec![1];
        sizes.extend(SERIES_HIDDEN);
        sizes.push(SERIES_CLASSES);
        Self::new(sizes, window)
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn t_steps(&self) -> usize {
        self.t_steps
    }

    pub fn input_size(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_size(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    /// Number of weight layers (hidden spiking layers plus the readout).
    pub fn depth(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    pub fn hidden_sizes(&self) -> &[usize] {
        &self.layer_sizes[1..self.layer_sizes.len() - 1]
    }

    pub fn with_t_steps(&self, t_steps: usize) -> Result<Self> {
        Self::new(self.layer_sizes.clone(), t_steps)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TauSnn {
    arch: Architecture,
    weights: Vec<Matrix>,
    biases: Vec<Vec<f64>>,
    lif: LifParams,
    mode: SpikeMode,
    layer_taus: Option<Vec<f64>>,
}

/// Rounds to the nearest f32; model weights are stored at single precision.
#[inline]
pub(crate) fn quantize(x: f64) -> f64 {
    x as f32 as f64
}

impl TauSnn {
    /// Gaussian weights with std `1/sqrt(fan_in)`, zero biases.
    pub fn new(arch: Architecture, lif: LifParams, rng: &mut Rng) -> Self {
        let sizes = arch.layer_sizes.clone();
        let weights = sizes
            .windows(2)
            .map(|w| {
                let mut m = gaussian_init(w[1], w[0], 1.0 / (w[0] as f64).sqrt(), rng).unwrap();
                m.as_mut_slice().iter_mut().for_each(|x| *x = quantize(*x));
                m
            })
            .collect();
        let biases = sizes[1..].iter().map(|&n| vec![0.0; n]).collect();
        Self {
            arch,
            weights,
            biases,
            lif,
            mode: SpikeMode::Spiking,
            layer_taus: None,
        }
    }

    pub fn zeros(arch: Architecture, lif: LifParams) -> Self {
        let sizes = arch.layer_sizes.clone();
        Self {
            weights: sizes.windows(2).map(|w| Matrix::zeros(w[1], w[0])).collect(),
            biases: sizes[1..].iter().map(|&n| vec![0.0; n]).collect(),
            arch,
            lif,
            mode: SpikeMode::Spiking,
            layer_taus: None,
        }
    }

    pub fn from_parts(arch: Architecture, lif: LifParams, weights: Vec<Matrix>, biases: Vec<Vec<f64>>) -> Result<Self> {
        let sizes = arch.layer_sizes();
        if weights.len() != arch.depth() || biases.len() != arch.depth() {
            return Err(Error::Length {
                op: "TauSnn::from_parts",
                expected: arch.depth(),
                actual: weights.len().min(biases.len()),
            });
        }
        for (l, (w, b)) in weights.iter().zip(&biases).enumerate() {
            if w.shape() != (sizes[l + 1], sizes[l]) {
                return Err(Error::Shape {
                    op: "TauSnn::from_parts",
                    left: w.shape(),
                    right: (sizes[l + 1], sizes[l]),
                });
            }
            if b.len() != sizes[l + 1] {
                return Err(Error::Length {
                    op: "TauSnn::from_parts bias",
                    expected: sizes[l + 1],
                    actual: b.len(),
                });
            }
            if b.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite(format!("bias of layer {l}")));
            }
        }
        Ok(Self {
            arch,
            weights,
            biases,
            lif,
            mode: SpikeMode::Spiking,
            layer_taus: None,
        })
    }

    pub fn with_mode(mut self, mode: SpikeMode) -> Self {
        self.mode = mode;
        self
    }

    /// Per-layer τ (one per weight layer, readout included) overriding the
    /// global value.
    pub fn with_layer_taus(mut self, taus: Vec<f64>) -> Result<Self> {
        if taus.len() != self.arch.depth() {
            return Err(Error::Length {
                op: "with_layer_taus",
                expected: self.arch.depth(),
                actual: taus.len(),
            });
        }
        taus.iter().try_for_each(|&t| check_tau(t))?;
        self.layer_taus = Some(taus);
        Ok(self)
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn lif_params(&self) -> &LifParams {
        &self.lif
    }

    pub fn mode(&self) -> SpikeMode {
        self.mode
    }

    pub fn layer_taus(&self) -> Option<&[f64]> {
        self.layer_taus.as_deref()
    }

    pub fn weight(&self, layer: usize) -> &Matrix {
        &self.weights[layer]
    }

    pub fn bias(&self, layer: usize) -> &[f64] {
        &self.biases[layer]
    }

    pub fn weights(&self) -> &[Matrix] {
        &self.weights
    }

    pub fn biases(&self) -> &[Vec<f64>] {
        &self.biases
    }

    pub fn n_parameters(&self) -> usize {
        self.weights.iter().map(|w| w.as_slice().len()).sum::<usize>() + self.biases.iter().map(Vec::len).sum::<usize>()
    }

    /// All parameters flattened layer by layer: weights (row-major), then bias.
    pub fn parameters(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_parameters());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w.as_slice());
            out.extend_from_slice(b);
        }
        out
    }

    pub fn set_parameters(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.n_parameters() {
            return Err(Error::Length {
                op: "set_parameters",
                expected: self.n_parameters(),
                actual: params.len(),
            });
        }
        if let Some(i) = params.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!("parameter {i}")));
        }
        let mut rest = params;
        for (w, b) in self.weights.iter_mut().zip(&mut self.biases) {
            let n = w.as_slice().len();
            w.as_mut_slice().copy_from_slice(&rest[..n]);
            let k = b.len();
            b.copy_from_slice(&rest[n..n + k]);
            rest = &rest[n + k..];
        }
        Ok(())
    }

    /// Same weights, different global τ.
    pub fn set_inference_tau(&self, tau: f64) -> Result<TauSnn> {
        let mut m = self.clone();
        m.lif = self.lif.set_tau(tau)?;
        Ok(m)
    }

    fn layer_tau(&self, layer: usize, global: f64) -> f64 {
        self.layer_taus.as_ref().map_or(global, |t| t[layer])
    }

    fn check_plan(&self, plan: &InputPlan) -> Result<()> {
        if plan.width() != self.arch.input_size() {
            return Err(Error::Length {
                op: "forward (plan width)",
                expected: self.arch.input_size(),
                actual: plan.width(),
            });
        }
        if plan.steps() != self.arch.t_steps() {
            return Err(Error::Length {
                op: "forward (plan steps)",
                expected: self.arch.t_steps(),
                actual: plan.steps(),
            });
        }
        Ok(())
    }

    /// Unrolls the network over the plan with global τ `tau`.
    fn run(
        &self,
        plan: &InputPlan,
        tau: f64,
        mut trace: Option<&mut ForwardTrace>,
        mut spike_counts: Option<&mut [f64]>,
    ) -> Result<Vec<f64>> {
        self.check_plan(plan)?;
        let lif = &self.lif;
        let depth = self.arch.depth();
        let hidden = depth - 1;
        let sizes = &self.arch.layer_sizes;

        let mut v: Vec<Vec<f64>> = sizes[1..depth].iter().map(|&n| vec![lif.v_rest(); n]).collect();
        let mut out = vec![lif.v_rest(); self.arch.output_size()];
        let mut current: Vec<Vec<f64>> = sizes[1..].iter().map(|&n| vec![0.0; n]).collect();
        let mut spikes: Vec<Vec<f64>> = sizes[1..depth].iter().map(|&n| vec![0.0; n]).collect();
        let mut pre: Vec<Vec<f64>> = spikes.clone();
        let mut nz = Vec::new();

        for t in 0..plan.steps() {
            let x = plan.step(t);
            if t == 0 || x != plan.step(t - 1) {
                nonzero_indices(x, &mut nz);
                affine(&self.weights[0], &self.biases[0], x, &nz, &mut current[0]);
            }
            for l in 0..hidden {
                let tau_l = self.layer_tau(l, tau);
                for j in 0..v[l].len() {
                    let u = lif.integrate(v[l][j], current[l][j], tau_l);
                    let s = lif.spike(u, self.mode);
                    v[l][j] = lif.reset(u, s);
                    pre[l][j] = u;
                    spikes[l][j] = s;
                }
                if let Some(counts) = spike_counts.as_deref_mut() {
                    counts[l] += spikes[l].iter().sum::<f64>();
                }
                nonzero_indices(&spikes[l], &mut nz);
                let (head, tail) = current.split_at_mut(l + 1);
                let _ = head;
                affine(&self.weights[l + 1], &self.biases[l + 1], &spikes[l], &nz, &mut tail[0]);
            }
            let tau_out = self.layer_tau(depth - 1, tau);
            for (o, &i) in out.iter_mut().zip(&current[depth - 1]) {
                *o = lif.integrate(*o, i, tau_out);
            }
            if let Some(tr) = trace.as_deref_mut() {
                tr.pre.push(pre.clone());
                tr.spikes.push(spikes.clone());
                tr.output.push(out.clone());
            }
        }
        if let Some(i) = out.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!("logit {i}")));
        }
        Ok(out)
    }

    /// Logits plus the full per-step trace.
    pub fn forward(&self, plan: &InputPlan) -> Result<(Vec<f64>, ForwardTrace)> {
        let mut trace = ForwardTrace::default();
        let logits = self.run(plan, self.lif.tau_discrete(), Some(&mut trace), None)?;
        Ok((logits, trace))
    }

    /// Logits only, evaluated at global τ `tau` without touching the model.
    pub fn logits_at_tau(&self, plan: &InputPlan, tau: f64) -> Result<Vec<f64>> {
        check_tau(tau)?;
        self.run(plan, tau, None, None)
    }

    pub fn logits(&self, plan: &InputPlan) -> Result<Vec<f64>> {
        self.run(plan, self.lif.tau_discrete(), None, None)
    }

    /// Total spikes per hidden layer for one plan at global τ `tau`.
    pub fn spike_counts_at_tau(&self, plan: &InputPlan, tau: f64) -> Result<Vec<f64>> {
        check_tau(tau)?;
        let mut counts = vec![0.0; self.arch.depth() - 1];
        self.run(plan, tau, None, Some(&mut counts))?;
        Ok(counts)
    }

    pub fn predict(&self, plan: &InputPlan) -> Result<usize> {
        Ok(argmax(&self.logits(plan)?))
    }

    /// Fills `grads` with dLoss/dParams for one sample and returns the loss.
    pub fn backward_into(&self, plan: &InputPlan, label: usize, grads: &mut Gradients) -> Result<f64> {
        let (logits, trace) = self.forward(plan)?;
        let loss_value = loss(&logits, label)?;
        grads.zero();

        let lif = &self.lif;
        let tau = lif.tau_discrete();
        let depth = self.arch.depth();
        let hidden = depth - 1;
        let sizes = &self.arch.layer_sizes;
        let theta = lif.v_threshold();

        // dL/dv (post-reset) carried backwards in time, per hidden layer.
        let mut carry: Vec<Vec<f64>> = sizes[1..depth].iter().map(|&n| vec![0.0; n]).collect();
        // dL/dspike from the layer above at the current step.
        let mut dspike: Vec<Vec<f64>> = carry.clone();
        let mut sg: Vec<Vec<f64>> = carry.clone();
        let mut du: Vec<Vec<f64>> = carry.clone();
        let mut active = Vec::new();
        let mut nz = Vec::new();

        let mut dout = softmax(&logits);
        dout[label] -= 1.0;
        let keep_out = 1.0 - 1.0 / self.layer_tau(depth - 1, tau);

        // Layer-0 inputs repeat across steps for static plans; their
        // outer products are grouped per run of identical inputs.
        let mut pending = vec![0.0; sizes[1]];
        let mut pending_t: Option<usize> = None;

        for t in (0..plan.steps()).rev() {
            // Readout layer.
            {
                let l = depth - 1;
                let input = if hidden == 0 {
                    plan.step(t)
                } else {
                    &trace.spikes[t][hidden - 1][..]
                };
                if hidden == 0 {
                    accumulate_layer0(&mut pending, &mut pending_t, &dout, t, plan, grads);
                } else {
                    nonzero_indices(input, &mut nz);
                    outer_add(grads.weights[l].as_mut_slice(), sizes[l], &dout, input, &nz);
                }
                add_into(&mut grads.biases[l], &dout);
                if hidden > 0 {
                    surrogate_into(&trace.pre[t][hidden - 1], lif, &mut sg[hidden - 1]);
                    active_indices(&sg[hidden - 1], &mut active);
                    transpose_matvec(&self.weights[l], &dout, &active, &mut dspike[hidden - 1]);
                }
                dout.iter_mut().for_each(|g| *g *= keep_out);
            }

            for h in (0..hidden).rev() {
                let keep = 1.0 - 1.0 / self.layer_tau(h, tau);
                let u = &trace.pre[t][h];
                let s = &trace.spikes[t][h];
                for j in 0..u.len() {
                    let dv_du = match lif.reset_mode() {
                        ResetMode::Soft => 1.0 - theta * sg[h][j],
                        ResetMode::Hard => (1.0 - s[j]) + (lif.v_rest() - u[j]) * sg[h][j],
                    };
                    let g = carry[h][j] * dv_du + dspike[h][j] * sg[h][j];
                    du[h][j] = g;
                    carry[h][j] = g * keep;
                }
                add_into(&mut grads.biases[h], &du[h]);
                if h == 0 {
                    accumulate_layer0(&mut pending, &mut pending_t, &du[0], t, plan, grads);
                } else {
                    let input = &trace.spikes[t][h - 1];
                    nonzero_indices(input, &mut nz);
                    outer_add(grads.weights[h].as_mut_slice(), sizes[h], &du[h], input, &nz);
                    surrogate_into(&trace.pre[t][h - 1], lif, &mut sg[h - 1]);
                    active_indices(&sg[h - 1], &mut active);
                    transpose_matvec(&self.weights[h], &du[h], &active, &mut dspike[h - 1]);
                }
            }
        }
        if let Some(pt) = pending_t {
            let x = plan.step(pt);
            nonzero_indices(x, &mut nz);
            outer_add(grads.weights[0].as_mut_slice(), sizes[0], &pending, x, &nz);
        }
        Ok(loss_value)
    }

    pub fn loss_and_gradients(&self, plan: &InputPlan, label: usize) -> Result<(f64, Gradients)> {
        let mut grads = Gradients::zeros_like(self);
        let l = self.backward_into(plan, label, &mut grads)?;
        Ok((l, grads))
    }
}

fn accumulate_layer0(
    pending: &mut [f64],
    pending_t: &mut Option<usize>,
    du: &[f64],
    t: usize,
    plan: &InputPlan,
    grads: &mut Gradients,
) {
    match *pending_t {
        Some(pt) if plan.step(pt) == plan.step(t) => add_into(pending, du),
        _ => {
            if let Some(pt) = *pending_t {
                let x = plan.step(pt);
                let mut nz = Vec::new();
                nonzero_indices(x, &mut nz);
                outer_add(grads.weights[0].as_mut_slice(), x.len(), pending, x, &nz);
            }
            pending.copy_from_slice(du);
            *pending_t = Some(t);
        }
    }
}

fn nonzero_indices(x: &[f64], out: &mut Vec<usize>) {
    out.clear();
    out.extend(x.iter().enumerate().filter(|(_, &v)| v != 0.0).map(|(i, _)| i));
}

fn active_indices(sg: &[f64], out: &mut Vec<usize>) {
    nonzero_indices(sg, out)
}

fn surrogate_into(pre: &[f64], lif: &LifParams, out: &mut [f64]) {
    for (o, &u) in out.iter_mut().zip(pre) {
        *o = surrogate_grad(u, lif);
    }
}

fn add_into(acc: &mut [f64], x: &[f64]) {
    for (a, &b) in acc.iter_mut().zip(x) {
        *a += b;
    }
}

/// `out = W x + b`, summing only over `nz` (the nonzero entries of `x`),
/// left to right. Skipped terms are exact zeros, so this equals the dense sum.
fn affine(w: &Matrix, b: &[f64], x: &[f64], nz: &[usize], out: &mut [f64]) {
    let cols = w.cols();
    let data = w.as_slice();
    let dense = nz.len() == cols;
    for (r, o) in out.iter_mut().enumerate() {
        let row = &data[r * cols..(r + 1) * cols];
        let mut acc = 0.0;
        if dense {
            for (&wv, &xv) in row.iter().zip(x) {
                acc += wv * xv;
            }
        } else {
            for &j in nz {
                acc += row[j] * x[j];
            }
        }
        *o = acc + b[r];
    }
}

/// `gw += delta ⊗ x` over the nonzero columns of `x`.
fn outer_add(gw: &mut [f64], cols: usize, delta: &[f64], x: &[f64], nz: &[usize]) {
    for (r, &d) in delta.iter().enumerate() {
        if d == 0.0 {
            continue;
        }
        let row = &mut gw[r * cols..(r + 1) * cols];
        for &j in nz {
            row[j] += d * x[j];
        }
    }
}

/// `out[j] = Σ_r W[r, j] delta[r]` for `j` in `active`; other entries are zeroed.
fn transpose_matvec(w: &Matrix, delta: &[f64], active: &[usize], out: &mut [f64]) {
    out.iter_mut().for_each(|x| *x = 0.0);
    if active.is_empty() {
        return;
    }
    let cols = w.cols();
    let data = w.as_slice();
    for (r, &d) in delta.iter().enumerate() {
        if d == 0.0 {
            continue;
        }
        let row = &data[r * cols..(r + 1) * cols];
        for &j in active {
            out[j] += row[j] * d;
        }
    }
}

/// Per-step record of a forward pass. Indexing is `[step][hidden layer][neuron]`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ForwardTrace {
    pre: Vec<Vec<Vec<f64>>>,
    spikes: Vec<Vec<Vec<f64>>>,
    output: Vec<Vec<f64>>,
}

impl ForwardTrace {
    pub fn steps(&self) -> usize {
        self.output.len()
    }

    /// Pre-reset membrane of hidden layer `layer` at step `t`.
    pub fn pre_reset(&self, t: usize, layer: usize) -> &[f64] {
        &self.pre[t][layer]
    }

    pub fn spikes(&self, t: usize, layer: usize) -> &[f64] {
        &self.spikes[t][layer]
    }

    /// Readout membrane after step `t`.
    pub fn output(&self, t: usize) -> &[f64] {
        &self.output[t]
    }

    pub fn hidden_layers(&self) -> usize {
        self.spikes.first().map_or(0, Vec::len)
    }

    pub fn total_spikes(&self) -> f64 {
        self.spikes.iter().flatten().flatten().sum()
    }
}

/// Gradients with the same shapes as the model's weights and biases.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    weights: Vec<Matrix>,
    biases: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(model: &TauSnn) -> Self {
        Self {
            weights: model
                .weights
                .iter()
                .map(|w| Matrix::zeros(w.rows(), w.cols()))
                .collect(),
            biases: model.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    pub fn weight(&self, layer: usize) -> &Matrix {
        &self.weights[layer]
    }

    pub fn bias(&self, layer: usize) -> &[f64] {
        &self.biases[layer]
    }

    pub fn zero(&mut self) {
        for w in &mut self.weights {
            w.as_mut_slice().iter_mut().for_each(|x| *x = 0.0);
        }
        for b in &mut self.biases {
            b.iter_mut().for_each(|x| *x = 0.0);
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            add_into(a.as_mut_slice(), b.as_slice());
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            add_into(a, b);
        }
    }

    pub fn scale(&mut self, k: f64) {
        for w in &mut self.weights {
            w.as_mut_slice().iter_mut().for_each(|x| *x *= k);
        }
        for b in &mut self.biases {
            b.iter_mut().for_each(|x| *x *= k);
        }
    }

    /// Same ordering as [`TauSnn::parameters`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w.as_slice());
            out.extend_from_slice(b);
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.flatten().iter().all(|x| x.is_finite())
    }
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - m).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Softmax cross-entropy of `logits` against class `label`.
pub fn loss(logits: &[f64], label: usize) -> Result<f64> {
    if label >= logits.len() {
        return Err(Error::invalid(format!(
            "label {label} out of range for {} classes",
            logits.len()
        )));
    }
    let top = argmax(logits);
    let m = logits[top];
    // log-sum-exp written as m + ln(1 + Σ_{i≠top} e^{z_i - m}) to keep
    // precision when one class dominates.
    let rest: f64 = logits
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != top)
        .map(|(_, &z)| (z - m).exp())
        .sum();
    Ok((m - logits[label]) + rest.ln_1p())
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub fn backward(model: &TauSnn, plan: &InputPlan, label: usize) -> Result<Gradients> {
    Ok(model.loss_and_gradients(plan, label)?.1)
}

pub fn forward(model: &TauSnn, plan: &InputPlan) -> Result<(Vec<f64>, ForwardTrace)> {
    model.forward(plan)
}

pub fn predict(model: &TauSnn, plan: &InputPlan) -> Result<usize> {
    model.predict(plan)
}

pub fn set_inference_tau(model: &TauSnn, tau: f64) -> Result<TauSnn> {
    model.set_inference_tau(tau)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::encode_static;

    fn lif(tau: f64) -> LifParams {
        LifParams::with_tau(tau).unwrap()
    }

    #[test]
    fn presets_construct() {
        let img = Architecture::image_preset();
        assert_eq!(img.layer_sizes(), &[784, 128, 10]);
        assert_eq!(img.t_steps(), 10);
        let ser = Architecture::series_preset(128).unwrap();
        assert_eq!(ser.layer_sizes(), &[1, 784, 256, 64, 4]);
        assert_eq!(ser.hidden_sizes(), &[784, 256, 64]);
        assert!(Architecture::new(vec![4], 2).is_err());
        assert!(Architecture::new(vec![4, 1], 2).is_err());
    }

    #[test]
    fn weight_shapes_chain() {
        let m = TauSnn::new(Architecture::series_preset(8).unwrap(), lif(4.0), &mut Rng::new(1));
        let sizes = [1, 784, 256, 64, 4];
        for l in 0..4 {
            assert_eq!(m.weight(l).shape(), (sizes[l + 1], sizes[l]));
            assert_eq!(m.bias(l).len(), sizes[l + 1]);
        }
        // Stored at single precision.
        assert!(m.parameters().iter().all(|&x| quantize(x) == x));
    }

    #[test]
    fn zero_model_is_silent() {
        let m = TauSnn::zeros(Architecture::image_preset(), lif(8.0));
        let mut img = vec![0.0; 784];
        img[10] = 1.0;
        let (logits, trace) = m.forward(&encode_static(&img, 10).unwrap()).unwrap();
        assert!(logits.iter().all(|&z| z == 0.0));
        assert_eq!(trace.total_spikes(), 0.0);
    }

    #[test]
    fn hand_trace_one_one_two() {
        // 1 -> 1 hidden -> 2 outputs, T = 2, tau = 2, threshold 1, soft reset.
        let arch = Architecture::new(vec![1, 1, 2], 2).unwrap();
        let w0 = Matrix::new(1, 1, vec![1.5]).unwrap();
        let w1 = Matrix::new(2, 1, vec![1.0, -0.5]).unwrap();
        let m = TauSnn::from_parts(arch, lif(2.0), vec![w0, w1], vec![vec![0.0], vec![0.25, 0.0]]).unwrap();
        let plan = InputPlan::new(vec![vec![0.6], vec![0.6]]).unwrap();
        let (logits, trace) = m.forward(&plan).unwrap();
        // Step 1: u = 0 + 0 + 0.9 = 0.9, no spike; out = [0.25, 0].
        assert!((trace.pre_reset(0, 0)[0] - 0.9).abs() < 1e-12);
        assert_eq!(trace.spikes(0, 0), &[0.0]);
        assert_eq!(trace.output(0), &[0.25, 0.0]);
        // Step 2: u = 0.9 - 0.45 + 0.9 = 1.35 -> spike; out = [0.125 + 1.25, -0.5].
        assert!((trace.pre_reset(1, 0)[0] - 1.35).abs() < 1e-12);
        assert_eq!(trace.spikes(1, 0), &[1.0]);
        assert!((logits[0] - 1.375).abs() < 1e-12);
        assert!((logits[1] + 0.5).abs() < 1e-12);
    }

    #[test]
    fn loss_examples() {
        assert!((loss(&[0.0; 10], 3).unwrap() - 10f64.ln()).abs() < 1e-12);
        let mut z = vec![0.0; 10];
        z[2] = 50.0;
        assert!(loss(&z, 2).unwrap() < 1e-20);
        assert!((loss(&[1.0, 2.0, 3.0], 0).unwrap() - 2.407_605_964_444_38).abs() < 1e-9);
        assert!(loss(&[0.0, 1.0], 2).is_err());
    }

    #[test]
    fn argmax_ties_go_low() {
        assert_eq!(argmax(&[0.0; 10]), 0);
        assert_eq!(argmax(&[1.0, 3.0, 2.0]), 1);
        assert_eq!(argmax(&[2.0, 1.0, 2.0]), 0);
    }

    #[test]
    fn set_inference_tau_examples() {
        let m = TauSnn::new(Architecture::image_preset(), lif(16.0), &mut Rng::new(3));
        let img: Vec<f64> = (0..784).map(|i| ((i * 37) % 255) as f64 / 255.0).collect();
        let plan = encode_static(&img, 10).unwrap();
        let same = m.set_inference_tau(16.0).unwrap();
        assert_eq!(m.forward(&plan).unwrap(), same.forward(&plan).unwrap());
        assert!(m.set_inference_tau(0.9).is_err());

        // tau = 1: the first hidden membrane is v_rest + I every step.
        let one = m.set_inference_tau(1.0).unwrap();
        let (_, trace) = one.forward(&plan).unwrap();
        let mut current = vec![0.0; 128];
        let mut nz = Vec::new();
        nonzero_indices(&img, &mut nz);
        affine(one.weight(0), one.bias(0), &img, &nz, &mut current);
        for t in 0..10 {
            assert_eq!(trace.pre_reset(t, 0), &current[..]);
        }
    }

    #[test]
    fn dead_network_only_output_bias_gradient() {
        let m = TauSnn::zeros(Architecture::new(vec![3, 4, 2], 3).unwrap(), lif(4.0));
        let plan = InputPlan::new(vec![vec![0.0; 3]; 3]).unwrap();
        let g = backward(&m, &plan, 1).unwrap();
        for l in 0..2 {
            assert!(g.weight(l).as_slice().iter().all(|&x| x == 0.0));
        }
        assert!(g.bias(0).iter().all(|&x| x == 0.0));
        assert!(g.bias(1).iter().any(|&x| x != 0.0));
    }

    #[test]
    fn static_grouping_matches_per_step_outer_products() {
        // The grouped layer-0 gradient equals an explicit per-step sum.
        let arch = Architecture::new(vec![5, 4, 3], 4).unwrap();
        let m = TauSnn::new(arch, lif(3.0), &mut Rng::new(11));
        let x = vec![0.9, 0.0, 0.4, 1.0, 0.7];
        let same = InputPlan::new(vec![x.clone(); 4]).unwrap();
        let mut perturbed = vec![x.clone(); 4];
        for step in &mut perturbed {
            step[1] = 1e-300; // nonzero but negligible: defeats grouping
        }
        let distinct = InputPlan::new(perturbed).unwrap();
        let a = backward(&m, &same, 2).unwrap();
        let b = backward(&m, &distinct, 2).unwrap();
        for (p, q) in a.weight(0).as_slice().iter().zip(b.weight(0).as_slice()) {
            assert!((p - q).abs() <= 1e-12 * (1.0 + p.abs()));
        }
    }
}
