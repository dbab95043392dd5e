//! Mini-batch training, evaluation under a τ override, and checkpoints.

use std::fmt;
use std::fs;
use std::hash::Hasher;
use std::path::Path;
use std::str::FromStr;

use fnv::FnvHasher;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, LabeledImage, LabeledWindow};
use crate::encoding::{encode_dynamic, encode_series, encode_static, InputPlan, DEFAULT_SEGMENTS};
use crate::error::CheckpointError;
use crate::network::{quantize, Architecture, Gradients, TauSnn};
use crate::neuron::{
    check_tau, LifParams, ResetMode, DEFAULT_SURROGATE_HALF_WIDTH, DEFAULT_V_REST, DEFAULT_V_THRESHOLD,
};
use crate::numerics::{Matrix, Rng, RNG_ALGORITHM};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Static,
    Dynamic,
    Series,
}

impl Task {
    pub fn default_epochs(self) -> usize {
        match self {
            Task::Static | Task::Dynamic => 10,
            Task::Series => 30,
        }
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "static" => Ok(Task::Static),
            "dynamic" => Ok(Task::Dynamic),
            "series" => Ok(Task::Series),
            other => Err(Error::invalid(format!("unknown task {other:?}"))),
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Static => "static",
            Task::Dynamic => "dynamic",
            Task::Series => "series",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "lowercase")]
pub enum Optimizer {
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Default for Optimizer {
    fn default() -> Self {
        Optimizer::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl FromStr for Optimizer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sgd" => Ok(Optimizer::Sgd),
            "adam" => Ok(Optimizer::default()),
            other => Err(Error::invalid(format!("unknown optimizer {other:?}"))),
        }
    }
}

pub const DEFAULT_LEARNING_RATE: f64 = 1e-3;
pub const DEFAULT_BATCH_SIZE: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub task: Task,
    pub tau_train: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: Optimizer,
    pub seed: u64,
    #[serde(default)]
    pub reset_mode: ResetMode,
}

impl TrainConfig {
    /// Task defaults: Adam, lr 1e-3, batch 64, seed 0.
    pub fn new(task: Task, tau_train: f64) -> Self {
        Self {
            task,
            tau_train,
            epochs: task.default_epochs(),
            batch_size: DEFAULT_BATCH_SIZE,
            learning_rate: DEFAULT_LEARNING_RATE,
            optimizer: Optimizer::default(),
            seed: 0,
            reset_mode: ResetMode::Soft,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_tau(self.tau_train)?;
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size must be at least 1"));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid(format!(
                "learning rate {} must be finite and >= 0",
                self.learning_rate
            )));
        }
        Ok(())
    }

    pub fn lif_params(&self) -> Result<LifParams> {
        LifParams::new(
            self.tau_train,
            DEFAULT_V_REST,
            DEFAULT_V_THRESHOLD,
            self.reset_mode,
            DEFAULT_SURROGATE_HALF_WIDTH,
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    /// Mean training loss per epoch.
    pub loss: Vec<f64>,
    /// Held-out accuracy at the training τ after each epoch.
    pub accuracy: Vec<f64>,
}

/// A labeled example that can be turned into an input plan for a task.
pub trait Example: Sync {
    fn encode(&self, task: Task, t_steps: usize) -> Result<InputPlan>;
    fn label(&self) -> usize;
}

impl Example for LabeledImage {
    fn encode(&self, task: Task, t_steps: usize) -> Result<InputPlan> {
        match task {
            Task::Static => encode_static(self.pixels(), t_steps),
            Task::Dynamic => encode_dynamic(self.pixels(), t_steps, DEFAULT_SEGMENTS),
            Task::Series => Err(Error::invalid("image examples cannot be used for the series task")),
        }
    }

    fn label(&self) -> usize {
        LabeledImage::label(self)
    }
}

impl Example for LabeledWindow {
    fn encode(&self, task: Task, t_steps: usize) -> Result<InputPlan> {
        if task != Task::Series {
            return Err(Error::invalid(format!(
                "series windows cannot be used for the {task} task"
            )));
        }
        if self.samples().len() != t_steps {
            return Err(Error::Length {
                op: "series window",
                expected: t_steps,
                actual: self.samples().len(),
            });
        }
        encode_series(self.samples())
    }

    fn label(&self) -> usize {
        LabeledWindow::label(self)
    }
}

struct OptimizerState {
    kind: Optimizer,
    lr: f64,
    step: i32,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl OptimizerState {
    fn new(kind: Optimizer, lr: f64, n: usize) -> Self {
        let (m, v) = match kind {
            Optimizer::Sgd => (Vec::new(), Vec::new()),
            Optimizer::Adam { .. } => (vec![0.0; n], vec![0.0; n]),
        };
        Self {
            kind,
            lr,
            step: 0,
            m,
            v,
        }
    }

    /// Applies one update and rounds every parameter back to f32 precision.
    /// Returns false, leaving the model untouched, if any parameter would
    /// become non-finite.
    fn apply(&mut self, model: &mut TauSnn, grads: &Gradients) -> bool {
        self.step += 1;
        let g = grads.flatten();
        let mut p = model.parameters();
        match self.kind {
            Optimizer::Sgd => {
                for (p, g) in p.iter_mut().zip(&g) {
                    *p = quantize(*p - self.lr * g);
                }
            }
            Optimizer::Adam { beta1, beta2, eps } => {
                let c1 = 1.0 - beta1.powi(self.step);
                let c2 = 1.0 - beta2.powi(self.step);
                for i in 0..p.len() {
                    self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * g[i];
                    self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * g[i] * g[i];
                    let m_hat = self.m[i] / c1;
                    let v_hat = self.v[i] / c2;
                    p[i] = quantize(p[i] - self.lr * m_hat / (v_hat.sqrt() + eps));
                }
            }
        }
        model.set_parameters(&p).is_ok()
    }
}

/// Sum of per-sample gradients in sample order, plus the summed loss.
/// Samples may be processed in parallel; the reduction is sequential.
fn batch_gradients<E: Example>(model: &TauSnn, task: Task, batch: &[&E]) -> Result<(f64, Gradients)> {
    let t_steps = model.architecture().t_steps();
    let per_sample: Vec<Result<(f64, Gradients)>> = batch
        .par_iter()
        .map(|ex| {
            let plan = ex.encode(task, t_steps)?;
            model.loss_and_gradients(&plan, ex.label())
        })
        .collect();
    let mut total = Gradients::zeros_like(model);
    let mut loss = 0.0;
    for r in per_sample {
        let (l, g) = r?;
        loss += l;
        total.add_assign(&g);
    }
    Ok((loss, total))
}

/// Trains a freshly initialized model. Initialization and shuffling are
/// driven only by `config.seed`.
pub fn train<E: Example>(
    arch: &Architecture,
    dataset: &Dataset<E>,
    config: &TrainConfig,
) -> Result<(TauSnn, TrainHistory)> {
    config.validate()?;
    if dataset.train.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    let root = Rng::new(config.seed);
    let model = TauSnn::new(arch.clone(), config.lif_params()?, &mut root.child(0));
    train_from(model, dataset, config)
}

/// Continues training `model` (its τ is replaced by `config.tau_train`).
pub fn train_from<E: Example>(
    model: TauSnn,
    dataset: &Dataset<E>,
    config: &TrainConfig,
) -> Result<(TauSnn, TrainHistory)> {
    config.validate()?;
    if dataset.train.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    let mut model = model.set_inference_tau(config.tau_train)?;
    let mut shuffle_rng = Rng::new(config.seed).child(1);
    let mut opt = OptimizerState::new(config.optimizer, config.learning_rate, model.n_parameters());
    let mut history = TrainHistory::default();
    let held_out = if dataset.test.is_empty() {
        &dataset.train
    } else {
        &dataset.test
    };
    let mut order: Vec<usize> = (0..dataset.train.len()).collect();

    for epoch in 0..config.epochs {
        shuffle_rng.shuffle(&mut order);
        let mut epoch_loss = 0.0;
        for (b, idx) in order.chunks(config.batch_size).enumerate() {
            let batch: Vec<&E> = idx.iter().map(|&i| &dataset.train[i]).collect();
            let (loss, mut grads) = batch_gradients(&model, config.task, &batch)?;
            if !loss.is_finite() || !grads.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    batch: b,
                    loss: loss / idx.len() as f64,
                });
            }
            grads.scale(1.0 / idx.len() as f64);
            if !opt.apply(&mut model, &grads) {
                return Err(Error::Diverged {
                    epoch,
                    batch: b,
                    loss: loss / idx.len() as f64,
                });
            }
            epoch_loss += loss;
        }
        history.loss.push(epoch_loss / dataset.train.len() as f64);
        history
            .accuracy
            .push(evaluate(&model, held_out, config.task, config.tau_train)?);
    }
    Ok((model, history))
}

/// Fraction of `examples` classified correctly with global τ `tau_infer`.
/// The model itself is not modified.
pub fn evaluate<E: Example>(model: &TauSnn, examples: &[E], task: Task, tau_infer: f64) -> Result<f64> {
    check_tau(tau_infer)?;
    if examples.is_empty() {
        return Err(Error::invalid("cannot evaluate on an empty dataset"));
    }
    let t_steps = model.architecture().t_steps();
    let correct = examples
        .par_iter()
        .map(|ex| {
            let plan = ex.encode(task, t_steps)?;
            let logits = model.logits_at_tau(&plan, tau_infer)?;
            Ok(usize::from(crate::network::argmax(&logits) == ex.label()))
        })
        .collect::<Result<Vec<usize>>>()?
        .into_iter()
        .sum::<usize>();
    Ok(correct as f64 / examples.len() as f64)
}

pub const CHECKPOINT_FORMAT: &str = "tau-snn-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    layer_sizes: Vec<usize>,
    t_steps: usize,
    tau_discrete: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    layer_taus: Option<Vec<f64>>,
    v_rest: f64,
    v_threshold: f64,
    reset_mode: ResetMode,
    surrogate_half_width: f64,
    rng: String,
    train: Option<TrainConfig>,
    payload_bytes: usize,
    digest: String,
}

/// A loaded checkpoint: the model plus the configuration it was trained with.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: TauSnn,
    pub config: Option<TrainConfig>,
    pub rng_algorithm: String,
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h = FnvHasher::default();
    h.write(bytes);
    h.finish()
}

fn digest_string(bytes: &[u8]) -> String {
    format!("fnv1a64:{:016x}", fnv1a64(bytes))
}

/// Writes a pretty JSON header, a newline, then every weight and bias as
/// little-endian f32 (layer by layer, weights row-major before bias).
pub fn save_checkpoint(model: &TauSnn, config: Option<&TrainConfig>, path: &Path) -> Result<()> {
    let blob: Vec<u8> = model
        .parameters()
        .iter()
        .flat_map(|&x| (x as f32).to_le_bytes())
        .collect();
    let lif = model.lif_params();
    let header = Header {
        format: CHECKPOINT_FORMAT.into(),
        version: CHECKPOINT_VERSION,
        layer_sizes: model.architecture().layer_sizes().to_vec(),
        t_steps: model.architecture().t_steps(),
        tau_discrete: lif.tau_discrete(),
        layer_taus: model.layer_taus().map(<[f64]>::to_vec),
        v_rest: lif.v_rest(),
        v_threshold: lif.v_threshold(),
        reset_mode: lif.reset_mode(),
        surrogate_half_width: lif.surrogate_half_width(),
        rng: RNG_ALGORITHM.into(),
        train: config.cloned(),
        payload_bytes: blob.len(),
        digest: digest_string(&blob),
    };
    let mut bytes = serde_json::to_vec_pretty(&header).map_err(|e| CheckpointError::Header(e.to_string()))?;
    bytes.push(b'\n');
    bytes.extend_from_slice(&blob);
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_checkpoint(&bytes)
}

pub fn parse_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    let header_err = |m: String| Error::from(CheckpointError::Header(m));
    let mut stream = serde_json::Deserializer::from_slice(bytes).into_iter::<serde_json::Value>();
    let value = stream
        .next()
        .ok_or_else(|| header_err("empty file".into()))?
        .map_err(|e| header_err(e.to_string()))?;
    let offset = stream.byte_offset();
    let version = value.get("version").and_then(serde_json::Value::as_u64);
    match version {
        Some(v) if v == u64::from(CHECKPOINT_VERSION) => {}
        Some(v) => {
            return Err(CheckpointError::UnsupportedVersion {
                found: u32::try_from(v).unwrap_or(u32::MAX),
                supported: CHECKPOINT_VERSION,
            }
            .into())
        }
        None => return Err(header_err("missing version".into())),
    }
    let header: Header = serde_json::from_value(value).map_err(|e| header_err(e.to_string()))?;
    if header.format != CHECKPOINT_FORMAT {
        return Err(header_err(format!("unknown format {:?}", header.format)));
    }
    let blob = match bytes.get(offset) {
        Some(b'\n') => &bytes[offset + 1..],
        None => &bytes[bytes.len()..],
        Some(_) => return Err(header_err("expected newline after header".into())),
    };
    let actual = digest_string(blob);
    if actual != header.digest {
        return Err(CheckpointError::Digest {
            expected: header.digest,
            actual,
        }
        .into());
    }

    let arch = Architecture::new(header.layer_sizes, header.t_steps)?;
    let lif = LifParams::new(
        header.tau_discrete,
        header.v_rest,
        header.v_threshold,
        header.reset_mode,
        header.surrogate_half_width,
    )?;
    let sizes = arch.layer_sizes().to_vec();
    let n_params: usize = sizes.windows(2).map(|w| w[1] * w[0] + w[1]).sum();
    if blob.len() != n_params * 4 || header.payload_bytes != blob.len() {
        return Err(header_err(format!(
            "payload holds {} bytes, architecture needs {}",
            blob.len(),
            n_params * 4
        )));
    }
    let mut values = blob
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])));
    let mut weights = Vec::new();
    let mut biases = Vec::new();
    for w in sizes.windows(2) {
        let (rows, cols) = (w[1], w[0]);
        weights.push(Matrix::new(rows, cols, values.by_ref().take(rows * cols).collect())?);
        biases.push(values.by_ref().take(rows).collect());
    }
    let mut model = TauSnn::from_parts(arch, lif, weights, biases)?;
    if let Some(taus) = header.layer_taus {
        model = model.with_layer_taus(taus)?;
    }
    Ok(Checkpoint {
        model,
        config: header.train,
        rng_algorithm: header.rng,
    })
}
