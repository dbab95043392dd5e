//! τ sweeps, weight statistics, firing rates and tolerance windows.

use rayon::prelude::*;

use crate::data::Dataset;
use crate::network::{Architecture, TauSnn};
use crate::neuron::check_tau;
use crate::training::{evaluate, train, Example, Task, TrainConfig};
use crate::{Error, Result};

/// The discrete τ ladder used by the sweeps.
pub const DEFAULT_TAU_LADDER: [f64; 9] = [2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0, 256.0, 512.0];
pub const DEFAULT_HISTOGRAM_BINS: usize = 101;
pub const DEFAULT_HISTOGRAM_BOUND: f64 = 1.0;
pub const NEAR_ZERO: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyGrid {
    pub task: Task,
    pub seed: u64,
    pub train_taus: Vec<f64>,
    pub infer_taus: Vec<f64>,
    /// `accuracy[i][j]` is the model trained at `train_taus[i]` evaluated
    /// at `infer_taus[j]`.
    pub accuracy: Vec<Vec<f64>>,
}

impl AccuracyGrid {
    pub fn get(&self, tau_train: f64, tau_infer: f64) -> Option<f64> {
        let i = self.train_taus.iter().position(|&t| t == tau_train)?;
        let j = self.infer_taus.iter().position(|&t| t == tau_infer)?;
        Some(self.accuracy[i][j])
    }

    pub fn row(&self, tau_train: f64) -> Option<&[f64]> {
        let i = self.train_taus.iter().position(|&t| t == tau_train)?;
        Some(&self.accuracy[i])
    }

    /// Cells where inference τ equals training τ, in train order.
    pub fn matched_diagonal(&self) -> Vec<(f64, f64)> {
        self.train_taus
            .iter()
            .filter_map(|&t| self.get(t, t).map(|a| (t, a)))
            .collect()
    }

    /// Best matched-τ accuracy minus `margin`; `None` if no τ is on both axes.
    pub fn matched_floor(&self, margin: f64) -> Option<f64> {
        self.matched_diagonal()
            .into_iter()
            .map(|(_, a)| a)
            .reduce(f64::max)
            .map(|m| m - margin)
    }
}

fn check_taus(taus: &[f64], what: &str) -> Result<()> {
    if taus.is_empty() {
        return Err(Error::invalid(format!("{what} must be non-empty")));
    }
    taus.iter().try_for_each(|&t| check_tau(t))?;
    if taus.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid(format!("{what} must be strictly increasing")));
    }
    Ok(())
}

/// Trains one model per `train_taus` entry (all with `base.seed`) and
/// evaluates each on the held-out set at every `infer_taus` entry.
/// Rows run in parallel; results are ordered by τ.
pub fn tau_sweep<E: Example>(
    arch: &Architecture,
    dataset: &Dataset<E>,
    train_taus: &[f64],
    infer_taus: &[f64],
    base: &TrainConfig,
) -> Result<(AccuracyGrid, Vec<TauSnn>)> {
    check_taus(train_taus, "train taus")?;
    check_taus(infer_taus, "infer taus")?;
    let held_out = if dataset.test.is_empty() {
        &dataset.train
    } else {
        &dataset.test
    };
    let rows: Vec<Result<(Vec<f64>, TauSnn)>> = train_taus
        .par_iter()
        .map(|&tau_train| {
            let row = || -> Result<(Vec<f64>, TauSnn)> {
                let config = TrainConfig {
                    tau_train,
                    ..base.clone()
                };
                let (model, _) = train(arch, dataset, &config)?;
                let accs = infer_taus
                    .iter()
                    .map(|&t| evaluate(&model, held_out, base.task, t))
                    .collect::<Result<Vec<_>>>()?;
                Ok((accs, model))
            };
            row().map_err(|e| Error::SweepRow {
                tau_train,
                source: Box::new(e),
            })
        })
        .collect();
    let mut accuracy = Vec::with_capacity(rows.len());
    let mut models = Vec::with_capacity(rows.len());
    for r in rows {
        let (a, m) = r?;
        accuracy.push(a);
        models.push(m);
    }
    let grid = AccuracyGrid {
        task: base.task,
        seed: base.seed,
        train_taus: train_taus.to_vec(),
        infer_taus: infer_taus.to_vec(),
        accuracy,
    };
    Ok((grid, models))
}

/// Fixed-width histogram over `[-bound, bound]` with underflow and overflow bins.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub bound: f64,
    pub counts: Vec<u64>,
    pub underflow: u64,
    pub overflow: u64,
}

impl Histogram {
    pub fn new(values: &[f64], bins: usize, bound: f64) -> Result<Self> {
        if bins < 3 {
            return Err(Error::invalid(format!("need at least 3 bins, got {bins}")));
        }
        if !(bound > 0.0 && bound.is_finite()) {
            return Err(Error::invalid(format!("histogram bound must be positive, got {bound}")));
        }
        let mut h = Self {
            bound,
            counts: vec![0; bins],
            underflow: 0,
            overflow: 0,
        };
        for &x in values {
            if x < -bound {
                h.underflow += 1;
            } else if x > bound {
                h.overflow += 1;
            } else {
                let k = ((x + bound) / (2.0 * bound) * bins as f64).floor() as usize;
                h.counts[k.min(bins - 1)] += 1;
            }
        }
        Ok(h)
    }

    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    /// `(left, right)` edges of bin `k`.
    pub fn edges(&self, k: usize) -> (f64, f64) {
        let width = 2.0 * self.bound / self.bins() as f64;
        (-self.bound + k as f64 * width, -self.bound + (k + 1) as f64 * width)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum::<u64>() + self.underflow + self.overflow
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerWeightStats {
    pub histogram: Histogram,
    /// Population standard deviation.
    pub std: f64,
    /// Excess kurtosis; `None` when the variance is zero.
    pub kurtosis: Option<f64>,
    /// Fraction of weights with `|w| < 0.01`.
    pub near_zero_fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightStats {
    pub layers: Vec<LayerWeightStats>,
}

pub fn layer_weight_stats(values: &[f64], bins: usize, bound: f64) -> Result<LayerWeightStats> {
    let histogram = Histogram::new(values, bins, bound)?;
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let m2 = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let m4 = values.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
    Ok(LayerWeightStats {
        histogram,
        std: m2.sqrt(),
        kurtosis: (m2 > 0.0).then(|| m4 / (m2 * m2) - 3.0),
        near_zero_fraction: values.iter().filter(|x| x.abs() < NEAR_ZERO).count() as f64 / n,
    })
}

/// Per-layer statistics over weight entries (biases excluded).
pub fn weight_stats(model: &TauSnn, bins: usize, bound: f64) -> Result<WeightStats> {
    let layers = model
        .weights()
        .iter()
        .map(|w| layer_weight_stats(w.as_slice(), bins, bound))
        .collect::<Result<_>>()?;
    Ok(WeightStats { layers })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FiringReport {
    pub taus: Vec<f64>,
    /// `rates[i][l]`: spikes per neuron per step in hidden layer `l` at `taus[i]`.
    pub rates: Vec<Vec<f64>>,
}

/// Firing rate of every hidden layer, for each inference τ, averaged over
/// `examples`. The readout never spikes and is not reported.
pub fn firing_report<E: Example>(model: &TauSnn, examples: &[E], task: Task, taus: &[f64]) -> Result<FiringReport> {
    if taus.is_empty() {
        return Err(Error::invalid("firing_report needs at least one tau"));
    }
    if examples.is_empty() {
        return Err(Error::invalid("firing_report needs at least one example"));
    }
    let arch = model.architecture();
    let hidden = arch.hidden_sizes().to_vec();
    let t_steps = arch.t_steps();
    let rates = taus
        .iter()
        .map(|&tau| {
            check_tau(tau)?;
            let per_sample = examples
                .par_iter()
                .map(|ex| model.spike_counts_at_tau(&ex.encode(task, t_steps)?, tau))
                .collect::<Result<Vec<_>>>()?;
            Ok(hidden
                .iter()
                .enumerate()
                .map(|(l, &n)| {
                    let spikes: f64 = per_sample.iter().map(|c| c[l]).sum();
                    spikes / (n * t_steps * examples.len()) as f64
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(FiringReport {
        taus: taus.to_vec(),
        rates,
    })
}

/// Widest contiguous run of `row` at or above `floor`, as inclusive τ
/// endpoints. Ties go to the run with the lowest τ.
pub fn tolerance_window(row: &[f64], taus: &[f64], floor: f64) -> Option<(f64, f64)> {
    let mut best: Option<(usize, usize)> = None;
    let mut start = None;
    for i in 0..=row.len() {
        let ok = i < row.len() && row[i] >= floor;
        match (ok, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                if best.is_none_or(|(bs, be)| i - s > be - bs + 1) {
                    best = Some((s, i - 1));
                }
                start = None;
            }
            _ => {}
        }
    }
    best.map(|(s, e)| (taus[s], taus[e]))
}

/// Width of a window in octaves; no window counts as zero.
pub fn log2_span(window: Option<(f64, f64)>) -> f64 {
    window.map_or(0.0, |(lo, hi)| (hi / lo).log2())
}
