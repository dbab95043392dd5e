//! Discrete leaky integrate-and-fire neuron.
//!
//! One step of the membrane update is
//!
//! ```text
//! u = v + (v_rest - v) / tau + i
//! ```
//!
//! followed by a threshold test `u >= threshold` and, for neurons that
//! spiked, a reset (soft: `u - threshold`, hard: `v_rest`). `tau` is the
//! dimensionless step count; `tau = 1` forgets the previous membrane
//! entirely.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResetMode {
    /// Subtract the threshold, keeping the super-threshold residue.
    #[default]
    Soft,
    /// Return to the resting potential.
    Hard,
}

impl std::str::FromStr for ResetMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "soft" => Ok(ResetMode::Soft),
            "hard" => Ok(ResetMode::Hard),
            other => Err(Error::invalid(format!("unknown reset mode {other:?}"))),
        }
    }
}

impl std::fmt::Display for ResetMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ResetMode::Soft => "soft",
            ResetMode::Hard => "hard",
        })
    }
}

/// How the spike nonlinearity is evaluated in the forward pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpikeMode {
    /// Heaviside spikes in {0, 1}.
    #[default]
    Spiking,
    /// Piecewise-linear ramp whose derivative equals the surrogate; only
    /// used to verify BPTT against finite differences.
    Smoothed,
}

pub const DEFAULT_V_REST: f64 = 0.0;
pub const DEFAULT_V_THRESHOLD: f64 = 1.0;
pub const DEFAULT_SURROGATE_HALF_WIDTH: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LifParams {
    tau_discrete: f64,
    v_rest: f64,
    v_threshold: f64,
    reset_mode: ResetMode,
    surrogate_half_width: f64,
}

impl Default for LifParams {
    fn default() -> Self {
        Self {
            tau_discrete: 2.0,
            v_rest: DEFAULT_V_REST,
            v_threshold: DEFAULT_V_THRESHOLD,
            reset_mode: ResetMode::Soft,
            surrogate_half_width: DEFAULT_SURROGATE_HALF_WIDTH,
        }
    }
}

pub(crate) fn check_tau(tau: f64) -> Result<()> {
    if tau.is_finite() && tau >= 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("tau must be a finite value >= 1, got {tau}")))
    }
}

impl LifParams {
    pub fn new(
        tau_discrete: f64,
        v_rest: f64,
        v_threshold: f64,
        reset_mode: ResetMode,
        surrogate_half_width: f64,
    ) -> Result<Self> {
        check_tau(tau_discrete)?;
        if !v_rest.is_finite() || !v_threshold.is_finite() || v_threshold <= v_rest {
            return Err(Error::invalid(format!(
                "threshold {v_threshold} must exceed resting potential {v_rest}"
            )));
        }
        if !surrogate_half_width.is_finite() || surrogate_half_width <= 0.0 {
            return Err(Error::invalid(format!(
                "surrogate half-width must be positive, got {surrogate_half_width}"
            )));
        }
        Ok(Self {
            tau_discrete,
            v_rest,
            v_threshold,
            reset_mode,
            surrogate_half_width,
        })
    }

    /// Default rest, threshold, soft reset and surrogate width with the given τ.
    pub fn with_tau(tau_discrete: f64) -> Result<Self> {
        let d = Self::default();
        Self::new(
            tau_discrete,
            d.v_rest,
            d.v_threshold,
            d.reset_mode,
            d.surrogate_half_width,
        )
    }

    pub fn tau_discrete(&self) -> f64 {
        self.tau_discrete
    }

    pub fn v_rest(&self) -> f64 {
        self.v_rest
    }

    pub fn v_threshold(&self) -> f64 {
        self.v_threshold
    }

    pub fn reset_mode(&self) -> ResetMode {
        self.reset_mode
    }

    pub fn surrogate_half_width(&self) -> f64 {
        self.surrogate_half_width
    }

    pub fn set_tau(&self, tau_discrete: f64) -> Result<Self> {
        check_tau(tau_discrete)?;
        Ok(Self { tau_discrete, ..*self })
    }

    pub fn set_reset_mode(&self, reset_mode: ResetMode) -> Self {
        Self { reset_mode, ..*self }
    }

    /// Leak-then-integrate, before any threshold test.
    #[inline]
    pub(crate) fn integrate(&self, v: f64, input: f64, tau: f64) -> f64 {
        v + (self.v_rest - v) / tau + input
    }

    /// Spike value for a pre-reset membrane under `mode`.
    #[inline]
    pub(crate) fn spike(&self, u: f64, mode: SpikeMode) -> f64 {
        match mode {
            SpikeMode::Spiking => {
                if u >= self.v_threshold {
                    1.0
                } else {
                    0.0
                }
            }
            SpikeMode::Smoothed => smoothed_spike(u, self),
        }
    }

    #[inline]
    pub(crate) fn reset(&self, u: f64, s: f64) -> f64 {
        match self.reset_mode {
            ResetMode::Soft => u - self.v_threshold * s,
            ResetMode::Hard => u * (1.0 - s) + self.v_rest * s,
        }
    }
}

/// Membrane potentials of one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LifLayerState {
    v: Vec<f64>,
}

impl LifLayerState {
    pub fn new(v: Vec<f64>) -> Result<Self> {
        if let Some(i) = v.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!("membrane of neuron {i}")));
        }
        Ok(Self { v })
    }

    pub fn at_rest(n: usize, params: &LifParams) -> Self {
        Self {
            v: vec![params.v_rest; n],
        }
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }

    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }
}

/// One discrete update of a layer: integrate, spike where `u >= threshold`,
/// then reset the neurons that spiked.
pub fn lif_step(
    state: &LifLayerState,
    input_current: &[f64],
    params: &LifParams,
) -> Result<(LifLayerState, Vec<bool>)> {
    if input_current.len() != state.len() {
        return Err(Error::Length {
            op: "lif_step",
            expected: state.len(),
            actual: input_current.len(),
        });
    }
    if let Some(i) = input_current.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite(format!("input current of neuron {i}")));
    }
    let tau = params.tau_discrete;
    let mut spikes = Vec::with_capacity(state.len());
    let v = state
        .v
        .iter()
        .zip(input_current)
        .map(|(&v, &i)| {
            let u = params.integrate(v, i, tau);
            let s = params.spike(u, SpikeMode::Spiking);
            spikes.push(s == 1.0);
            params.reset(u, s)
        })
        .collect();
    Ok((LifLayerState::new(v)?, spikes))
}

/// `v_rest + (v0 - v_rest) (1 - 1/tau)^t`: the zero-input, spike-free
/// solution of the update recursion.
pub fn decay_closed_form(v0: f64, t: u32, params: &LifParams) -> f64 {
    let keep = 1.0 - 1.0 / params.tau_discrete;
    params.v_rest + (v0 - params.v_rest) * keep.powi(t as i32)
}

/// Rectangular surrogate derivative of the spike: `1/(2w)` inside
/// `|u - threshold| <= w`, zero outside.
#[inline]
pub fn surrogate_grad(v_pre_reset: f64, params: &LifParams) -> f64 {
    let w = params.surrogate_half_width;
    if (v_pre_reset - params.v_threshold).abs() <= w {
        1.0 / (2.0 * w)
    } else {
        0.0
    }
}

/// Ramp `clamp((u - threshold + w) / 2w, 0, 1)`; its derivative is the
/// surrogate except at the two kinks.
#[inline]
pub fn smoothed_spike(v_pre_reset: f64, params: &LifParams) -> f64 {
    let w = params.surrogate_half_width;
    ((v_pre_reset - params.v_threshold + w) / (2.0 * w)).clamp(0.0, 1.0)
}
