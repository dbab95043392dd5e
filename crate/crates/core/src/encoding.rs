//! Direct input encoding: analog values are injected as input current at
//! every step and spikes only appear inside the first LIF layer.

use crate::{Error, Result};

pub const IMAGE_SIDE: usize = 28;
pub const IMAGE_PIXELS: usize = IMAGE_SIDE * IMAGE_SIDE;
pub const DEFAULT_SEGMENTS: usize = 4;

/// `T` input-current vectors of equal width.
#[derive(Debug, Clone, PartialEq)]
pub struct InputPlan {
    width: usize,
    currents: Vec<Vec<f64>>,
}

impl InputPlan {
    pub fn new(currents: Vec<Vec<f64>>) -> Result<Self> {
        let width = currents.first().map_or(0, Vec::len);
        if currents.is_empty() || width == 0 {
            return Err(Error::invalid("input plan needs at least one step of positive width"));
        }
        for (t, step) in currents.iter().enumerate() {
            if step.len() != width {
                return Err(Error::Length {
                    op: "InputPlan::new",
                    expected: width,
                    actual: step.len(),
                });
            }
            if step.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite(format!("input current at step {t}")));
            }
        }
        Ok(Self { width, currents })
    }

    pub fn steps(&self) -> usize {
        self.currents.len()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn step(&self, t: usize) -> &[f64] {
        &self.currents[t]
    }

    pub fn currents(&self) -> &[Vec<f64>] {
        &self.currents
    }
}

fn check_image(image: &[f64]) -> Result<()> {
    if image.len() != IMAGE_PIXELS {
        return Err(Error::Length {
            op: "image encoder",
            expected: IMAGE_PIXELS,
            actual: image.len(),
        });
    }
    if let Some(i) = image.iter().position(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::invalid(format!("pixel {i} = {} outside [0, 1]", image[i])));
    }
    Ok(())
}

/// The image repeated as constant current for `t_steps` steps.
pub fn encode_static(image: &[f64], t_steps: usize) -> Result<InputPlan> {
    check_image(image)?;
    if t_steps == 0 {
        return Err(Error::invalid("t_steps must be positive"));
    }
    InputPlan::new(vec![image.to_vec(); t_steps])
}

/// Segment active at step `t` when `n_segments` bands share `t_steps` steps.
pub fn active_segment(t: usize, t_steps: usize, n_segments: usize) -> usize {
    n_segments * t / t_steps
}

/// Splits the image into `n_segments` contiguous row-major bands and
/// presents one band per step, following `active_segment`. Pixels keep
/// their original indices; inactive bands are zero.
pub fn encode_dynamic(image: &[f64], t_steps: usize, n_segments: usize) -> Result<InputPlan> {
    check_image(image)?;
    if n_segments == 0 || !IMAGE_PIXELS.is_multiple_of(n_segments) {
        return Err(Error::invalid(format!(
            "{IMAGE_PIXELS} pixels cannot be split into {n_segments} equal segments"
        )));
    }
    if t_steps < n_segments {
        return Err(Error::invalid(format!(
            "t_steps ({t_steps}) must be at least n_segments ({n_segments})"
        )));
    }
    let seg_len = IMAGE_PIXELS / n_segments;
    let currents = (0..t_steps)
        .map(|t| {
            let k = active_segment(t, t_steps, n_segments);
            let mut step = vec![0.0; IMAGE_PIXELS];
            let range = k * seg_len..(k + 1) * seg_len;
            step[range.clone()].copy_from_slice(&image[range]);
            step
        })
        .collect();
    InputPlan::new(currents)
}

/// One sample per step through a single input neuron, min-max scaled to
/// `[0, 1]` over the window. A constant window maps to 0.5 everywhere.
pub fn encode_series(samples: &[f64]) -> Result<InputPlan> {
    if samples.is_empty() {
        return Err(Error::invalid("empty series window"));
    }
    if let Some(i) = samples.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite(format!("series sample {i}")));
    }
    let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    let currents = samples
        .iter()
        .map(|&x| vec![if span > 0.0 { (x - lo) / span } else { 0.5 }])
        .collect();
    InputPlan::new(currents)
}
