//! Classical networks on a small tensor tape.
//!
//! Models own a flat weight vector described by a [`ParamLayout`]; recording a
//! forward pass on a [`Tape`] and calling backward yields a weight-shaped gradient.

mod autoencoder;
mod baseline;
mod interface;
pub mod tape;

pub use autoencoder::{autoencoder_step, AutoencoderModel};
pub use baseline::{forward_baseline, softmax, softmax_cross_entropy, BaselineHead, BaselineKind};
pub use interface::{forward_interface, InterfaceKind, InterfaceModel, IMAGE_SHAPE};
pub use tape::{Gradients, Tape, Var};

use rand::Rng as _;

use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NnError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("unknown model kind `{0}`")]
    UnknownKind(String),
    #[error("expected {expected} weights, got {found}")]
    WeightCount { expected: usize, found: usize },
    #[error("invalid model configuration: {0}")]
    Config(String),
}

/// How a parameter block is initialised.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ParamRole {
    /// Uniform in `±sqrt(6 / (fan_in + fan_out))`.
    Weight { fan_in: usize, fan_out: usize },
    /// Zero.
    Bias,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
    pub role: ParamRole,
}

impl ParamEntry {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Named, contiguous parameter blocks inside one flat weight vector.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamLayout {
    entries: Vec<ParamEntry>,
    total: usize,
}

impl ParamLayout {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a block and returns its index.
    pub fn add(&mut self, name: impl Into<String>, shape: &[usize], role: ParamRole) -> usize {
        let entry = ParamEntry {
            name: name.into(),
            shape: shape.to_vec(),
            offset: self.total,
            role,
        };
        self.total += entry.len();
        self.entries.push(entry);
        self.entries.len() - 1
    }

    /// Convenience for a `[out, in, …kernel]` weight plus `[out]` bias.
    pub(crate) fn add_layer(&mut self, name: &str, shape: &[usize]) -> (usize, usize) {
        let out = shape[0];
        let receptive: usize = shape[2..].iter().product::<usize>().max(1);
        let fan_in = shape.get(1).copied().unwrap_or(1) * receptive;
        let fan_out = out * receptive;
        let w = self.add(format!("{name}.weight"), shape, ParamRole::Weight { fan_in, fan_out });
        let b = self.add(format!("{name}.bias"), &[out], ParamRole::Bias);
        (w, b)
    }

    pub fn entries(&self) -> &[ParamEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    /// Number of parameters in blocks whose name contains `pattern`.
    pub fn count_matching(&self, pattern: &str) -> usize {
        self.entries
            .iter()
            .filter(|e| e.name.contains(pattern))
            .map(ParamEntry::len)
            .sum()
    }

    pub fn init(&self, rng: &mut Rng) -> Vec<f64> {
        let mut w = vec![0.0; self.total];
        for e in &self.entries {
            if let ParamRole::Weight { fan_in, fan_out } = e.role {
                let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
                for v in &mut w[e.offset..e.offset + e.len()] {
                    *v = rng.gen_range(-a..a);
                }
            }
        }
        w
    }

    pub(crate) fn param(&self, tape: &mut Tape, weights: &[f64], idx: usize) -> Var {
        let e = &self.entries[idx];
        tape.param(weights, e.offset, &e.shape)
    }
}

/// A network with a flat weight vector.
pub trait Model {
    fn layout(&self) -> &ParamLayout;
    fn weights(&self) -> &[f64];
    fn weights_mut(&mut self) -> &mut [f64];
    fn input_shape(&self) -> Vec<usize>;

    /// Records the forward pass for `weights` (not necessarily `self.weights()`).
    fn record(&self, tape: &mut Tape, weights: &[f64], input: Var) -> Result<Var, NnError>;

    fn n_weights(&self) -> usize {
        self.layout().len()
    }

    fn set_weights(&mut self, w: &[f64]) -> Result<(), NnError> {
        if w.len() != self.n_weights() {
            return Err(NnError::WeightCount {
                expected: self.n_weights(),
                found: w.len(),
            });
        }
        self.weights_mut().copy_from_slice(w);
        Ok(())
    }

    fn forward_pass_with(&self, weights: &[f64], input: &[f64]) -> Result<ForwardPass, NnError> {
        let mut tape = Tape::new();
        let x = tape.input(&self.input_shape(), input)?;
        let output = self.record(&mut tape, weights, x)?;
        Ok(ForwardPass {
            tape,
            output,
            n_weights: weights.len(),
        })
    }

    fn forward_pass(&self, input: &[f64]) -> Result<ForwardPass, NnError> {
        self.forward_pass_with(self.weights(), input)
    }

    fn forward(&self, input: &[f64]) -> Result<Vec<f64>, NnError> {
        Ok(self.forward_pass(input)?.output().to_vec())
    }
}

/// A recorded forward pass awaiting a cotangent.
#[derive(Clone, Debug)]
pub struct ForwardPass {
    tape: Tape,
    output: Var,
    n_weights: usize,
}

impl ForwardPass {
    pub fn output(&self) -> &[f64] {
        self.tape.value(self.output)
    }

    /// `∂(cotangent · output) / ∂weights`.
    pub fn backward(&self, cotangent: &[f64]) -> Result<Vec<f64>, NnError> {
        Ok(self.tape.backward(self.output, cotangent, self.n_weights)?.params)
    }
}

/// `(cnn_count, fc_count)` by walking the weight blocks; conv blocks are named
/// `conv*`, fully connected ones `fc*`.
pub fn count_params(model: &dyn Model) -> (usize, usize) {
    let layout = model.layout();
    (layout.count_matching("conv"), layout.count_matching("fc"))
}

/// Relative gradient error `|a − b| / max(|a|, |b|, floor)`.
pub fn relative_error(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

/// Maximum relative error between the analytic gradient returned by `f` and central
/// finite differences with step `h`. `f` returns `(value, gradient)`.
pub fn grad_check<F>(f: F, weights: &[f64], h: f64) -> f64
where
    F: Fn(&[f64]) -> (f64, Vec<f64>),
{
    grad_check_floor(f, weights, h, 1e-7)
}

/// [`grad_check`] with an explicit magnitude floor for near-zero components.
pub fn grad_check_floor<F>(f: F, weights: &[f64], h: f64, floor: f64) -> f64
where
    F: Fn(&[f64]) -> (f64, Vec<f64>),
{
    let (_, analytic) = f(weights);
    let mut w = weights.to_vec();
    let mut worst: f64 = 0.0;
    for i in 0..weights.len() {
        w[i] = weights[i] + h;
        let fp = f(&w).0;
        w[i] = weights[i] - h;
        let fm = f(&w).0;
        w[i] = weights[i];
        let fd = (fp - fm) / (2.0 * h);
        worst = worst.max(relative_error(analytic[i], fd, floor));
    }
    worst
}

/// Mean squared error and its gradient with respect to `pred`.
pub fn mse(pred: &[f64], target: &[f64]) -> (f64, Vec<f64>) {
    let n = pred.len() as f64;
    let loss = pred.iter().zip(target).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / n;
    let grad = pred.iter().zip(target).map(|(p, t)| 2.0 * (p - t) / n).collect();
    (loss, grad)
}
