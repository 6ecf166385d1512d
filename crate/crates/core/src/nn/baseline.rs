use std::fmt;
use std::str::FromStr;

use super::{Model, NnError, ParamLayout, Tape, Var};
use crate::rng::Rng;

/// Classical heads evaluated on frozen interface features.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BaselineKind {
    /// `Linear(8,2)`.
    Linear8,
    /// `Linear(8,1) → ReLU → Linear(1,2)`.
    Mlp8,
    /// `CNN1D(k=6) → ReLU → Linear(3,2)`.
    Cnn8,
    /// `Linear(24,2)`.
    Linear24,
    /// `Linear(24,1) → ReLU → Linear(1,2)`.
    Mlp24,
    /// `CNN1D(k=3,s=3) → ReLU → CNN1D(k=2,s=2) → ReLU → CNN1D(k=2) → ReLU → Linear(3,2)`.
    Cnn24,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 6] = [
        Self::Linear8,
        Self::Mlp8,
        Self::Cnn8,
        Self::Linear24,
        Self::Mlp24,
        Self::Cnn24,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Linear8 => "linear8",
            Self::Mlp8 => "mlp8",
            Self::Cnn8 => "cnn1d8",
            Self::Linear24 => "linear24",
            Self::Mlp24 => "mlp24",
            Self::Cnn24 => "cnn1d24",
        }
    }

    pub fn input_len(self) -> usize {
        match self {
            Self::Linear8 | Self::Mlp8 | Self::Cnn8 => 8,
            _ => 24,
        }
    }

    /// `(kernel, stride)` per 1-D convolution.
    fn conv_chain(self) -> &'static [(usize, usize)] {
        match self {
            Self::Cnn8 => &[(6, 1)],
            Self::Cnn24 => &[(3, 3), (2, 2), (2, 1)],
            _ => &[],
        }
    }
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BaselineKind {
    type Err = NnError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| NnError::UnknownKind(s.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BaselineHead {
    kind: BaselineKind,
    layout: ParamLayout,
    layers: Vec<(usize, usize)>,
    weights: Vec<f64>,
}

impl BaselineHead {
    pub fn zeros(kind: BaselineKind) -> Self {
        let mut layout = ParamLayout::new();
        let mut layers = Vec::new();
        let n = kind.input_len();
        match kind {
            BaselineKind::Linear8 | BaselineKind::Linear24 => {
                layers.push(layout.add_layer("fc1", &[2, n]));
            }
            BaselineKind::Mlp8 | BaselineKind::Mlp24 => {
                layers.push(layout.add_layer("fc1", &[1, n]));
                layers.push(layout.add_layer("fc2", &[2, 1]));
            }
            BaselineKind::Cnn8 | BaselineKind::Cnn24 => {
                let mut len = n;
                for (i, &(k, s)) in kind.conv_chain().iter().enumerate() {
                    layers.push(layout.add_layer(&format!("conv{}", i + 1), &[1, 1, k]));
                    len = (len - k) / s + 1;
                }
                layers.push(layout.add_layer("fc1", &[2, len]));
            }
        }
        let weights = vec![0.0; layout.len()];
        Self {
            kind,
            layout,
            layers,
            weights,
        }
    }

    pub fn new(kind: BaselineKind, rng: &mut Rng) -> Self {
        let mut h = Self::zeros(kind);
        h.weights = h.layout.init(rng);
        h
    }

    pub fn kind(&self) -> BaselineKind {
        self.kind
    }
}

impl Model for BaselineHead {
    fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    fn weights(&self) -> &[f64] {
        &self.weights
    }

    fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    fn input_shape(&self) -> Vec<usize> {
        vec![self.kind.input_len()]
    }

    fn record(&self, tape: &mut Tape, w: &[f64], input: Var) -> Result<Var, NnError> {
        if tape.value(input).len() != self.kind.input_len() {
            return Err(NnError::Shape(format!(
                "{} expects {} features, got {}",
                self.kind,
                self.kind.input_len(),
                tape.value(input).len()
            )));
        }
        let l = &self.layout;
        let mut h = input;
        let convs = self.kind.conv_chain();
        for (i, &(wi, bi)) in self.layers.iter().enumerate() {
            let (wv, bv) = (l.param(tape, w, wi), l.param(tape, w, bi));
            let last = i + 1 == self.layers.len();
            if i < convs.len() {
                let k = tape.reshape(wv, &[convs[i].0])?;
                h = tape.conv1d(h, k, bv, convs[i].1)?;
            } else {
                h = tape.linear(h, wv, bv)?;
            }
            if !last {
                h = tape.relu(h);
            }
        }
        Ok(h)
    }
}

/// Logits of length 2.
pub fn forward_baseline(head: &BaselineHead, features: &[f64]) -> Result<Vec<f64>, NnError> {
    head.forward(features)
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|&z| (z - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// `-log softmax(logits)[label]` and its gradient.
pub fn softmax_cross_entropy(logits: &[f64], label: usize) -> (f64, Vec<f64>) {
    let p = softmax(logits);
    let loss = -p[label].max(1e-300).ln();
    let mut g = p;
    g[label] -= 1.0;
    (loss, g)
}
