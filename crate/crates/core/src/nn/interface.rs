use std::fmt;
use std::str::FromStr;

use super::{Model, NnError, ParamLayout, Tape, Var};
use crate::rng::Rng;

/// Input images are `[channels, 32, 32]` with the default three channels.
pub const IMAGE_SHAPE: [usize; 3] = [3, 32, 32];
const SIDE: usize = 32;

/// The three interface architectures.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum InterfaceKind {
    /// Shared CNN trunk, output for a single embedding layer.
    Ga,
    /// Shared CNN trunk, one output block per channel.
    Gb,
    /// Independent per-channel networks, outputs concatenated in channel order.
    Gc,
}

impl InterfaceKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Ga => "ga",
            Self::Gb => "gb",
            Self::Gc => "gc",
        }
    }
}

impl fmt::Display for InterfaceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for InterfaceKind {
    type Err = NnError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ga" => Ok(Self::Ga),
            "gb" => Ok(Self::Gb),
            "gc" => Ok(Self::Gc),
            other => Err(NnError::UnknownKind(other.to_string())),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Block {
    conv1: (usize, usize),
    conv2: (usize, usize),
    fc1: (usize, usize),
    fc2: (usize, usize),
}

/// Image → embedding-feature network.
///
/// GA/GB: `conv(n_c→2n_c)`, ReLU, pool4, `conv(2n_c→4n_c)`, ReLU, pool4, flatten
/// (`n_f = 16 n_c`), `FC(n_f→n_f)`, ReLU, `FC(n_f→out)` with no output activation.
/// GC runs the same chain with one input channel per colour and `n_f/n_c = 16`.
#[derive(Clone, Debug, PartialEq)]
pub struct InterfaceModel {
    kind: InterfaceKind,
    n_channels: usize,
    n_qubits: usize,
    p_unit: usize,
    layout: ParamLayout,
    blocks: Vec<Block>,
    weights: Vec<f64>,
}

impl InterfaceModel {
    /// Zero-initialised model; call [`InterfaceModel::init`] or set weights.
    pub fn zeros(kind: InterfaceKind, n_channels: usize, n_qubits: usize, p_unit: usize) -> Result<Self, NnError> {
        if n_channels == 0 || p_unit == 0 {
            return Err(NnError::Config(format!(
                "n_channels={n_channels} p_unit={p_unit} must be positive"
            )));
        }
        let mut layout = ParamLayout::new();
        let mut blocks = Vec::new();
        let c = n_channels;
        let mut block = |layout: &mut ParamLayout, prefix: &str, cin: usize, out: usize| {
            let conv1 = layout.add_layer(&format!("{prefix}conv1"), &[2 * cin, cin, 3, 3]);
            let conv2 = layout.add_layer(&format!("{prefix}conv2"), &[4 * cin, 2 * cin, 3, 3]);
            let nf = 16 * cin;
            let fc1 = layout.add_layer(&format!("{prefix}fc1"), &[nf, nf]);
            let fc2 = layout.add_layer(&format!("{prefix}fc2"), &[out, nf]);
            blocks.push(Block { conv1, conv2, fc1, fc2 });
        };
        match kind {
            InterfaceKind::Ga => block(&mut layout, "", c, p_unit),
            InterfaceKind::Gb => block(&mut layout, "", c, c * p_unit),
            InterfaceKind::Gc => {
                for ch in 0..c {
                    block(&mut layout, &format!("ch{ch}."), 1, p_unit);
                }
            }
        }
        let weights = vec![0.0; layout.len()];
        Ok(Self {
            kind,
            n_channels,
            n_qubits,
            p_unit,
            layout,
            blocks,
            weights,
        })
    }

    pub fn new(
        kind: InterfaceKind,
        n_channels: usize,
        n_qubits: usize,
        p_unit: usize,
        rng: &mut Rng,
    ) -> Result<Self, NnError> {
        let mut m = Self::zeros(kind, n_channels, n_qubits, p_unit)?;
        m.init(rng);
        Ok(m)
    }

    pub fn init(&mut self, rng: &mut Rng) {
        self.weights = self.layout.init(rng);
    }

    pub fn kind(&self) -> InterfaceKind {
        self.kind
    }

    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn p_unit(&self) -> usize {
        self.p_unit
    }

    /// `p_unit` for GA, `n_channels · p_unit` otherwise.
    pub fn output_dim(&self) -> usize {
        match self.kind {
            InterfaceKind::Ga => self.p_unit,
            _ => self.n_channels * self.p_unit,
        }
    }

    fn record_block(&self, tape: &mut Tape, w: &[f64], x: Var, b: &Block) -> Result<Var, NnError> {
        let l = &self.layout;
        let (k, bias) = (l.param(tape, w, b.conv1.0), l.param(tape, w, b.conv1.1));
        let h = tape.conv2d(x, k, bias)?;
        let h = tape.relu(h);
        let h = tape.maxpool4(h)?;
        let (k, bias) = (l.param(tape, w, b.conv2.0), l.param(tape, w, b.conv2.1));
        let h = tape.conv2d(h, k, bias)?;
        let h = tape.relu(h);
        let h = tape.maxpool4(h)?;
        let h = tape.flatten(h);
        let (m, bias) = (l.param(tape, w, b.fc1.0), l.param(tape, w, b.fc1.1));
        let h = tape.linear(h, m, bias)?;
        let h = tape.relu(h);
        let (m, bias) = (l.param(tape, w, b.fc2.0), l.param(tape, w, b.fc2.1));
        tape.linear(h, m, bias)
    }
}

impl Model for InterfaceModel {
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
        vec![self.n_channels, SIDE, SIDE]
    }

    fn record(&self, tape: &mut Tape, weights: &[f64], input: Var) -> Result<Var, NnError> {
        if tape.shape(input) != self.input_shape().as_slice() {
            return Err(NnError::Shape(format!(
                "interface expects {:?}, got {:?}",
                self.input_shape(),
                tape.shape(input)
            )));
        }
        match self.kind {
            InterfaceKind::Ga | InterfaceKind::Gb => self.record_block(tape, weights, input, &self.blocks[0]),
            InterfaceKind::Gc => {
                let plane = SIDE * SIDE;
                let mut outs = Vec::with_capacity(self.n_channels);
                for (ch, b) in self.blocks.iter().enumerate() {
                    let x = tape.slice(input, ch * plane, &[1, SIDE, SIDE])?;
                    outs.push(self.record_block(tape, weights, x, b)?);
                }
                Ok(tape.concat(&outs))
            }
        }
    }
}

/// Network output for one image.
pub fn forward_interface(model: &InterfaceModel, image: &[f64]) -> Result<Vec<f64>, NnError> {
    model.forward(image)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::count_params;
    use crate::rng::substream;

    fn image(seed: u64, c: usize) -> Vec<f64> {
        use rand::Rng as _;
        let mut r = substream(seed, "img");
        (0..c * SIDE * SIDE).map(|_| r.gen::<f64>()).collect()
    }

    #[test]
    fn reference_counts() {
        let nc = 3;
        for p in [8usize, 10] {
            let nf = 16 * nc;
            let ga = InterfaceModel::zeros(InterfaceKind::Ga, nc, 4, p).unwrap();
            assert_eq!(count_params(&ga), (90 * nc * nc + 6 * nc, nf * nf + nf + nf * p + p));
            let gb = InterfaceModel::zeros(InterfaceKind::Gb, nc, 4, p).unwrap();
            assert_eq!(count_params(&gb), (90 * nc * nc + 6 * nc, nf * nf + nf + nc * nf * p + nc * p));
            let gc = InterfaceModel::zeros(InterfaceKind::Gc, nc, 4, p).unwrap();
            assert_eq!(count_params(&gc), (96 * nc, nf * nf / nc + nf + nf * p + nc * p));
        }
        let ga = InterfaceModel::zeros(InterfaceKind::Ga, 3, 4, 8).unwrap();
        assert_eq!(count_params(&ga), (828, 2744));
        let gc = InterfaceModel::zeros(InterfaceKind::Gc, 3, 4, 8).unwrap();
        assert_eq!(gc.layout().count_matching("ch0.conv1"), 20);
        assert_eq!(gc.layout().count_matching("ch0.conv2"), 76);
    }

    #[test]
    fn output_lengths_and_zero_weights() {
        let img = image(1, 3);
        let ga = InterfaceModel::zeros(InterfaceKind::Ga, 3, 4, 8).unwrap();
        let out = forward_interface(&ga, &img).unwrap();
        assert_eq!(out, vec![0.0; 8]);
        let gc = InterfaceModel::new(InterfaceKind::Gc, 3, 4, 8, &mut substream(2, "w")).unwrap();
        assert_eq!(forward_interface(&gc, &img).unwrap().len(), 24);
        let gb = InterfaceModel::new(InterfaceKind::Gb, 3, 4, 10, &mut substream(2, "w")).unwrap();
        assert_eq!(forward_interface(&gb, &img).unwrap().len(), 30);
        assert!(forward_interface(&gb, &img[..100]).is_err());
    }

    #[test]
    fn gc_channel_equivariance() {
        let gc = InterfaceModel::new(InterfaceKind::Gc, 3, 4, 8, &mut substream(3, "w")).unwrap();
        let img = image(4, 3);
        let out = gc.forward(&img).unwrap();
        let perm = [2usize, 0, 1];
        let plane = SIDE * SIDE;
        let mut img_p = vec![0.0; img.len()];
        for (dst, &src) in perm.iter().enumerate() {
            img_p[dst * plane..(dst + 1) * plane].copy_from_slice(&img[src * plane..(src + 1) * plane]);
        }
        let block = gc.n_weights() / 3;
        let mut w_p = vec![0.0; gc.n_weights()];
        for (dst, &src) in perm.iter().enumerate() {
            w_p[dst * block..(dst + 1) * block].copy_from_slice(&gc.weights()[src * block..(src + 1) * block]);
        }
        let mut gcp = gc.clone();
        gcp.set_weights(&w_p).unwrap();
        let out_p = gcp.forward(&img_p).unwrap();
        for (dst, &src) in perm.iter().enumerate() {
            assert_eq!(&out_p[dst * 8..(dst + 1) * 8], &out[src * 8..(src + 1) * 8]);
        }
    }

    #[test]
    fn gradient_matches_finite_difference() {
        let ga = InterfaceModel::new(InterfaceKind::Ga, 3, 4, 8, &mut substream(5, "w")).unwrap();
        let img = image(6, 3);
        let cot: Vec<f64> = (0..8).map(|i| 0.3 * i as f64 - 1.0).collect();
        let f = |w: &[f64]| {
            let pass = ga.forward_pass_with(w, &img).unwrap();
            let v: f64 = pass.output().iter().zip(&cot).map(|(a, b)| a * b).sum();
            (v, pass.backward(&cot).unwrap())
        };
        // Subsample coordinates to keep the check fast.
        let w = ga.weights().to_vec();
        let (_, g) = f(&w);
        let h = 1e-5;
        for i in (0..w.len()).step_by(37) {
            let mut wp = w.clone();
            let mut wm = w.clone();
            wp[i] += h;
            wm[i] -= h;
            let fd = (f(&wp).0 - f(&wm).0) / (2.0 * h);
            assert!(crate::nn::relative_error(g[i], fd, 1e-6) < 1e-4, "w{i}: {} vs {fd}", g[i]);
        }
    }
}
