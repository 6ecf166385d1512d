use super::{mse, InterfaceKind, InterfaceModel, Model, NnError, ParamLayout, Tape, Var};
use crate::rng::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct DecoderBlock {
    fc1: (usize, usize),
    fc2: (usize, usize),
    conv1: (usize, usize),
    conv2: (usize, usize),
    channels: usize,
}

/// Convolutional autoencoder whose encoder is an interface network.
///
/// The decoder mirrors the encoder: `FC(latent→n_f)`, ReLU, `FC(n_f→n_f)`, ReLU,
/// reshape to `[4c, 2, 2]`, upsample ×4, `conv(4c→2c)`, ReLU, upsample ×4,
/// `conv(2c→c)` with a linear output. A GA encoder uses one decoder with `c = 3`; a
/// GC encoder gets one decoder per channel (`c = 1`), fed by that channel's latent block.
#[derive(Clone, Debug, PartialEq)]
pub struct AutoencoderModel {
    encoder: InterfaceModel,
    layout: ParamLayout,
    decoders: Vec<DecoderBlock>,
    weights: Vec<f64>,
}

impl AutoencoderModel {
    /// `latent_per_block` is 8 in the reference setting (8 total for GA, 24 for GC).
    pub fn zeros(kind: InterfaceKind, n_channels: usize, latent_per_block: usize) -> Result<Self, NnError> {
        if kind == InterfaceKind::Gb {
            return Err(NnError::Config("autoencoder encoders are ga or gc".into()));
        }
        let encoder = InterfaceModel::zeros(kind, n_channels, 0, latent_per_block)?;
        let mut layout = encoder.layout().clone();
        let (blocks, c) = match kind {
            InterfaceKind::Ga => (1, n_channels),
            _ => (n_channels, 1),
        };
        let mut decoders = Vec::new();
        for b in 0..blocks {
            let p = if blocks == 1 { "dec.".to_string() } else { format!("dec.ch{b}.") };
            let nf = 16 * c;
            decoders.push(DecoderBlock {
                fc1: layout.add_layer(&format!("{p}fc1"), &[nf, latent_per_block]),
                fc2: layout.add_layer(&format!("{p}fc2"), &[nf, nf]),
                conv1: layout.add_layer(&format!("{p}conv1"), &[2 * c, 4 * c, 3, 3]),
                conv2: layout.add_layer(&format!("{p}conv2"), &[c, 2 * c, 3, 3]),
                channels: c,
            });
        }
        let weights = vec![0.0; layout.len()];
        Ok(Self {
            encoder,
            layout,
            decoders,
            weights,
        })
    }

    pub fn new(kind: InterfaceKind, n_channels: usize, latent_per_block: usize, rng: &mut Rng) -> Result<Self, NnError> {
        let mut m = Self::zeros(kind, n_channels, latent_per_block)?;
        m.weights = m.layout.init(rng);
        Ok(m)
    }

    pub fn latent_dim(&self) -> usize {
        self.encoder.output_dim()
    }

    /// The encoder with the current weights.
    pub fn encoder(&self) -> InterfaceModel {
        let mut e = self.encoder.clone();
        let n = e.n_weights();
        e.set_weights(&self.weights[..n]).expect("encoder prefix");
        e
    }

    pub fn encode(&self, image: &[f64]) -> Result<Vec<f64>, NnError> {
        self.encoder().forward(image)
    }

    fn record_decoder(&self, tape: &mut Tape, w: &[f64], z: Var, d: &DecoderBlock) -> Result<Var, NnError> {
        let l = &self.layout;
        let c = d.channels;
        let (m, b) = (l.param(tape, w, d.fc1.0), l.param(tape, w, d.fc1.1));
        let h = tape.linear(z, m, b)?;
        let h = tape.relu(h);
        let (m, b) = (l.param(tape, w, d.fc2.0), l.param(tape, w, d.fc2.1));
        let h = tape.linear(h, m, b)?;
        let h = tape.relu(h);
        let h = tape.reshape(h, &[4 * c, 2, 2])?;
        let h = tape.upsample4(h)?;
        let (k, b) = (l.param(tape, w, d.conv1.0), l.param(tape, w, d.conv1.1));
        let h = tape.conv2d(h, k, b)?;
        let h = tape.relu(h);
        let h = tape.upsample4(h)?;
        let (k, b) = (l.param(tape, w, d.conv2.0), l.param(tape, w, d.conv2.1));
        tape.conv2d(h, k, b)
    }
}

impl Model for AutoencoderModel {
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
        self.encoder.input_shape()
    }

    fn record(&self, tape: &mut Tape, weights: &[f64], input: Var) -> Result<Var, NnError> {
        let z = self.encoder.record(tape, weights, input)?;
        if self.decoders.len() == 1 {
            let out = self.record_decoder(tape, weights, z, &self.decoders[0])?;
            return Ok(tape.flatten(out));
        }
        let per = self.encoder.p_unit();
        let mut outs = Vec::with_capacity(self.decoders.len());
        for (b, d) in self.decoders.iter().enumerate() {
            let zb = tape.slice(z, b * per, &[per])?;
            outs.push(self.record_decoder(tape, weights, zb, d)?);
        }
        Ok(tape.concat(&outs))
    }
}

/// Reconstruction, mean squared pixel error and its weight gradient.
pub fn autoencoder_step(model: &AutoencoderModel, image: &[f64]) -> Result<(Vec<f64>, f64, Vec<f64>), NnError> {
    let pass = model.forward_pass(image)?;
    let recon = pass.output().to_vec();
    let (loss, g) = mse(&recon, image);
    let grad = pass.backward(&g)?;
    Ok((recon, loss, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use rand::Rng as _;

    fn image(seed: u64) -> Vec<f64> {
        let mut r = substream(seed, "img");
        (0..3 * 32 * 32).map(|_| r.gen::<f64>()).collect()
    }

    #[test]
    fn shapes() {
        let ga = AutoencoderModel::new(InterfaceKind::Ga, 3, 8, &mut substream(1, "ae")).unwrap();
        assert_eq!(ga.latent_dim(), 8);
        assert_eq!(ga.forward(&image(2)).unwrap().len(), 3 * 32 * 32);
        let gc = AutoencoderModel::new(InterfaceKind::Gc, 3, 8, &mut substream(1, "ae")).unwrap();
        assert_eq!(gc.latent_dim(), 24);
        assert_eq!(gc.encode(&image(2)).unwrap().len(), 24);
        assert_eq!(gc.forward(&image(2)).unwrap().len(), 3 * 32 * 32);
        assert!(AutoencoderModel::zeros(InterfaceKind::Gb, 3, 8).is_err());
    }

    #[test]
    fn zero_decoder_mse_is_mean_square() {
        let ae = AutoencoderModel::zeros(InterfaceKind::Ga, 3, 8).unwrap();
        let img = image(3);
        let (_, loss, _) = autoencoder_step(&ae, &img).unwrap();
        let m = img.iter().map(|x| x * x).sum::<f64>() / img.len() as f64;
        assert!((loss - m).abs() < 1e-12);
    }

    #[test]
    fn constant_image_exact_via_bias() {
        let mut ae = AutoencoderModel::zeros(InterfaceKind::Ga, 3, 8).unwrap();
        let img = vec![0.4; 3 * 32 * 32];
        let last = ae.layout().entries().iter().position(|e| e.name == "dec.conv2.bias").unwrap();
        let off = ae.layout().entries()[last].offset;
        ae.weights_mut()[off..off + 3].copy_from_slice(&[0.4; 3]);
        let (_, loss, _) = autoencoder_step(&ae, &img).unwrap();
        assert!(loss < 1e-20);
    }
}
