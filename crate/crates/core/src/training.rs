//! Two-stage optimization: interface weights against the pairwise embedding loss, then
//! QCNN angles against the classification loss. Also the classical-head and
//! autoencoder baselines.

use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ansatz::{build_qcnn, predict_label, qcnn_predict_with_grad, AnsatzError, QcnnSpec};
use crate::data::DatasetSplit;
use crate::embeddings::{unit_param_count, EmbeddingError, EmbeddingSpec, FeatureMapKind};
use crate::losses::{similarity_with_grad, LossError, Pair, PairBatch, SimilarityKind};
use crate::metrics::{
    classification_report, helstrom_optimal_accuracy, mean_density, trace_distance, ClassificationReport,
    EnsemblePair, MetricError,
};
use crate::nn::{
    autoencoder_step, softmax_cross_entropy, AutoencoderModel, BaselineHead, BaselineKind, InterfaceKind,
    InterfaceModel, Model, NnError,
};
use crate::noise::{noisy_embed, noisy_fidelity_with_grad, noisy_qcnn_predict_with_grad, NoiseError, NoiseModel};
use crate::qsim::{to_density, DensityMatrix, StateVector};
use crate::rng::{substream, Rng};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("{phase} run {run_id} diverged at step {step} (loss {loss})")]
    Diverged {
        phase: &'static str,
        run_id: usize,
        step: usize,
        loss: f64,
    },
    #[error("median selection needs an odd number of runs, got {0}")]
    EvenRuns(usize),
    #[error("need at least {needed} samples, got {found}")]
    TooFewSamples { needed: usize, found: usize },
    #[error("parameter and gradient lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Noise(#[from] NoiseError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Ansatz(#[from] AnsatzError),
}

/// Serde adapter for the enum kinds that already round-trip through `Display`/`FromStr`.
pub(crate) mod by_name {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::fmt::Display;
    use std::str::FromStr;

    pub fn serialize<T: Display, S: Serializer>(v: &T, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(v)
    }

    pub fn deserialize<'de, T, D>(d: D) -> Result<T, D::Error>
    where
        T: FromStr,
        T::Err: Display,
        D: Deserializer<'de>,
    {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

// ---- Adam ----

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }
}

/// Bias-corrected Adam update in place.
pub fn adam_step(state: &mut AdamState, params: &mut [f64], grads: &[f64], lr: f64) -> Result<(), TrainError> {
    if params.len() != grads.len() {
        return Err(TrainError::LengthMismatch(params.len(), grads.len()));
    }
    if state.m.len() != params.len() {
        return Err(TrainError::LengthMismatch(state.m.len(), params.len()));
    }
    state.t += 1;
    let t = state.t as i32;
    let (c1, c2) = (1.0 - ADAM_BETA1.powi(t), 1.0 - ADAM_BETA2.powi(t));
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = ADAM_BETA1 * state.m[i] + (1.0 - ADAM_BETA1) * g;
        state.v[i] = ADAM_BETA2 * state.v[i] + (1.0 - ADAM_BETA2) * g * g;
        let (mh, vh) = (state.m[i] / c1, state.v[i] / c2);
        params[i] -= lr * mh / (vh.sqrt() + ADAM_EPS);
    }
    Ok(())
}

// ---- configuration ----

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub cnqe_batch_pairs: usize,
    /// Iteration budget; the checkpoint with the best test trace distance is kept.
    pub cnqe_iterations: usize,
    /// Test trace distance is evaluated every this many iterations.
    pub eval_every: usize,
    pub qcnn_batch: usize,
    pub qcnn_epochs: usize,
    pub n_runs: usize,
    pub seed: u64,
    #[serde(with = "by_name")]
    pub loss_kind: SimilarityKind,
    #[serde(with = "by_name")]
    pub feature_map: FeatureMapKind,
    #[serde(with = "by_name")]
    pub interface: InterfaceKind,
    pub n_qubits: usize,
    pub n_channels: usize,
    pub qcnn: QcnnSpec,
    /// Set from the experiment's noise block rather than serialized here.
    #[serde(skip)]
    pub noise: Option<NoiseModel>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            cnqe_batch_pairs: 25,
            cnqe_iterations: 2000,
            eval_every: 50,
            qcnn_batch: 5,
            qcnn_epochs: 20,
            n_runs: 5,
            seed: 0,
            loss_kind: SimilarityKind::Fidelity,
            feature_map: FeatureMapKind::NcxUnit,
            interface: InterfaceKind::Ga,
            n_qubits: 4,
            n_channels: 3,
            qcnn: QcnnSpec::default(),
            noise: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: String| Err(TrainError::Config(m));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate {} must be positive", self.learning_rate));
        }
        for (name, v) in [
            ("cnqe_batch_pairs", self.cnqe_batch_pairs),
            ("eval_every", self.eval_every),
            ("qcnn_batch", self.qcnn_batch),
            ("n_runs", self.n_runs),
            ("n_qubits", self.n_qubits),
            ("n_channels", self.n_channels),
        ] {
            if v == 0 {
                return bad(format!("{name} must be positive"));
            }
        }
        if self.n_runs % 2 == 0 {
            return bad(format!("n_runs {} must be odd for median selection", self.n_runs));
        }
        let stack = self.feature_map.is_stack();
        match (self.interface, stack) {
            (InterfaceKind::Ga, true) => return bad(format!("ga pairs with unit maps, not {}", self.feature_map)),
            (InterfaceKind::Gb | InterfaceKind::Gc, false) => {
                return bad(format!("{} pairs with stacked maps, not {}", self.interface, self.feature_map))
            }
            _ => {}
        }
        if stack && self.n_channels != self.feature_map.layers().len() {
            return bad(format!(
                "{} has {} layers but the interface emits {} channel blocks",
                self.feature_map,
                self.feature_map.layers().len(),
                self.n_channels
            ));
        }
        EmbeddingSpec::new(self.feature_map, self.n_qubits)?;
        if self.qcnn.n_qubits != self.n_qubits {
            return bad(format!("qcnn acts on {} qubits, embedding on {}", self.qcnn.n_qubits, self.n_qubits));
        }
        self.qcnn.validate()?;
        if let Some(m) = &self.noise {
            m.validate()?;
            if self.loss_kind != SimilarityKind::Fidelity {
                return bad("noisy training supports the fidelity loss only".into());
            }
        }
        Ok(())
    }

    pub fn embedding(&self) -> Result<EmbeddingSpec, TrainError> {
        Ok(EmbeddingSpec::new(self.feature_map, self.n_qubits)?)
    }

    /// Features per embedding layer.
    pub fn p_unit(&self) -> Result<usize, TrainError> {
        let unit = if self.feature_map.is_stack() {
            self.feature_map.layers()[0]
        } else {
            self.feature_map
        };
        Ok(unit_param_count(unit, self.n_qubits)?)
    }

    pub fn new_interface(&self, rng: &mut Rng) -> Result<InterfaceModel, TrainError> {
        Ok(InterfaceModel::new(self.interface, self.n_channels, self.n_qubits, self.p_unit()?, rng)?)
    }
}

// ---- records ----

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub phase: String,
    pub run_id: usize,
    pub step: usize,
    pub metric: String,
    pub value: f64,
}

fn entry(phase: &str, run_id: usize, step: usize, metric: &str, value: f64) -> HistoryEntry {
    HistoryEntry {
        phase: phase.to_string(),
        run_id,
        step,
        metric: metric.to_string(),
        value,
    }
}

/// One interface-training run.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainRun {
    pub run_id: usize,
    pub seed: u64,
    /// Weights at `best_step`.
    pub weights: Vec<f64>,
    pub best_step: usize,
    pub test_trace_distance: f64,
    pub history: Vec<HistoryEntry>,
}

/// One classifier-training run on frozen features.
#[derive(Clone, Debug, PartialEq)]
pub struct QcnnRun {
    pub run_id: usize,
    pub seed: u64,
    pub theta: Vec<f64>,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub test_report: ClassificationReport,
    /// Mean probability of the correct outcome over the training set.
    pub train_success_probability: f64,
    /// Optimal accuracy for the embedded training ensemble.
    pub train_helstrom_accuracy: f64,
    pub train_trace_distance: f64,
    pub history: Vec<HistoryEntry>,
}

// ---- pair sampling and embedding evaluation ----

/// `k` ordered pairs `i ≠ j` drawn uniformly with replacement.
pub fn sample_pairs(labels: &[u8], k: usize, rng: &mut Rng) -> Result<PairBatch, TrainError> {
    let n = labels.len();
    if n < 2 {
        return Err(TrainError::TooFewSamples { needed: 2, found: n });
    }
    let pairs = (0..k)
        .map(|_| {
            let i = rng.gen_range(0..n);
            let mut j = rng.gen_range(0..n - 1);
            if j >= i {
                j += 1;
            }
            Pair {
                i,
                j,
                delta: u8::from(labels[i] == labels[j]),
            }
        })
        .collect();
    Ok(PairBatch::new(pairs)?)
}

/// Interface outputs for every image.
pub fn compute_features<M: Model + Sync + ?Sized>(model: &M, weights: &[f64], images: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, TrainError> {
    images
        .par_iter()
        .map(|img| Ok(model.forward_pass_with(weights, img)?.output().to_vec()))
        .collect()
}

/// Embedded states, pure or prepared under noise.
#[derive(Clone, Debug, PartialEq)]
pub enum EmbeddedSet {
    Pure(Vec<StateVector>),
    Mixed(Vec<DensityMatrix>),
}

impl EmbeddedSet {
    pub fn len(&self) -> usize {
        match self {
            Self::Pure(v) => v.len(),
            Self::Mixed(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Mean state of the samples carrying `class`.
    pub fn class_mean(&self, labels: &[u8], class: u8) -> Result<DensityMatrix, TrainError> {
        let idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if idx.is_empty() {
            return Err(MetricError::EmptyClass(class).into());
        }
        match self {
            Self::Pure(v) => Ok(mean_density(&idx.iter().map(|&i| v[i].clone()).collect::<Vec<_>>())?),
            Self::Mixed(v) => {
                let dim = v[0].dim();
                let mut acc = crate::qsim::CMatrix::zeros(dim, dim);
                for &i in &idx {
                    acc = acc.add(v[i].entries());
                }
                let m = acc.scale(crate::C64::new(1.0 / idx.len() as f64, 0.0));
                Ok(DensityMatrix::from_matrix_unchecked(m))
            }
        }
    }

    pub fn ensemble(&self, labels: &[u8]) -> Result<EnsemblePair, TrainError> {
        let ones = labels.iter().filter(|&&l| l == 1).count() as f64;
        let q_plus = ones / labels.len() as f64;
        Ok(EnsemblePair::new(
            self.class_mean(labels, 1)?,
            self.class_mean(labels, 0)?,
            q_plus,
            1.0 - q_plus,
        )?)
    }
}

pub fn embed_all(spec: &EmbeddingSpec, features: &[Vec<f64>], noise: Option<&NoiseModel>) -> Result<EmbeddedSet, TrainError> {
    Ok(match noise {
        None => EmbeddedSet::Pure(
            features
                .par_iter()
                .map(|f| spec.embed_state(f))
                .collect::<Result<Vec<_>, _>>()?,
        ),
        Some(m) => EmbeddedSet::Mixed(
            features
                .par_iter()
                .map(|f| noisy_embed(spec, m, f))
                .collect::<Result<Vec<_>, _>>()?,
        ),
    })
}

/// Prior-free trace distance between the class-mean embedded states.
pub fn ensemble_trace_distance(
    spec: &EmbeddingSpec,
    features: &[Vec<f64>],
    labels: &[u8],
    noise: Option<&NoiseModel>,
) -> Result<f64, TrainError> {
    let set = embed_all(spec, features, noise)?;
    Ok(trace_distance(&set.ensemble(labels)?)?)
}

// ---- stage one ----

/// Pairwise loss and its gradient with respect to the interface weights.
pub fn cnqe_loss_and_grad(
    config: &TrainConfig,
    spec: &EmbeddingSpec,
    model: &InterfaceModel,
    weights: &[f64],
    images: &[Vec<f64>],
    batch: &PairBatch,
) -> Result<(f64, Vec<f64>), TrainError> {
    let mut used: Vec<usize> = batch.pairs().iter().flat_map(|p| [p.i, p.j]).collect();
    used.sort_unstable();
    used.dedup();
    let slot = |i: usize| used.binary_search(&i).expect("index in batch");
    let passes = used
        .par_iter()
        .map(|&i| model.forward_pass_with(weights, &images[i]))
        .collect::<Result<Vec<_>, _>>()?;
    let sims = batch
        .pairs()
        .par_iter()
        .map(|p| {
            let (f1, f2) = (passes[slot(p.i)].output(), passes[slot(p.j)].output());
            match &config.noise {
                None => Ok(similarity_with_grad(config.loss_kind, spec, f1, f2)?),
                Some(m) => Ok(noisy_fidelity_with_grad(spec, m, f1, f2)?),
            }
        })
        .collect::<Result<Vec<_>, TrainError>>()?;
    let k = batch.len() as f64;
    let dim = passes[0].output().len();
    let mut cot = vec![vec![0.0; dim]; used.len()];
    let mut loss = 0.0;
    for (p, s) in batch.pairs().iter().zip(&sims) {
        let r = s.value - f64::from(p.delta);
        loss += r * r / k;
        let w = 2.0 * r / k;
        for (c, g) in cot[slot(p.i)].iter_mut().zip(&s.grad1) {
            *c += w * g;
        }
        for (c, g) in cot[slot(p.j)].iter_mut().zip(&s.grad2) {
            *c += w * g;
        }
    }
    let grads = passes
        .par_iter()
        .zip(&cot)
        .map(|(pass, c)| pass.backward(c))
        .collect::<Result<Vec<_>, _>>()?;
    let mut total = vec![0.0; weights.len()];
    for g in grads {
        for (t, v) in total.iter_mut().zip(g) {
            *t += v;
        }
    }
    Ok((loss, total))
}

fn run_seed(config: &TrainConfig, run_id: usize) -> u64 {
    config.seed.wrapping_add(run_id as u64)
}

/// One interface-training run; see [`cnqe_train`].
pub fn cnqe_train_run(config: &TrainConfig, data: &DatasetSplit, run_id: usize) -> Result<TrainRun, TrainError> {
    config.validate()?;
    let spec = config.embedding()?;
    let seed = run_seed(config, run_id);
    let mut model = config.new_interface(&mut substream(seed, "cnqe.init"))?;
    let mut pair_rng = substream(seed, "cnqe.pairs");
    let (train_x, train_y) = (data.train_images(), data.train_labels());
    let (test_x, test_y) = (data.test_images(), data.test_labels());
    let noise = config.noise.as_ref();
    let mut weights = model.weights().to_vec();
    let mut adam = AdamState::new(weights.len());
    let mut history = Vec::new();

    let eval = |w: &[f64]| -> Result<f64, TrainError> {
        let feats = compute_features(&model, w, &test_x)?;
        ensemble_trace_distance(&spec, &feats, &test_y, noise)
    };
    let mut best = (0usize, eval(&weights)?, weights.clone());
    history.push(entry("cnqe", run_id, 0, "test_trace_distance", best.1));

    for step in 1..=config.cnqe_iterations {
        let batch = sample_pairs(&train_y, config.cnqe_batch_pairs, &mut pair_rng)?;
        let (loss, grad) = cnqe_loss_and_grad(config, &spec, &model, &weights, &train_x, &batch)?;
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(TrainError::Diverged {
                phase: "cnqe",
                run_id,
                step,
                loss,
            });
        }
        history.push(entry("cnqe", run_id, step, "nqe_loss", loss));
        adam_step(&mut adam, &mut weights, &grad, config.learning_rate)?;
        if step % config.eval_every == 0 || step == config.cnqe_iterations {
            let d = eval(&weights)?;
            history.push(entry("cnqe", run_id, step, "test_trace_distance", d));
            if d > best.1 {
                best = (step, d, weights.clone());
            }
        }
    }
    model.set_weights(&best.2)?;
    Ok(TrainRun {
        run_id,
        seed,
        weights: best.2,
        best_step: best.0,
        test_trace_distance: best.1,
        history,
    })
}

/// `n_runs` independent interface-training runs, executed in parallel. Run `r` uses
/// seed `config.seed + r`.
pub fn cnqe_train(config: &TrainConfig, data: &DatasetSplit) -> Result<Vec<TrainRun>, TrainError> {
    config.validate()?;
    (0..config.n_runs)
        .into_par_iter()
        .map(|r| cnqe_train_run(config, data, r))
        .collect()
}

/// Run with the median final test trace distance; ties go to the lowest `run_id`.
pub fn select_median_run(runs: &[TrainRun]) -> Result<&TrainRun, TrainError> {
    if runs.len() % 2 == 0 {
        return Err(TrainError::EvenRuns(runs.len()));
    }
    let mut d: Vec<f64> = runs.iter().map(|r| r.test_trace_distance).collect();
    d.sort_by(f64::total_cmp);
    let median = d[d.len() / 2];
    Ok(runs
        .iter()
        .filter(|r| r.test_trace_distance == median)
        .min_by_key(|r| r.run_id)
        .expect("median is attained"))
}

// ---- stage two ----

fn predict_with_grad(
    config: &TrainConfig,
    set: &EmbeddedSet,
    i: usize,
    theta: &[f64],
) -> Result<(f64, Vec<f64>), TrainError> {
    match (set, &config.noise) {
        (EmbeddedSet::Pure(v), None) => Ok(qcnn_predict_with_grad(&config.qcnn, theta, &v[i])?),
        (EmbeddedSet::Pure(v), Some(m)) => Ok(noisy_qcnn_predict_with_grad(&config.qcnn, theta, &to_density(&v[i]), m)?),
        (EmbeddedSet::Mixed(v), Some(m)) => Ok(noisy_qcnn_predict_with_grad(&config.qcnn, theta, &v[i], m)?),
        (EmbeddedSet::Mixed(v), None) => Ok(noisy_qcnn_predict_with_grad(&config.qcnn, theta, &v[i], &NoiseModel::noiseless())?),
    }
}

fn predict_all(config: &TrainConfig, set: &EmbeddedSet, theta: &[f64]) -> Result<Vec<f64>, TrainError> {
    (0..set.len())
        .into_par_iter()
        .map(|i| Ok(predict_with_grad(config, set, i, theta)?.0))
        .collect()
}

fn accuracy_of(p: &[f64], labels: &[u8]) -> Result<ClassificationReport, TrainError> {
    let pred: Vec<u8> = p.iter().map(|&v| predict_label(v)).collect();
    Ok(classification_report(&pred, labels)?)
}

/// Trains QCNN angles on fixed embedded states. `θ` starts uniform in `[0, 2π)`; each
/// epoch reshuffles the training set and takes Adam steps on mini-batch MSE.
pub fn qcnn_train_embedded(
    config: &TrainConfig,
    train: &EmbeddedSet,
    train_labels: &[u8],
    test: &EmbeddedSet,
    test_labels: &[u8],
    run_id: usize,
) -> Result<QcnnRun, TrainError> {
    if train.len() != train_labels.len() || test.len() != test_labels.len() {
        return Err(TrainError::LengthMismatch(train.len(), train_labels.len()));
    }
    if train.is_empty() || test.is_empty() {
        return Err(TrainError::TooFewSamples { needed: 1, found: 0 });
    }
    let seed = run_seed(config, run_id);
    let n_params = config.qcnn.total_params();
    let mut init = substream(seed, "qcnn.init");
    let mut theta: Vec<f64> = (0..n_params).map(|_| init.gen_range(0.0..std::f64::consts::TAU)).collect();
    build_qcnn(&config.qcnn, &theta)?;
    let mut order_rng = substream(seed, "qcnn.shuffle");
    let mut adam = AdamState::new(n_params);
    let mut history = Vec::new();
    let mut order: Vec<usize> = (0..train.len()).collect();

    let test_acc = |theta: &[f64]| -> Result<ClassificationReport, TrainError> { accuracy_of(&predict_all(config, test, theta)?, test_labels) };
    history.push(entry("qcnn", run_id, 0, "test_accuracy", test_acc(&theta)?.accuracy));
    let mut step = 0usize;
    for epoch in 1..=config.qcnn_epochs {
        order.shuffle(&mut order_rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(config.qcnn_batch) {
            step += 1;
            let outs = chunk
                .par_iter()
                .map(|&i| predict_with_grad(config, train, i, &theta))
                .collect::<Result<Vec<_>, _>>()?;
            let b = chunk.len() as f64;
            let mut loss = 0.0;
            let mut grad = vec![0.0; n_params];
            for (&i, (p, g)) in chunk.iter().zip(&outs) {
                let r = p - f64::from(train_labels[i]);
                loss += r * r / b;
                for (t, gi) in grad.iter_mut().zip(g) {
                    *t += 2.0 * r * gi / b;
                }
            }
            if !loss.is_finite() {
                return Err(TrainError::Diverged {
                    phase: "qcnn",
                    run_id,
                    step,
                    loss,
                });
            }
            epoch_loss += loss * b / train.len() as f64;
            adam_step(&mut adam, &mut theta, &grad, config.learning_rate)?;
        }
        history.push(entry("qcnn", run_id, epoch, "vqa_loss", epoch_loss));
        history.push(entry("qcnn", run_id, epoch, "test_accuracy", test_acc(&theta)?.accuracy));
    }
    let train_p = predict_all(config, train, &theta)?;
    let train_report = accuracy_of(&train_p, train_labels)?;
    let success = train_p
        .iter()
        .zip(train_labels)
        .map(|(&p, &y)| if y == 1 { p } else { 1.0 - p })
        .sum::<f64>()
        / train_p.len() as f64;
    let ensemble = train.ensemble(train_labels)?;
    let test_report = test_acc(&theta)?;
    Ok(QcnnRun {
        run_id,
        seed,
        theta,
        train_accuracy: train_report.accuracy,
        test_accuracy: test_report.accuracy,
        test_report,
        train_success_probability: success,
        train_helstrom_accuracy: helstrom_optimal_accuracy(&ensemble)?,
        train_trace_distance: trace_distance(&ensemble)?,
        history,
    })
}

/// QCNN runs on features from a frozen feature extractor; runs execute in parallel.
pub fn qcnn_train_features(
    config: &TrainConfig,
    train_features: &[Vec<f64>],
    train_labels: &[u8],
    test_features: &[Vec<f64>],
    test_labels: &[u8],
    n_runs: usize,
) -> Result<Vec<QcnnRun>, TrainError> {
    let spec = config.embedding()?;
    let noise = config.noise.as_ref();
    let train = embed_all(&spec, train_features, noise)?;
    let test = embed_all(&spec, test_features, noise)?;
    (0..n_runs)
        .into_par_iter()
        .map(|r| qcnn_train_embedded(config, &train, train_labels, &test, test_labels, r))
        .collect()
}

/// QCNN runs with the interface weights frozen at `weights`.
pub fn qcnn_train(
    config: &TrainConfig,
    data: &DatasetSplit,
    interface: &InterfaceModel,
    weights: &[f64],
) -> Result<Vec<QcnnRun>, TrainError> {
    config.validate()?;
    let train_f = compute_features(interface, weights, &data.train_images())?;
    let test_f = compute_features(interface, weights, &data.test_images())?;
    qcnn_train_features(config, &train_f, &data.train_labels(), &test_f, &data.test_labels(), config.n_runs)
}

// ---- baselines ----

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch: usize,
    /// Autoencoder iterations.
    pub ae_iterations: usize,
    pub ae_batch: usize,
    /// Latent features per autoencoder block.
    pub ae_latent: usize,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            epochs: 50,
            batch: 25,
            ae_iterations: 2000,
            ae_batch: 25,
            ae_latent: 8,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BaselineRun {
    pub run_id: usize,
    pub kind: BaselineKind,
    pub n_params: usize,
    pub weights: Vec<f64>,
    pub train_accuracy: f64,
    pub test_report: ClassificationReport,
    pub history: Vec<HistoryEntry>,
}

fn head_predictions(head: &BaselineHead, x: &[Vec<f64>]) -> Result<Vec<u8>, TrainError> {
    x.par_iter()
        .map(|f| {
            let z = head.forward(f)?;
            Ok(u8::from(z[1] > z[0]))
        })
        .collect()
}

/// Classical head trained with softmax cross-entropy on frozen features.
#[allow(clippy::too_many_arguments)]
pub fn baseline_train(
    kind: BaselineKind,
    cfg: &BaselineConfig,
    train_x: &[Vec<f64>],
    train_y: &[u8],
    test_x: &[Vec<f64>],
    test_y: &[u8],
    seed: u64,
    run_id: usize,
) -> Result<BaselineRun, TrainError> {
    if train_x.len() != train_y.len() || test_x.len() != test_y.len() {
        return Err(TrainError::LengthMismatch(train_x.len(), train_y.len()));
    }
    if cfg.batch == 0 {
        return Err(TrainError::Config("batch must be positive".into()));
    }
    let seed = seed.wrapping_add(run_id as u64);
    let mut head = BaselineHead::new(kind, &mut substream(seed, &format!("baseline.{kind}.init")));
    let mut rng = substream(seed, &format!("baseline.{kind}.shuffle"));
    let mut adam = AdamState::new(head.n_weights());
    let mut order: Vec<usize> = (0..train_x.len()).collect();
    let mut history = Vec::new();
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(cfg.batch) {
            let w = head.weights().to_vec();
            let outs = chunk
                .par_iter()
                .map(|&i| {
                    let pass = head.forward_pass_with(&w, &train_x[i])?;
                    let (l, g) = softmax_cross_entropy(pass.output(), usize::from(train_y[i]));
                    Ok::<_, TrainError>((l, pass.backward(&g)?))
                })
                .collect::<Result<Vec<_>, _>>()?;
            let b = chunk.len() as f64;
            let mut grad = vec![0.0; w.len()];
            let mut loss = 0.0;
            for (l, g) in outs {
                loss += l / b;
                for (t, v) in grad.iter_mut().zip(g) {
                    *t += v / b;
                }
            }
            if !loss.is_finite() {
                return Err(TrainError::Diverged {
                    phase: "baseline",
                    run_id,
                    step: epoch,
                    loss,
                });
            }
            epoch_loss += loss * b / train_x.len() as f64;
            adam_step(&mut adam, head.weights_mut(), &grad, cfg.learning_rate)?;
        }
        history.push(entry("baseline", run_id, epoch, "ce_loss", epoch_loss));
    }
    let train_acc = classification_report(&head_predictions(&head, train_x)?, train_y)?.accuracy;
    let test_report = classification_report(&head_predictions(&head, test_x)?, test_y)?;
    history.push(entry("baseline", run_id, cfg.epochs, "test_accuracy", test_report.accuracy));
    Ok(BaselineRun {
        run_id,
        kind,
        n_params: head.n_weights(),
        weights: head.weights().to_vec(),
        train_accuracy: train_acc,
        test_report,
        history,
    })
}

/// Autoencoder trained on mini-batches resampled with replacement.
pub fn autoencoder_train(
    kind: InterfaceKind,
    n_channels: usize,
    cfg: &BaselineConfig,
    images: &[Vec<f64>],
    seed: u64,
) -> Result<(AutoencoderModel, Vec<HistoryEntry>), TrainError> {
    if images.is_empty() {
        return Err(TrainError::TooFewSamples { needed: 1, found: 0 });
    }
    let mut model = AutoencoderModel::new(kind, n_channels, cfg.ae_latent, &mut substream(seed, "ae.init"))?;
    let mut rng = substream(seed, "ae.batches");
    let mut adam = AdamState::new(model.n_weights());
    let mut history = Vec::new();
    for step in 1..=cfg.ae_iterations {
        let idx: Vec<usize> = (0..cfg.ae_batch).map(|_| rng.gen_range(0..images.len())).collect();
        let (loss, grad) = autoencoder_batch(&model, images, &idx)?;
        if !loss.is_finite() {
            return Err(TrainError::Diverged {
                phase: "autoencoder",
                run_id: 0,
                step,
                loss,
            });
        }
        history.push(entry("autoencoder", 0, step, "mse", loss));
        adam_step(&mut adam, model.weights_mut(), &grad, cfg.learning_rate)?;
    }
    Ok((model, history))
}

/// Mean reconstruction error over `idx` and its weight gradient.
pub fn autoencoder_batch(model: &AutoencoderModel, images: &[Vec<f64>], idx: &[usize]) -> Result<(f64, Vec<f64>), TrainError> {
    let outs = idx
        .par_iter()
        .map(|&i| autoencoder_step(model, &images[i]))
        .collect::<Result<Vec<_>, _>>()?;
    let b = idx.len() as f64;
    let mut grad = vec![0.0; model.n_weights()];
    let mut loss = 0.0;
    for (_, l, g) in outs {
        loss += l / b;
        for (t, v) in grad.iter_mut().zip(g) {
            *t += v / b;
        }
    }
    Ok((loss, grad))
}
