//! Convolutional neural quantum embedding (CNQE).
//!
//! Classical interface networks map multi-channel images to rotation angles of a
//! parameterized embedding circuit. The networks are trained with state-similarity
//! losses so that the class-averaged embedded states become distinguishable (large
//! trace distance); a QCNN classifier is then trained on the frozen embedding.
//!
//! Module map:
//!
//! | module          | contents                                                      |
//! |-----------------|---------------------------------------------------------------|
//! | [`qsim`]        | dense statevector / density-matrix simulator, Jacobi eigensolver |
//! | [`embeddings`]  | the seven unit feature maps and four stacked maps            |
//! | [`nn`]          | tensor tape autodiff, interface models, baselines, autoencoder |
//! | [`losses`]      | fidelity / Hilbert-Schmidt similarities and their gradients |
//! | [`ansatz`]      | QCNN classifier circuit and readout                          |
//! | [`training`]    | Adam, pair sampling, CNQE and QCNN training loops            |
//! | [`metrics`]     | trace distance, Helstrom accuracy, classification and statistics |
//! | [`fourier`]     | frequency spectra of Z-diagonal encoding layouts             |
//! | [`noise`]       | Kraus channels, noise model, noisy density-matrix execution  |
//! | [`data`]        | CIFAR-10 / raw tensor loaders, resizing, synthetic blobs     |
//! | [`cli`]         | experiment configuration, persistence and subcommands        |
//!
//! Qubit 0 is the most significant bit of every basis index.

pub mod ansatz;
pub mod cli;
pub mod data;
pub mod embeddings;
pub mod fourier;
pub mod losses;
pub mod metrics;
pub mod nn;
pub mod noise;
pub mod qsim;
pub mod rng;
pub mod training;

pub use num_complex::Complex64 as C64;

/// Crate-level error, wrapping the per-module errors.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Sim(#[from] qsim::SimError),
    #[error(transparent)]
    Embedding(#[from] embeddings::EmbeddingError),
    #[error(transparent)]
    Nn(#[from] nn::NnError),
    #[error(transparent)]
    Loss(#[from] losses::LossError),
    #[error(transparent)]
    Metric(#[from] metrics::MetricError),
    #[error(transparent)]
    Fourier(#[from] fourier::FourierError),
    #[error(transparent)]
    Noise(#[from] noise::NoiseError),
    #[error(transparent)]
    Data(#[from] data::DataError),
    #[error(transparent)]
    Train(#[from] training::TrainError),
    #[error(transparent)]
    Config(#[from] cli::ConfigError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
