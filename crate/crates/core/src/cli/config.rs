//! Experiment configuration documents.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{CliError, ConfigError};
use crate::data::{self, DataError, DatasetSplit, CIFAR10_CLASSES};
use crate::fourier::EncodingLayout;
use crate::noise::NoiseModel;
use crate::qsim::CMatrix;
use crate::training::{BaselineConfig, TrainConfig};
use crate::C64;

/// Environment variable consulted when a CIFAR-10 block names no path.
pub const DATA_DIR_ENV: &str = "CNQE_DATA_DIR";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetConfig {
    Blobs {
        n_per_class: usize,
        /// Separation of the class patterns in units of the pixel noise σ.
        margin_sigma: f64,
        seed: u64,
    },
    Cifar10 {
        #[serde(default)]
        path: Option<PathBuf>,
        classes: [String; 2],
        seed: u64,
    },
    Raw {
        path: PathBuf,
    },
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self::Blobs {
            n_per_class: 100,
            margin_sigma: 10.0,
            seed: 0,
        }
    }
}

fn cifar_class(name: &str) -> Result<usize, ConfigError> {
    CIFAR10_CLASSES
        .iter()
        .position(|c| c.eq_ignore_ascii_case(name))
        .ok_or_else(|| ConfigError::Invalid(format!("unknown CIFAR-10 class `{name}`")))
}

impl DatasetConfig {
    pub fn source_name(&self) -> &'static str {
        match self {
            Self::Blobs { .. } => "blobs",
            Self::Cifar10 { .. } => "cifar10",
            Self::Raw { .. } => "raw",
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            Self::Blobs { seed, .. } | Self::Cifar10 { seed, .. } => *seed,
            Self::Raw { .. } => 0,
        }
    }

    /// Resolves the CIFAR-10 root: explicit path, then `$CNQE_DATA_DIR`.
    pub fn cifar_root(&self) -> Option<PathBuf> {
        match self {
            Self::Cifar10 { path: Some(p), .. } => Some(p.clone()),
            Self::Cifar10 { path: None, .. } => std::env::var_os(DATA_DIR_ENV).map(PathBuf::from),
            _ => None,
        }
    }

    pub fn load(&self) -> Result<DatasetSplit, CliError> {
        Ok(match self {
            Self::Blobs {
                n_per_class,
                margin_sigma,
                seed,
            } => data::synthetic_blobs(*n_per_class, *margin_sigma, *seed)?,
            Self::Cifar10 { classes, seed, .. } => {
                let root = self
                    .cifar_root()
                    .ok_or_else(|| DataError::Missing(PathBuf::from(format!("${DATA_DIR_ENV}"))))?;
                data::load_cifar10_pair(&root, cifar_class(&classes[0])?, cifar_class(&classes[1])?, *seed)?
            }
            Self::Raw { path } => data::load_raw_tensor(path)?,
        })
    }
}

/// Either a named preset or explicit device parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NoiseBlock {
    Preset { preset: String },
    Model(NoiseModel),
}

impl NoiseBlock {
    pub fn resolve(&self) -> Result<NoiseModel, ConfigError> {
        let m = match self {
            Self::Preset { preset } if preset == "fake_vigo" => NoiseModel::fake_vigo(),
            Self::Preset { preset } => return Err(ConfigError::Invalid(format!("unknown noise preset `{preset}`"))),
            Self::Model(m) => *m,
        };
        m.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(m)
    }
}

/// Baseline selection: a classical head name (`linear8`, `mlp8`, `cnn1d8`, `linear24`,
/// `mlp24`, `cnn1d24`) or `autoencoder`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineBlock {
    pub head: String,
    #[serde(default)]
    pub settings: BaselineConfig,
    /// Trained interface to take features from; trained afresh when absent.
    #[serde(default)]
    pub checkpoint: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub noise: Option<NoiseBlock>,
    #[serde(default)]
    pub baseline: Option<BaselineBlock>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Parses and validates; the noise block is folded into the training config.
    pub fn from_json(s: &str) -> Result<Self, ConfigError> {
        let mut cfg: Self = serde_json::from_str(s).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.train.noise = cfg.noise.as_ref().map(NoiseBlock::resolve).transpose()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.train.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if let DatasetConfig::Cifar10 { classes, .. } = &self.dataset {
            for c in classes {
                cifar_class(c)?;
            }
            if classes[0].eq_ignore_ascii_case(&classes[1]) {
                return Err(ConfigError::Invalid("the two classes must differ".into()));
            }
        }
        if let Some(b) = &self.baseline {
            if b.head != "autoencoder" {
                b.head
                    .parse::<crate::nn::BaselineKind>()
                    .map_err(|e| ConfigError::Invalid(e.to_string()))?;
            }
        }
        Ok(())
    }
}

type JsonComplex = [f64; 2];

/// JSON form of an [`EncodingLayout`] with `RZ(x_c)` encodings. Matrices are row-major
/// lists of `[re, im]` pairs; `interleavers[0]` acts first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayoutFile {
    pub n_qubits: usize,
    pub input_dim: usize,
    pub interleavers: Vec<Vec<Vec<JsonComplex>>>,
    pub assignments: Vec<Vec<usize>>,
}

fn to_matrix(rows: &[Vec<JsonComplex>]) -> Result<CMatrix, ConfigError> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(ConfigError::Invalid("interleavers must be square and non-empty".into()));
    }
    if rows.iter().flatten().flatten().any(|v| !v.is_finite()) {
        return Err(ConfigError::Invalid("interleaver entries must be finite".into()));
    }
    Ok(CMatrix::from_rows(
        &rows
            .iter()
            .map(|r| r.iter().map(|&[re, im]| C64::new(re, im)).collect())
            .collect::<Vec<_>>(),
    ))
}

impl LayoutFile {
    pub fn from_json(s: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(s).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn to_layout(&self) -> Result<EncodingLayout, ConfigError> {
        if self.n_qubits == 0 || self.n_qubits > crate::fourier::MAX_FOURIER_QUBITS {
            return Err(ConfigError::Invalid(format!("unsupported qubit count {}", self.n_qubits)));
        }
        let dim = 1usize << self.n_qubits;
        let ws = self
            .interleavers
            .iter()
            .map(|w| {
                let m = to_matrix(w)?;
                if m.rows() != dim {
                    return Err(ConfigError::Invalid(format!("interleaver is {0}x{0}, expected {dim}x{dim}", m.rows())));
                }
                Ok(m)
            })
            .collect::<Result<Vec<_>, _>>()?;
        EncodingLayout::from_assignments(self.n_qubits, self.input_dim, ws, &self.assignments)
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    /// `H · RZ(x) · H` on one qubit.
    pub fn hadamard_sandwich() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let m = vec![vec![[h, 0.0], [h, 0.0]], vec![[h, 0.0], [-h, 0.0]]];
        Self {
            n_qubits: 1,
            input_dim: 1,
            interleavers: vec![m.clone(), m],
            assignments: vec![vec![0]],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_parse_and_validate() {
        let c = ExperimentConfig::from_json("{}").unwrap();
        assert_eq!(c, ExperimentConfig::default());
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(ExperimentConfig::from_json(&text).unwrap(), c);
    }

    #[test]
    fn unknown_keys_and_bad_names_rejected() {
        assert!(matches!(ExperimentConfig::from_json(r#"{"trian":{}}"#), Err(ConfigError::Parse(_))));
        assert!(matches!(
            ExperimentConfig::from_json(r#"{"train":{"loss_kind":"cosine"}}"#),
            Err(ConfigError::Parse(_))
        ));
        assert!(ExperimentConfig::from_json(r#"{"dataset":{"source":"blobs","n_per_class":4,"margin_sigma":1,"seed":0,"x":1}}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"dataset":{"source":"cifar10","classes":["frog","frog"],"seed":0}}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"dataset":{"source":"cifar10","classes":["frog","dragon"],"seed":0}}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"baseline":{"head":"svm"}}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"noise":{"preset":"fake_lagos"}}"#).is_err());
    }

    #[test]
    fn noise_block_forms() {
        let c = ExperimentConfig::from_json(r#"{"noise":{"preset":"fake_vigo"}}"#).unwrap();
        assert_eq!(c.train.noise, Some(NoiseModel::fake_vigo()));
        let explicit = serde_json::to_string(&NoiseModel::fake_vigo()).unwrap();
        let c2 = ExperimentConfig::from_json(&format!(r#"{{"noise":{explicit}}}"#)).unwrap();
        assert_eq!(c2.train.noise, c.train.noise);
        let hs = r#"{"noise":{"preset":"fake_vigo"},"train":{"loss_kind":"hs"}}"#;
        assert!(matches!(ExperimentConfig::from_json(hs), Err(ConfigError::Invalid(_))));
    }

    #[test]
    fn layout_file_round_trip() {
        let f = LayoutFile::hadamard_sandwich();
        let back = LayoutFile::from_json(&serde_json::to_string(&f).unwrap()).unwrap();
        assert_eq!(back, f);
        assert_eq!(back.to_layout().unwrap().layers.len(), 1);
        let bad = LayoutFile {
            interleavers: vec![],
            ..f
        };
        assert!(bad.to_layout().is_err());
    }
}
