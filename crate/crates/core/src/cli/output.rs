//! On-disk artifacts: checkpoints, history CSV, summaries, the run log.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{CliError, ConfigError};
use crate::ansatz::QcnnSpec;
use crate::embeddings::FeatureMapKind;
use crate::metrics::ClassificationReport;
use crate::nn::{InterfaceKind, InterfaceModel, Model};
use crate::training::{by_name, HistoryEntry, QcnnRun, TrainConfig, TrainRun};

pub const SCHEMA_VERSION: u32 = 1;

/// Trained interface weights plus the QCNN angles of every classifier run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub schema_version: u32,
    #[serde(with = "by_name")]
    pub interface: InterfaceKind,
    #[serde(with = "by_name")]
    pub feature_map: FeatureMapKind,
    pub n_qubits: usize,
    pub n_channels: usize,
    pub p_unit: usize,
    pub run_id: usize,
    pub best_step: usize,
    pub test_trace_distance: f64,
    pub weights: Vec<f64>,
    pub qcnn: QcnnSpec,
    pub qcnn_thetas: Vec<Vec<f64>>,
}

impl Checkpoint {
    pub fn new(config: &TrainConfig, run: &TrainRun, qcnn: &[QcnnRun]) -> Result<Self, CliError> {
        Ok(Self {
            schema_version: SCHEMA_VERSION,
            interface: config.interface,
            feature_map: config.feature_map,
            n_qubits: config.n_qubits,
            n_channels: config.n_channels,
            p_unit: config.p_unit()?,
            run_id: run.run_id,
            best_step: run.best_step,
            test_trace_distance: run.test_trace_distance,
            weights: run.weights.clone(),
            qcnn: config.qcnn.clone(),
            qcnn_thetas: qcnn.iter().map(|r| r.theta.clone()).collect(),
        })
    }

    /// Parses and checks the weight count against the declared architecture.
    pub fn from_json(s: &str) -> Result<Self, ConfigError> {
        let c: Self = serde_json::from_str(s).map_err(|e| ConfigError::Parse(e.to_string()))?;
        if c.schema_version != SCHEMA_VERSION {
            return Err(ConfigError::Invalid(format!("unsupported schema_version {}", c.schema_version)));
        }
        if c.n_qubits > 8 || c.n_channels > 8 || c.p_unit > 64 {
            return Err(ConfigError::Invalid("architecture exceeds supported sizes".into()));
        }
        c.qcnn.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        c.model()?;
        let n = c.qcnn.total_params();
        if c.qcnn_thetas.iter().any(|t| t.len() != n) {
            return Err(ConfigError::Invalid(format!("every QCNN angle vector needs {n} entries")));
        }
        Ok(c)
    }

    /// Interface network carrying the stored weights.
    pub fn model(&self) -> Result<InterfaceModel, ConfigError> {
        let mut m = InterfaceModel::zeros(self.interface, self.n_channels, self.n_qubits, self.p_unit)
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        m.set_weights(&self.weights).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(m)
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HistoryRow {
    phase: String,
    run_id: usize,
    step: usize,
    metric: String,
    value: f64,
}

pub const HISTORY_HEADER: &str = "phase,run_id,step,metric,value";

pub fn history_csv(entries: &[HistoryEntry]) -> String {
    let mut out = String::from(HISTORY_HEADER);
    out.push('\n');
    for e in entries {
        out.push_str(&format!("{},{},{},{},{:?}\n", e.phase, e.run_id, e.step, e.metric, e.value));
    }
    out
}

pub fn parse_history_csv(text: &str) -> Result<Vec<HistoryEntry>, ConfigError> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header = rdr.headers().map_err(|e| ConfigError::Parse(e.to_string()))?;
    if header.iter().collect::<Vec<_>>().join(",") != HISTORY_HEADER {
        return Err(ConfigError::Parse(format!("history header must be `{HISTORY_HEADER}`")));
    }
    rdr.deserialize::<HistoryRow>()
        .map(|r| {
            let r = r.map_err(|e| ConfigError::Parse(e.to_string()))?;
            Ok(HistoryEntry {
                phase: r.phase,
                run_id: r.run_id,
                step: r.step,
                metric: r.metric,
                value: r.value,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CnqeRunSummary {
    pub run_id: usize,
    pub seed: u64,
    pub best_step: usize,
    pub test_trace_distance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifierRunSummary {
    pub run_id: usize,
    pub train_accuracy: f64,
    pub test: ClassificationReport,
    /// Optimal accuracy for the embedded training ensemble; absent for classical heads.
    pub train_helstrom_accuracy: Option<f64>,
    pub train_trace_distance: Option<f64>,
}

impl From<&QcnnRun> for ClassifierRunSummary {
    fn from(r: &QcnnRun) -> Self {
        Self {
            run_id: r.run_id,
            train_accuracy: r.train_accuracy,
            test: r.test_report,
            train_helstrom_accuracy: Some(r.train_helstrom_accuracy),
            train_trace_distance: Some(r.train_trace_distance),
        }
    }
}

/// `(mean, sample standard deviation)`; the deviation is 0 for a single value.
pub fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 {
        v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema_version: u32,
    pub command: String,
    pub dataset_digest: String,
    /// Trace distance of the embedding the classifiers ran on.
    pub test_trace_distance: Option<f64>,
    pub mean_test_accuracy: f64,
    pub std_test_accuracy: f64,
    pub median_run_id: Option<usize>,
    pub cnqe_runs: Vec<CnqeRunSummary>,
    pub classifier: String,
    pub classifier_params: usize,
    pub classifier_runs: Vec<ClassifierRunSummary>,
    pub config: serde_json::Value,
}

/// Writes files under `dir`; the log is the only artifact carrying wall-clock time.
pub struct OutputDir {
    pub dir: PathBuf,
    log: std::fs::File,
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

impl OutputDir {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        let log_path = dir.join("run.log");
        let log = std::fs::File::create(&log_path).map_err(|e| io_err(&log_path, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            log,
        })
    }

    pub fn log(&mut self, msg: &str) {
        let t = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs_f64())
            .unwrap_or(0.0);
        // Logging failures never abort a run.
        let _ = writeln!(self.log, "[{t:.3}] {msg}");
    }

    pub fn write(&self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        std::fs::write(&path, contents).map_err(|e| io_err(&path, e))
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<(), CliError> {
        let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Numeric(e.to_string()))?;
        s.push('\n');
        self.write(name, &s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn history_round_trip() {
        let e = vec![
            HistoryEntry {
                phase: "cnqe".into(),
                run_id: 0,
                step: 0,
                metric: "test_trace_distance".into(),
                value: 0.125,
            },
            HistoryEntry {
                phase: "qcnn".into(),
                run_id: 2,
                step: 20,
                metric: "test_accuracy".into(),
                value: 0.1 + 0.2,
            },
        ];
        let text = history_csv(&e);
        assert!(text.starts_with("phase,run_id,step,metric,value\n"));
        assert_eq!(parse_history_csv(&text).unwrap(), e);
        assert!(parse_history_csv("a,b\n1,2\n").is_err());
        assert!(parse_history_csv("phase,run_id,step,metric,value\ncnqe,x,0,m,1\n").is_err());
    }

    #[test]
    fn checkpoint_round_trip_and_checks() {
        let cfg = TrainConfig::default();
        let model = cfg.new_interface(&mut crate::rng::substream(0, "c")).unwrap();
        let run = TrainRun {
            run_id: 1,
            seed: 1,
            weights: model.weights().to_vec(),
            best_step: 50,
            test_trace_distance: 0.5,
            history: vec![],
        };
        let c = Checkpoint::new(&cfg, &run, &[]).unwrap();
        let text = serde_json::to_string(&c).unwrap();
        let back = Checkpoint::from_json(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.model().unwrap().weights(), model.weights());
        let mut short = c.clone();
        short.weights.pop();
        assert!(Checkpoint::from_json(&serde_json::to_string(&short).unwrap()).is_err());
        let mut bad_theta = c;
        bad_theta.qcnn_thetas = vec![vec![0.0; 3]];
        assert!(Checkpoint::from_json(&serde_json::to_string(&bad_theta).unwrap()).is_err());
    }

    #[test]
    fn mean_std_examples() {
        assert_eq!(mean_std(&[2.0]), (2.0, 0.0));
        let (m, s) = mean_std(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 1.0).abs() < 1e-15);
    }
}
