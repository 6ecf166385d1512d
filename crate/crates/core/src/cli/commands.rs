use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::Rng as _;
use rayon::prelude::*;

use super::config::{ExperimentConfig, LayoutFile};
use super::output::{
    history_csv, mean_std, Checkpoint, ClassifierRunSummary, CnqeRunSummary, OutputDir, Summary, SCHEMA_VERSION,
};
use super::{CliError, ConfigError};
use crate::data::{self, DatasetSplit};
use crate::embeddings::{EmbeddingSpec, FeatureMapKind};
use crate::fourier::{amplitude_spectra, EncodingLayout, COEFF_TOL};
use crate::metrics::{bonferroni, welch_t_test};
use crate::nn::{count_params, BaselineKind, InterfaceKind, InterfaceModel, Model};
use crate::noise::NoiseModel;
use crate::rng::substream;
use crate::training::{
    autoencoder_train, baseline_train, cnqe_train, compute_features, ensemble_trace_distance, qcnn_train, qcnn_train_features,
    select_median_run, HistoryEntry, TrainConfig, TrainRun,
};

pub const DEFAULT_OUT_DIR: &str = "cnqe_out";

fn out_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.out_dir.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

/// Config echo for the summary; the output location is left out so reruns elsewhere
/// produce identical bytes.
fn config_json(cfg: &ExperimentConfig) -> serde_json::Value {
    let mut c = cfg.clone();
    c.out_dir = None;
    serde_json::to_value(&c).unwrap_or(serde_json::Value::Null)
}

fn load_data(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<(DatasetSplit, String), CliError> {
    let split = cfg.dataset.load()?;
    let m = data::manifest(&split, cfg.dataset.source_name(), cfg.dataset.seed());
    out.write_json("manifest.json", &m)?;
    out.log(&format!(
        "loaded {} ({} train / {} test, digest {})",
        m.source, m.n_train, m.n_test, m.digest
    ));
    Ok((split, m.digest))
}

fn interface_with(config: &TrainConfig, weights: &[f64]) -> Result<InterfaceModel, CliError> {
    let mut m = InterfaceModel::zeros(config.interface, config.n_channels, config.n_qubits, config.p_unit()?)
        .map_err(crate::training::TrainError::from)?;
    m.set_weights(weights).map_err(crate::training::TrainError::from)?;
    Ok(m)
}

fn cnqe_stage(cfg: &ExperimentConfig, split: &DatasetSplit, out: &mut OutputDir) -> Result<(Vec<TrainRun>, usize), CliError> {
    out.log(&format!("cnqe: {} runs × {} iterations", cfg.train.n_runs, cfg.train.cnqe_iterations));
    let runs = cnqe_train(&cfg.train, split)?;
    for r in &runs {
        out.log(&format!("cnqe run {}: D = {} at step {}", r.run_id, r.test_trace_distance, r.best_step));
    }
    let median = select_median_run(&runs)?.run_id;
    out.log(&format!("median run {median}"));
    Ok((runs, median))
}

fn cnqe_summaries(runs: &[TrainRun]) -> Vec<CnqeRunSummary> {
    runs.iter()
        .map(|r| CnqeRunSummary {
            run_id: r.run_id,
            seed: r.seed,
            best_step: r.best_step,
            test_trace_distance: r.test_trace_distance,
        })
        .collect()
}

fn finish(out: &mut OutputDir, summary: &Summary, history: &[HistoryEntry]) -> Result<(), CliError> {
    out.write("history.csv", &history_csv(history))?;
    out.write_json("summary.json", summary)?;
    out.log("done");
    super::print_stdout(&format!(
        "{}: mean test accuracy {:.4} (sd {:.4}), outputs in {}\n",
        summary.command,
        summary.mean_test_accuracy,
        summary.std_test_accuracy,
        out.dir.display()
    ));
    Ok(())
}

/// Full pipeline: interface runs, median selection, QCNN runs on the median embedding.
pub fn cmd_train(cfg: &ExperimentConfig) -> Result<Summary, CliError> {
    let mut out = OutputDir::create(&out_dir(cfg))?;
    let (split, digest) = load_data(cfg, &mut out)?;
    let (runs, median_id) = cnqe_stage(cfg, &split, &mut out)?;
    let median = &runs[median_id];
    let model = interface_with(&cfg.train, &median.weights)?;
    let qruns = qcnn_train(&cfg.train, &split, &model, &median.weights)?;
    let acc: Vec<f64> = qruns.iter().map(|r| r.test_accuracy).collect();
    let (mean, std) = mean_std(&acc);
    out.write_json("checkpoint.json", &Checkpoint::new(&cfg.train, median, &qruns)?)?;
    let history: Vec<HistoryEntry> = runs
        .iter()
        .flat_map(|r| r.history.iter().cloned())
        .chain(qruns.iter().flat_map(|r| r.history.iter().cloned()))
        .collect();
    let summary = Summary {
        schema_version: SCHEMA_VERSION,
        command: "train".into(),
        dataset_digest: digest,
        test_trace_distance: Some(median.test_trace_distance),
        mean_test_accuracy: mean,
        std_test_accuracy: std,
        median_run_id: Some(median_id),
        cnqe_runs: cnqe_summaries(&runs),
        classifier: "qcnn".into(),
        classifier_params: cfg.train.qcnn.total_params(),
        classifier_runs: qruns.iter().map(ClassifierRunSummary::from).collect(),
        config: config_json(cfg),
    };
    finish(&mut out, &summary, &history)?;
    Ok(summary)
}

/// Classical head on frozen interface features, or autoencoder encoder + QCNN.
pub fn cmd_baseline(cfg: &ExperimentConfig) -> Result<Summary, CliError> {
    let b = cfg
        .baseline
        .as_ref()
        .ok_or_else(|| ConfigError::Invalid("the baseline command needs a `baseline` block".into()))?;
    let mut out = OutputDir::create(&out_dir(cfg))?;
    let (split, digest) = load_data(cfg, &mut out)?;
    let (train_x, test_x) = (split.train_images(), split.test_images());
    let (train_y, test_y) = (split.train_labels(), split.test_labels());
    let t = &cfg.train;

    if b.head == "autoencoder" {
        if t.interface == InterfaceKind::Gb {
            return Err(ConfigError::Invalid("the autoencoder baseline uses the ga or gc encoder".into()).into());
        }
        let (ae, mut history) = autoencoder_train(t.interface, t.n_channels, &b.settings, &train_x, t.seed)?;
        let enc = ae.encoder();
        let p = t.embedding()?.param_count();
        if ae.latent_dim() != p {
            return Err(ConfigError::Invalid(format!(
                "latent dimension {} does not match the {} embedding parameters of {}",
                ae.latent_dim(),
                p,
                t.feature_map
            ))
            .into());
        }
        out.log(&format!("autoencoder trained, latent {}", ae.latent_dim()));
        let tr = compute_features(&enc, enc.weights(), &train_x)?;
        let te = compute_features(&enc, enc.weights(), &test_x)?;
        let d = ensemble_trace_distance(&t.embedding()?, &te, &test_y, t.noise.as_ref())?;
        let qruns = qcnn_train_features(t, &tr, &train_y, &te, &test_y, t.n_runs)?;
        history.extend(qruns.iter().flat_map(|r| r.history.iter().cloned()));
        let acc: Vec<f64> = qruns.iter().map(|r| r.test_accuracy).collect();
        let (mean, std) = mean_std(&acc);
        let summary = Summary {
            schema_version: SCHEMA_VERSION,
            command: "baseline".into(),
            dataset_digest: digest,
            test_trace_distance: Some(d),
            mean_test_accuracy: mean,
            std_test_accuracy: std,
            median_run_id: None,
            cnqe_runs: vec![],
            classifier: "autoencoder+qcnn".into(),
            classifier_params: t.qcnn.total_params(),
            classifier_runs: qruns.iter().map(ClassifierRunSummary::from).collect(),
            config: config_json(cfg),
        };
        finish(&mut out, &summary, &history)?;
        return Ok(summary);
    }

    let kind: BaselineKind = b.head.parse().map_err(|e: crate::nn::NnError| ConfigError::Invalid(e.to_string()))?;
    let (model, cnqe_runs, median_id, mut history, d) = match &b.checkpoint {
        Some(path) => {
            let c = Checkpoint::from_json(&read_text(path)?)?;
            out.log(&format!("features from {}", path.display()));
            (c.model()?, vec![], None, vec![], Some(c.test_trace_distance))
        }
        None => {
            let (runs, id) = cnqe_stage(cfg, &split, &mut out)?;
            let m = interface_with(t, &runs[id].weights)?;
            let d = runs[id].test_trace_distance;
            let h = runs.iter().flat_map(|r| r.history.iter().cloned()).collect();
            (m, runs, Some(id), h, Some(d))
        }
    };
    if model.output_dim() != kind.input_len() {
        return Err(ConfigError::Invalid(format!(
            "{kind} takes {} features but the interface emits {}",
            kind.input_len(),
            model.output_dim()
        ))
        .into());
    }
    let tr = compute_features(&model, model.weights(), &train_x)?;
    let te = compute_features(&model, model.weights(), &test_x)?;
    let runs = (0..t.n_runs)
        .into_par_iter()
        .map(|r| baseline_train(kind, &b.settings, &tr, &train_y, &te, &test_y, t.seed, r))
        .collect::<Result<Vec<_>, _>>()?;
    history.extend(runs.iter().flat_map(|r| r.history.iter().cloned()));
    let acc: Vec<f64> = runs.iter().map(|r| r.test_report.accuracy).collect();
    let (mean, std) = mean_std(&acc);
    let summary = Summary {
        schema_version: SCHEMA_VERSION,
        command: "baseline".into(),
        dataset_digest: digest,
        test_trace_distance: d,
        mean_test_accuracy: mean,
        std_test_accuracy: std,
        median_run_id: median_id,
        cnqe_runs: cnqe_summaries(&cnqe_runs),
        classifier: kind.name().into(),
        classifier_params: runs.first().map_or(0, |r| r.n_params),
        classifier_runs: runs
            .iter()
            .map(|r| ClassifierRunSummary {
                run_id: r.run_id,
                train_accuracy: r.train_accuracy,
                test: r.test_report,
                train_helstrom_accuracy: None,
                train_trace_distance: None,
            })
            .collect(),
        config: config_json(cfg),
    };
    finish(&mut out, &summary, &history)?;
    Ok(summary)
}

fn read_text(path: &Path) -> Result<String, ConfigError> {
    std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

#[derive(Debug, serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct StatsRow {
    group: String,
    metric: String,
    value: f64,
}

pub const STATS_HEADER: &str = "comparison,metric,t,dof,p_raw,p_adjusted";

/// Every pair of groups per metric, in order of first appearance; Bonferroni over the
/// comparisons of that metric.
pub fn stats_from_csv(texts: &[String]) -> Result<String, CliError> {
    let mut metrics: Vec<String> = Vec::new();
    let mut groups: BTreeMap<String, Vec<(String, Vec<f64>)>> = BTreeMap::new();
    for text in texts {
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        for row in rdr.deserialize::<StatsRow>() {
            let row = row.map_err(|e| ConfigError::Parse(e.to_string()))?;
            if !row.value.is_finite() {
                return Err(ConfigError::Parse(format!("non-finite value in group {}", row.group)).into());
            }
            let gs = groups.entry(row.metric.clone()).or_insert_with(|| {
                metrics.push(row.metric.clone());
                Vec::new()
            });
            match gs.iter_mut().find(|(g, _)| *g == row.group) {
                Some((_, v)) => v.push(row.value),
                None => gs.push((row.group, vec![row.value])),
            }
        }
    }
    let mut out = format!("{STATS_HEADER}\n");
    for metric in &metrics {
        let gs = &groups[metric];
        let mut rows = Vec::new();
        for i in 0..gs.len() {
            for j in i + 1..gs.len() {
                let w = welch_t_test(&gs[i].1, &gs[j].1)?;
                rows.push((format!("{} vs {}", gs[i].0, gs[j].0), w));
            }
        }
        let raw: Vec<f64> = rows.iter().map(|r| r.1.p_two_sided).collect();
        let adj = bonferroni(&raw, raw.len())?;
        for ((name, w), p) in rows.iter().zip(adj) {
            out.push_str(&format!("{name},{metric},{:?},{:?},{:?},{:?}\n", w.t, w.dof, w.p_two_sided, p));
        }
    }
    Ok(out)
}

pub fn cmd_stats(inputs: &[PathBuf]) -> Result<String, CliError> {
    let texts = inputs.iter().map(|p| read_text(p)).collect::<Result<Vec<_>, _>>()?;
    stats_from_csv(&texts)
}

#[derive(Clone, Debug, PartialEq)]
pub struct FourierCheckArgs {
    pub kind: Option<String>,
    pub qubits: usize,
    pub layout: Option<PathBuf>,
    pub samples: usize,
    pub seed: u64,
}

pub const FOURIER_HEADER: &str = "amplitude,frequency,abs_coeff,max_error";
/// Reconstruction error above which `fourier-check` fails.
pub const FOURIER_CHECK_TOL: f64 = 1e-9;

/// Spectrum CSV. `max_error` compares the Fourier sum with an independent simulation:
/// the embedding circuit itself for `--kind`, the normal-form product for a layout.
pub fn cmd_fourier_check(args: &FourierCheckArgs) -> Result<String, CliError> {
    let (layout, embedding) = match (&args.kind, &args.layout) {
        (Some(k), _) => {
            let kind: FeatureMapKind = k.parse().map_err(|e: crate::embeddings::EmbeddingError| ConfigError::Invalid(e.to_string()))?;
            let spec = EmbeddingSpec::new(kind, args.qubits).map_err(|e| ConfigError::Invalid(e.to_string()))?;
            (EncodingLayout::for_embedding(kind, args.qubits)?, Some(spec))
        }
        (None, Some(p)) => (LayoutFile::from_json(&read_text(p)?)?.to_layout()?, None),
        (None, None) => (LayoutFile::hadamard_sandwich().to_layout()?, None),
    };
    let spectra = amplitude_spectra(&layout)?;
    let mut rng = substream(args.seed, "fourier.inputs");
    let dim = layout.dim();
    let mut max_err = vec![0.0f64; dim];
    for _ in 0..args.samples {
        let x: Vec<f64> = (0..layout.input_dim)
            .map(|_| rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI))
            .collect();
        let direct = match &embedding {
            Some(spec) => spec
                .embed_state(&x)
                .map_err(|e| CliError::Numeric(e.to_string()))?
                .amplitudes()
                .to_vec(),
            None => layout.simulate(&x)?,
        };
        for (i, s) in spectra.iter().enumerate() {
            let z = crate::fourier::reconstruct_amplitude(s, &x)?;
            max_err[i] = max_err[i].max((z - direct[i]).norm());
        }
    }
    let mut out = format!("{FOURIER_HEADER}\n");
    for (i, s) in spectra.iter().enumerate() {
        for e in s.iter().filter(|e| e.coefficient.norm() > COEFF_TOL) {
            let h: Vec<String> = e.h.iter().map(|v| format!("{v:?}")).collect();
            out.push_str(&format!("{i},{},{:?},{:?}\n", h.join(" "), e.coefficient.norm(), max_err[i]));
        }
    }
    let worst = max_err.iter().copied().fold(0.0, f64::max);
    if worst > FOURIER_CHECK_TOL {
        return Err(CliError::Numeric(format!("reconstruction error {worst:e} exceeds {FOURIER_CHECK_TOL:e}")));
    }
    Ok(out)
}

fn label_counts(labels: impl Iterator<Item = u8>) -> BTreeMap<u8, usize> {
    let mut m = BTreeMap::new();
    for l in labels {
        *m.entry(l).or_insert(0) += 1;
    }
    m
}

/// JSON description of a file, detected by content.
pub fn cmd_inspect(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path).map_err(|e| ConfigError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let v = if bytes.starts_with(b"CNQE1") {
        let s = data::decode_raw_tensor(&bytes)?;
        serde_json::json!({
            "format": "raw_tensor",
            "class_names": s.class_names,
            "n_train": s.train.len(),
            "n_test": s.test.len(),
            "train_labels": label_counts(s.train.iter().map(|r| r.label)),
            "test_labels": label_counts(s.test.iter().map(|r| r.label)),
        })
    } else if let Ok(text) = std::str::from_utf8(&bytes) {
        describe_json(text)?
    } else {
        let recs = data::parse_cifar_records(&bytes, &path.display().to_string())?;
        serde_json::json!({
            "format": "cifar10_batch",
            "records": recs.len(),
            "labels": label_counts(recs.iter().map(|r| r.0)),
        })
    };
    Ok(serde_json::to_string_pretty(&v).expect("json value serializes"))
}

fn describe_json(text: &str) -> Result<serde_json::Value, CliError> {
    if let Ok(c) = Checkpoint::from_json(text) {
        let m = c.model()?;
        let (cnn, fc) = count_params(&m);
        return Ok(serde_json::json!({
            "format": "checkpoint",
            "interface": c.interface.to_string(),
            "feature_map": c.feature_map.to_string(),
            "n_qubits": c.n_qubits,
            "weights": m.n_weights(),
            "cnn_params": cnn,
            "fc_params": fc,
            "best_step": c.best_step,
            "test_trace_distance": c.test_trace_distance,
            "qcnn_params": c.qcnn.total_params(),
            "qcnn_runs": c.qcnn_thetas.len(),
        }));
    }
    if let Ok(s) = serde_json::from_str::<Summary>(text) {
        return Ok(serde_json::json!({
            "format": "summary",
            "command": s.command,
            "classifier": s.classifier,
            "test_trace_distance": s.test_trace_distance,
            "mean_test_accuracy": s.mean_test_accuracy,
            "std_test_accuracy": s.std_test_accuracy,
        }));
    }
    if let Ok(m) = NoiseModel::from_json(text) {
        return Ok(serde_json::json!({ "format": "noise_model", "model": m }));
    }
    match ExperimentConfig::from_json(text) {
        Ok(c) => Ok(serde_json::json!({ "format": "experiment_config", "config": c })),
        Err(e) => Err(ConfigError::Parse(format!("unrecognized file: {e}")).into()),
    }
}
