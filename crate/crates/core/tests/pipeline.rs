//! Library-level pipeline properties: thread-count independence, persistence round trips.

use cnqe::data::{decode_raw_tensor, encode_raw_tensor, synthetic_blobs};
use cnqe::embeddings::FeatureMapKind;
use cnqe::nn::InterfaceKind;
use cnqe::training::{cnqe_train, qcnn_train, select_median_run, TrainConfig};

fn small() -> TrainConfig {
    TrainConfig {
        cnqe_iterations: 15,
        eval_every: 5,
        qcnn_epochs: 2,
        n_runs: 3,
        seed: 4,
        ..TrainConfig::default()
    }
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(f)
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let data = synthetic_blobs(6, 6.0, 1).unwrap();
    let cfg = small();
    let go = || {
        let runs = cnqe_train(&cfg, &data).unwrap();
        let best = select_median_run(&runs).unwrap().clone();
        let model = cfg.new_interface(&mut cnqe::rng::substream(0, "x")).unwrap();
        let q = qcnn_train(&cfg, &data, &model, &best.weights).unwrap();
        (runs, q)
    };
    let (r1, q1) = in_pool(1, go);
    let (r4, q4) = in_pool(4, go);
    assert_eq!(r1, r4);
    assert_eq!(q1, q4);
}

#[test]
fn median_run_sits_between_the_others() {
    let data = synthetic_blobs(6, 2.0, 3).unwrap();
    let runs = cnqe_train(&small(), &data).unwrap();
    let med = select_median_run(&runs).unwrap();
    let below = runs.iter().filter(|r| r.test_trace_distance < med.test_trace_distance).count();
    let above = runs.iter().filter(|r| r.test_trace_distance > med.test_trace_distance).count();
    assert!(below <= 1 && above <= 1);
}

#[test]
fn raw_tensor_training_matches_in_memory() {
    let data = synthetic_blobs(5, 8.0, 2).unwrap();
    // The raw format stores f32, so compare against the quantized split.
    let quantized = decode_raw_tensor(&encode_raw_tensor(&data)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("split.cnqe");
    cnqe::data::write_raw_tensor(&data, &path).unwrap();
    let loaded = cnqe::data::load_raw_tensor(&path).unwrap();
    assert_eq!(loaded.train_images(), quantized.train_images());
    let cfg = TrainConfig {
        n_runs: 1,
        interface: InterfaceKind::Gc,
        feature_map: FeatureMapKind::NcStack,
        ..small()
    };
    assert_eq!(cnqe_train(&cfg, &loaded).unwrap(), cnqe_train(&cfg, &quantized).unwrap());
}
