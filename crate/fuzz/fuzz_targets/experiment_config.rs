#![no_main]

use cnqe::cli::ExperimentConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = ExperimentConfig::from_json(text) {
        // Accepted documents survive a round trip with the noise block already folded in.
        let back = ExperimentConfig::from_json(&serde_json::to_string(&cfg).unwrap()).expect("round trip");
        assert_eq!(back.train.noise, cfg.train.noise);
        assert_eq!(back.dataset, cfg.dataset);
    }
});
