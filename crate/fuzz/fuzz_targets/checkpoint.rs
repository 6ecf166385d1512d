#![no_main]

use cnqe::cli::Checkpoint;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(c) = Checkpoint::from_json(text) {
        let back = Checkpoint::from_json(&serde_json::to_string(&c).unwrap()).expect("round trip");
        assert_eq!(back.weights.len(), c.weights.len());
        c.model().expect("validated checkpoint builds its model");
    }
});
