#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(out) = cnqe::cli::stats_from_csv(&[text.to_string()]) {
        assert!(out.starts_with(cnqe::cli::STATS_HEADER));
    }
});
