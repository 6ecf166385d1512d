#![no_main]

use cnqe::cli::output::history_csv;
use cnqe::cli::parse_history_csv;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(entries) = parse_history_csv(text) {
        // Names containing separators or quotes are not re-escaped by the writer.
        let plain = entries.iter().all(|e| {
            let ok = |s: &str| !s.is_empty() && !s.contains([',', '"', '\n', '\r']) && s.trim() == s;
            ok(&e.phase) && ok(&e.metric) && !e.value.is_nan()
        });
        if plain {
            assert_eq!(parse_history_csv(&history_csv(&entries)).expect("round trip"), entries);
        }
    }
});
