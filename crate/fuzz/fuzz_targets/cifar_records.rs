#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(records) = cnqe::data::parse_cifar_records(data, "fuzz") {
        assert_eq!(records.len() * 3073, data.len());
        assert!(records.iter().all(|(label, pixels)| *label < 10 && pixels.len() == 3072));
    }
});
