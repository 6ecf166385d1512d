#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(split) = cnqe::data::decode_raw_tensor(data) {
        // Accepted pixels are stored as f32, so re-encoding is lossless.
        let again = cnqe::data::decode_raw_tensor(&cnqe::data::encode_raw_tensor(&split)).expect("re-encoded tensor decodes");
        assert_eq!(again.train.len(), split.train.len());
        assert_eq!(again.test.len(), split.test.len());
        assert!(again.train.iter().zip(&split.train).all(|(a, b)| a.label == b.label && a.pixels == b.pixels));
    }
});
