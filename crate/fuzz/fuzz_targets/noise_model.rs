#![no_main]

use cnqe::noise::{thermal_relaxation, NoiseModel};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(m) = NoiseModel::from_json(text) {
        for d in [m.dur_1q_us, m.dur_2q_us, m.dur_meas_us] {
            if let Ok(c) = thermal_relaxation(m.t1_us, m.t2_us, d) {
                assert!(c.completeness_error() < 1e-9);
            }
        }
    }
});
