#![no_main]

use cnqe::cli::LayoutFile;
use cnqe::fourier::{amplitude_spectra, reconstruct_amplitude};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(file) = LayoutFile::from_json(text) else { return };
    let Ok(layout) = file.to_layout() else { return };
    // Keep each input cheap; large layouts are covered by the frequency cap.
    if layout.n_qubits > 2 || layout.layers.len() > 3 || layout.input_dim > 4 {
        return;
    }
    let Ok(spectra) = amplitude_spectra(&layout) else { return };
    let x: Vec<f64> = (0..layout.input_dim).map(|c| 0.37 * c as f64 - 0.5).collect();
    let direct = layout.simulate(&x).expect("validated layout simulates");
    for (spec, amp) in spectra.iter().zip(&direct) {
        let rec = reconstruct_amplitude(spec, &x).unwrap();
        assert!((rec - amp).norm() < 1e-8, "{rec} vs {amp}");
    }
});
