#![no_main]

use fairdiv_core::harness::ExperimentConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = ExperimentConfig::from_json(text) {
        cfg.validate().expect("parsed configs are valid");
        assert!(!cfg.cells().is_empty());
    }
});
