//! Run-config parsing must never panic; accepted configs must validate.

#![no_main]

use libfuzzer_sys::fuzz_target;
use sonoscope::harness::parse_config;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = parse_config(text) {
        assert!(cfg.validate().is_ok());
        assert!(!cfg.seeds.is_empty());
        assert!(cfg.combos.resolve().map(|c| !c.is_empty()).unwrap_or(false));
    }
});
