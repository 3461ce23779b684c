//! Split manifests: no panics, and accepted input round-trips through the
//! canonical writer.

#![no_main]

use libfuzzer_sys::fuzz_target;
use sonoscope::signal_io::{parse_split_csv, split_to_csv};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(manifest) = parse_split_csv(text) else { return };
    let rendered = split_to_csv(&manifest);
    let again = parse_split_csv(&rendered).expect("rendered split reparses");
    assert_eq!(again.assignments, manifest.assignments);
    assert_eq!(again.seed, manifest.seed);
});
