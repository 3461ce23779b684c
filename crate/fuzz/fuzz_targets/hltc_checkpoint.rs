//! HLTC checkpoint decoding: no panics, and any accepted file re-encodes to
//! the exact original bytes.

#![no_main]

use libfuzzer_sys::fuzz_target;
use sonoscope::hltdnn::{decode_checkpoint, encode_checkpoint};

fuzz_target!(|data: &[u8]| {
    if let Ok(entries) = decode_checkpoint(data) {
        let refs: Vec<_> = entries.iter().map(|(n, t)| (n.clone(), t)).collect();
        assert_eq!(encode_checkpoint(&refs), data);
    }
});
