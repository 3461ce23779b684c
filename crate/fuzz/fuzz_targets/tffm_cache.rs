//! TFFM cache decoding: no panics, and any accepted file re-encodes to the
//! exact original bytes (the format has a single canonical form).

#![no_main]

use libfuzzer_sys::fuzz_target;
use sonoscope::tf_features::{decode_feature_map, encode_feature_map};

fuzz_target!(|data: &[u8]| {
    if let Ok(map) = decode_feature_map(data) {
        assert_eq!(encode_feature_map(&map), data);
    }
});
