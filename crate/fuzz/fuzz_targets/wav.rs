//! WAV decoding must never panic or allocate absurdly on hostile input.

#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok((samples, rate)) = sonoscope::signal_io::parse_wav(data) {
        // A successful parse promises finite mono samples at a sane rate.
        assert!(rate > 0);
        assert!(samples.iter().all(|s| s.is_finite()));
    }
});
