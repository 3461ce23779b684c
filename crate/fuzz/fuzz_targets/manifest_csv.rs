//! Manifest parsing: no panics, and accepted input survives a
//! render-and-reparse round trip.

#![no_main]

use libfuzzer_sys::fuzz_target;
use sonoscope::signal_io::manifest::MANIFEST_HEADER;
use sonoscope::signal_io::parse_manifest;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(entries) = parse_manifest(text) else { return };
    let mut rendered = String::from(MANIFEST_HEADER);
    rendered.push('\n');
    for e in &entries {
        rendered.push_str(&format!("{},{},{}\n", e.recording_id, e.path, e.class_label));
    }
    let again = parse_manifest(&rendered).expect("rendered manifest reparses");
    assert_eq!(again, entries);
});
