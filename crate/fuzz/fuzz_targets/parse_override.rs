#![no_main]

use libfuzzer_sys::fuzz_target;
use svdro_bench::config::parse_override;
use svdro_bench::RunConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(patch) = parse_override(text) {
        assert!(!patch.0.is_empty());
        let _ = RunConfig::load(None, &[patch]);
    }
});
