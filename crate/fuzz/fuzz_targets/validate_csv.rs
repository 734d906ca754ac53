#![no_main]

use libfuzzer_sys::fuzz_target;
use svdro_bench::tables::validate_csv;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = validate_csv(text);
    }
});
