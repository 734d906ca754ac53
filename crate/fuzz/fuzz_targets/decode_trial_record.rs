#![no_main]

use libfuzzer_sys::fuzz_target;
use svdro_core::record::{decode_trial, encode_trial};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(rec) = decode_trial(text) {
        let again = encode_trial(&rec).expect("decoded record encodes");
        assert_eq!(decode_trial(&again).expect("re-encoded record decodes"), rec);
    }
});
