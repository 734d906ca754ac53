#![no_main]

use libfuzzer_sys::fuzz_target;
use svdro_core::EnvSpec;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(env) = EnvSpec::from_toml(text) {
        // Anything accepted must already be valid.
        env.validate().expect("from_toml returned an invalid env");
    }
});
