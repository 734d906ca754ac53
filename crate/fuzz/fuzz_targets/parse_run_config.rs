#![no_main]

use libfuzzer_sys::fuzz_target;
use svdro_bench::RunConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = RunConfig::from_toml(text) {
        let printed = cfg.to_toml().expect("accepted config serializes");
        let back = RunConfig::from_toml(&printed).expect("printed config parses");
        assert_eq!(back.to_toml().unwrap(), printed);
        let _ = cfg.resolve();
    }
});
