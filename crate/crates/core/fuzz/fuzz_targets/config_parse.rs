#![no_main]

use cnls_vortex::config::parse_config;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(cfg) = parse_config(text) {
            cfg.validate().expect("parsed configurations are valid");
        }
    }
});
