#![no_main]

use libfuzzer_sys::fuzz_target;
use vortiline::config::parse_config;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(cfg) = parse_config(text) {
            let again = parse_config(&cfg.to_text()).expect("rendered config parses");
            assert_eq!(again, cfg);
        }
    }
});
