#![no_main]

use libfuzzer_sys::fuzz_target;
use snq::experiments::{parse_config, write_config};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(spec) = parse_config(text) {
        let again = parse_config(&write_config(&spec)).expect("written config must parse");
        assert_eq!(again, spec);
    }
});
