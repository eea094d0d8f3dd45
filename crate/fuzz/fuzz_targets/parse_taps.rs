#![no_main]

use libfuzzer_sys::fuzz_target;
use snq::channel::{parse_taps, write_taps};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(taps) = parse_taps(text) {
        let again = parse_taps(&write_taps(&taps)).expect("written taps must parse");
        assert_eq!(again, taps);
    }
});
