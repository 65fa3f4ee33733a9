#![no_main]

use libfuzzer_sys::fuzz_target;
use vasp_attest::policy::parse_policy;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Err(e) = parse_policy(text) {
            assert!(e.line() >= 1 && e.col() >= 1);
        }
    }
});
