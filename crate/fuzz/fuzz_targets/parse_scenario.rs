#![no_main]

use libfuzzer_sys::fuzz_target;
use vasp_attest::netsim::parse_scenario;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Err(e) = parse_scenario(text) {
            assert!(e.line >= 1);
        }
    }
});
