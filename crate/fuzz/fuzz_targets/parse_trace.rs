#![no_main]

use libfuzzer_sys::fuzz_target;
use vasp_attest::netsim::Trace;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(trace) = Trace::from_lines(text) {
            let again = Trace::from_lines(&trace.to_lines()).unwrap();
            assert_eq!(again, trace);
            let _ = trace.render_human();
        }
    }
});
