#![no_main]

use libfuzzer_sys::fuzz_target;
use vasp_attest::crypto::PublicKey;
use vasp_attest::vectors::{decode_any, verify_signature};

fuzz_target!(|data: &[u8]| {
    if let Ok(d) = decode_any(data) {
        assert_eq!(d.canonical, data);
        let _ = verify_signature(data, &PublicKey([0; 32]));
    }
});
