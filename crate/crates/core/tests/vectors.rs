use std::path::Path;

use vasp_attest::vectors::{decode_any, golden, type_name, verify_signature, WIRE_TYPES};

fn shipped(file: &str) -> Vec<u8> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("vectors").join(file);
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    hex::decode(text.trim()).expect("vector file is hex")
}

#[test]
fn golden_is_deterministic_and_covers_every_type() {
    let a = golden();
    let b = golden();
    assert_eq!(a, b);
    let mut names: Vec<&str> = a.iter().map(|v| v.type_name).collect();
    names.sort();
    let mut all: Vec<&str> = WIRE_TYPES.iter().map(|(_, n)| *n).collect();
    all.sort();
    assert_eq!(names, all);
}

#[test]
fn checked_in_vectors_match_golden() {
    for v in golden() {
        assert_eq!(shipped(&v.file_name()), v.bytes, "{}", v.type_name);
    }
    let files = std::fs::read_dir(Path::new(env!("CARGO_MANIFEST_DIR")).join("vectors"))
        .unwrap()
        .count();
    assert_eq!(files, WIRE_TYPES.len());
}

#[test]
fn vectors_round_trip_through_generic_decoder() {
    for v in golden() {
        let d = decode_any(&v.bytes).unwrap_or_else(|e| panic!("{}: {e}", v.type_name));
        assert_eq!(d.type_name, v.type_name);
        assert_eq!(type_name(v.bytes[0]), Some(v.type_name));
        assert_eq!(d.canonical, v.bytes, "{}", v.type_name);
        assert!(d.json.is_object(), "{}", v.type_name);
    }
}

#[test]
fn signed_vectors_verify_under_their_signer() {
    let mut signed = 0;
    for v in golden() {
        let Some(signer) = v.signer else { continue };
        assert_eq!(verify_signature(&v.bytes, &signer), Ok(Some(true)), "{}", v.type_name);
        signed += 1;
    }
    assert!(signed >= 12, "{signed}");
}

#[test]
fn every_single_byte_mutation_breaks_signature_or_decoding() {
    for v in golden() {
        let Some(signer) = v.signer else { continue };
        for i in 0..v.bytes.len() {
            for flip in [0x01u8, 0x80, 0xff] {
                let mut m = v.bytes.clone();
                m[i] ^= flip;
                let ok = matches!(verify_signature(&m, &signer), Ok(Some(true)));
                assert!(!ok, "{} byte {i} ^ {flip:#04x} still verifies", v.type_name);
            }
        }
    }
}

#[test]
fn truncation_and_extension_are_rejected() {
    for v in golden() {
        for n in 0..v.bytes.len() {
            assert!(decode_any(&v.bytes[..n]).is_err(), "{} prefix {n}", v.type_name);
        }
        let mut longer = v.bytes.clone();
        longer.push(0);
        assert!(decode_any(&longer).is_err(), "{}", v.type_name);
    }
}

#[test]
fn accepted_mutations_are_canonical() {
    for v in golden() {
        for i in 0..v.bytes.len() {
            let mut m = v.bytes.clone();
            m[i] ^= 0x01;
            if let Ok(d) = decode_any(&m) {
                assert_eq!(d.canonical, m, "{} byte {i}", v.type_name);
            }
        }
    }
}
