use std::path::{Path, PathBuf};

use proptest::prelude::*;
use vasp_attest::netsim::{parse_scenario, Trace};
use vasp_attest::policy::parse_policy;
use vasp_attest::vectors::{decode_any, golden};

fn corpus(target: &str) -> Vec<(PathBuf, Vec<u8>)> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut seeds: Vec<(PathBuf, Vec<u8>)> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let p = e.unwrap().path();
            let bytes = std::fs::read(&p).unwrap();
            (p, bytes)
        })
        .collect();
    seeds.sort();
    assert!(!seeds.is_empty(), "{target}");
    seeds
}

fn text(bytes: &[u8]) -> &str {
    std::str::from_utf8(bytes).expect("text seed")
}

#[test]
fn wire_corpus_decodes_canonically() {
    for (path, bytes) in corpus("decode_wire") {
        let d = decode_any(&bytes).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(d.canonical, bytes);
    }
}

#[test]
fn policy_corpus_parses_or_reports_position() {
    let mut ok = 0;
    for (path, bytes) in corpus("parse_policy") {
        match parse_policy(text(&bytes)) {
            Ok(_) => ok += 1,
            Err(e) => assert!(e.line() >= 1 && e.col() >= 1, "{}", path.display()),
        }
    }
    assert_eq!(ok, 3);
    assert_eq!(corpus("eval_policy").len(), 7);
}

#[test]
fn scenario_corpus_parses() {
    for (path, bytes) in corpus("parse_scenario") {
        parse_scenario(text(&bytes)).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    }
}

#[test]
fn trace_corpus_round_trips() {
    for (path, bytes) in corpus("parse_trace") {
        let t = Trace::from_lines(text(&bytes)).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(Trace::from_lines(&t.to_lines()).unwrap(), t);
    }
}

fn mutated_vector() -> impl Strategy<Value = Vec<u8>> {
    let vectors: Vec<Vec<u8>> = golden().into_iter().map(|v| v.bytes).collect();
    (0..vectors.len(), any::<prop::sample::Index>(), any::<u8>(), 0usize..4).prop_map(
        move |(i, at, byte, op)| {
            let mut v = vectors[i].clone();
            let k = at.index(v.len());
            match op {
                0 => v[k] = byte,
                1 => v.truncate(k),
                2 => v.insert(k, byte),
                _ => {
                    v.remove(k);
                }
            }
            v
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn decoder_accepts_only_canonical_bytes(bytes in prop::collection::vec(any::<u8>(), 0..256)) {
        if let Ok(d) = decode_any(&bytes) {
            prop_assert_eq!(d.canonical, bytes);
        }
    }

    #[test]
    fn mutated_vectors_never_panic(bytes in mutated_vector()) {
        if let Ok(d) = decode_any(&bytes) {
            prop_assert_eq!(d.canonical, bytes);
        }
    }

    #[test]
    fn policy_parser_total(src in "[a-z_.=<>!&|()\\[\\], 0-9:\n#-]{0,120}") {
        if let Err(e) = parse_policy(&src) {
            prop_assert!(e.line() >= 1 && e.col() >= 1);
        }
    }

    #[test]
    fn policy_parser_total_on_rule_shapes(
        id in "[a-z][a-z0-9-]{0,6}",
        sev in prop::sample::select(vec!["mandatory", "advisory", "required", ""]),
        field in prop::sample::select(vec!["key_type.migratable", "freshness.age", "geo_location.lat", "manifest.hardware_class", "usage_log", "nope.x"]),
        op in prop::sample::select(vec!["==", "!=", "<=", ">=", "<", ">", "in", "="]),
        lit in prop::sample::select(vec!["true", "5", "-1.5", "hsm", "[1, 2]", "\"s\"", ""]),
    ) {
        let src = format!("rule {id} {sev}: {field} {op} {lit}\n");
        if let Err(e) = parse_policy(&src) {
            prop_assert_eq!(e.line(), 1);
            prop_assert!(e.col() >= 1 && e.col() <= src.len() + 1);
        }
    }

    #[test]
    fn scenario_parser_total(src in "[a-z0-9 =.\\-\n#*|]{0,160}") {
        if let Err(e) = parse_scenario(&src) {
            prop_assert!(e.line >= 1);
        }
    }

    #[test]
    fn trace_parser_total(src in "[0-9a-f\n ]{0,200}") {
        if let Ok(t) = Trace::from_lines(&src) {
            prop_assert_eq!(Trace::from_lines(&t.to_lines()).unwrap(), t);
        }
    }
}
