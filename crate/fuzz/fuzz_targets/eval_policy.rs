#![no_main]

use std::sync::OnceLock;

use libfuzzer_sys::fuzz_target;
use vasp_attest::claims::{Endorsement, Evidence, ManifestRef, ReferenceManifest};
use vasp_attest::fixtures;
use vasp_attest::hwemu::{create_device, DIK_HANDLE};
use vasp_attest::policy::{evaluate, parse_policy, EvalInput};

struct Scene {
    evidence: Evidence,
    endorsements: Vec<Endorsement>,
    manifests: Vec<ReferenceManifest>,
}

fn scene() -> &'static Scene {
    static SCENE: OnceLock<Scene> = OnceLock::new();
    SCENE.get_or_init(|| {
        let e = fixtures::endorser();
        let mut d = create_device([3; 32], &ManifestRef::new(fixtures::MODEL_A), e.catalog()).unwrap();
        let k = d.create_key(DIK_HANDLE, false).unwrap();
        d.sign_transaction(k, b"tx").unwrap();
        let selection = d.full_selection(k);
        Scene {
            evidence: d.quote([7; 16], &selection).unwrap(),
            endorsements: vec![e.make_endorsement(&d.identity(), d.manifest_ref()).unwrap()],
            manifests: e.catalog().iter().cloned().collect(),
        }
    })
}

fuzz_target!(|data: &[u8]| {
    let Some((&now, rest)) = data.split_first() else {
        return;
    };
    let Ok(text) = std::str::from_utf8(rest) else {
        return;
    };
    let Ok(program) = parse_policy(text) else {
        return;
    };
    let s = scene();
    let input = EvalInput {
        evidence: &s.evidence,
        endorsements: &s.endorsements,
        manifests: &s.manifests,
        now: u64::from(now),
        challenge_issued_at: Some(0),
    };
    let verdict = evaluate(&program, &input);
    let again = evaluate(&program, &input);
    assert_eq!(verdict, again);
});
