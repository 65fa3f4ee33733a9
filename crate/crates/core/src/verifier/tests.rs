use std::sync::Arc;

use super::*;
use crate::claims::{ClaimRequest, ManifestRef};
use crate::fixtures;
use crate::hwemu::{create_device, DeviceState, DIK_HANDLE};
use crate::policy::parse_policy;
use crate::wire::WireType;

fn setup() -> (Verifier, DeviceState, crate::claims::KeyHandle) {
    let e = fixtures::endorser();
    let v = fixtures::verifier("asp", [1; 32], &e);
    let mut d = create_device([2; 32], &ManifestRef::new(fixtures::MODEL_A), e.catalog()).unwrap();
    let k = d.create_key(DIK_HANDLE, false).unwrap();
    v.register_endorsement(e.make_endorsement(&d.identity(), d.manifest_ref()).unwrap())
        .unwrap();
    (v, d, k)
}

fn quote(d: &DeviceState, k: crate::claims::KeyHandle, nonce: Nonce) -> Evidence {
    d.quote(
        nonce,
        &[
            ClaimRequest::KeyProvenance(k),
            ClaimRequest::KeyType(k),
            ClaimRequest::SystemConfig,
        ],
    )
    .unwrap()
}

#[test]
fn challenges_are_distinct_and_reproducible() {
    let (v, _, _) = setup();
    let a = v.new_challenge("rp");
    let b = v.new_challenge("rp");
    assert_ne!(a.nonce, b.nonce);
    assert_ne!(a.session_id, b.session_id);
    assert!(!v.session(a.session_id).unwrap().consumed);

    let (w, _, _) = setup();
    assert_eq!(w.new_challenge("rp"), a);
    assert_eq!(w.new_challenge("rp"), b);
}

#[test]
fn valid_evidence_passes_at_level_4() {
    let (v, d, k) = setup();
    let c = v.new_challenge("rp");
    let r = v.appraise(c.session_id, &quote(&d, k, c.nonce), "baseline");
    assert!(r.passed(), "{r:?}");
    assert_eq!(r.loa, Some(4));
    assert!(verify_result(&v.public_key(), &r));
    assert!(v.session(c.session_id).unwrap().consumed);
}

#[test]
fn replay_expiry_and_nonce_mismatch_fail_signed() {
    let (v, d, k) = setup();
    let c = v.new_challenge("rp");
    let ev = quote(&d, k, c.nonce);
    assert!(v.appraise(c.session_id, &ev, "baseline").passed());
    let again = v.appraise(c.session_id, &ev, "baseline");
    assert!(!again.passed());
    assert_eq!(again.failed_rules, [SessionFailure::Replay.code()]);
    assert!(verify_result(&v.public_key(), &again));

    let c2 = v.new_challenge("rp");
    v.set_time(v.now() + DEFAULT_NONCE_TTL + 1);
    let stale = v.appraise(c2.session_id, &quote(&d, k, c2.nonce), "baseline");
    assert_eq!(stale.failed_rules, [SessionFailure::Expired.code()]);

    let c3 = v.new_challenge("rp");
    let c4 = v.new_challenge("rp");
    let crossed = v.appraise(c3.session_id, &quote(&d, k, c4.nonce), "baseline");
    assert_eq!(crossed.failed_rules, [SessionFailure::NonceMismatch.code()]);
    // The failed attempt burned c3; c4 remains usable.
    assert!(v
        .appraise(c4.session_id, &quote(&d, k, c4.nonce), "baseline")
        .passed());

    let unknown = v.appraise(999, &ev, "baseline");
    assert_eq!(
        unknown.failed_rules,
        [SessionFailure::UnknownSession.code()]
    );
    assert_eq!(v.result_log().len(), 6);
}

#[test]
fn chain_and_policy_failures_carry_codes() {
    let (v, d, k) = setup();
    let c = v.new_challenge("rp");
    let mut ev = quote(&d, k, c.nonce);
    ev.counter += 1;
    let r = v.appraise(c.session_id, &ev, "baseline");
    assert_eq!(r.failed_rules, ["chain.bad_evidence_signature"]);

    let c = v.new_challenge("rp");
    let r = v.appraise(c.session_id, &quote(&d, k, c.nonce), "nonexistent");
    assert_eq!(r.failed_rules, [UNKNOWN_POLICY]);

    v.install_policy(
        "needs-usage",
        parse_policy("rule usage mandatory: usage_log.chain_valid == true").unwrap(),
    );
    let c = v.new_challenge("rp");
    let r = v.appraise(c.session_id, &quote(&d, k, c.nonce), "needs-usage");
    assert_eq!(r.failed_rules, ["usage:missing_claim:usage_log"]);
}

#[test]
fn unendorsed_device_fails_chain() {
    let e = fixtures::endorser();
    let v = fixtures::verifier("asp", [1; 32], &e);
    let mut d = create_device([9; 32], &ManifestRef::new(fixtures::MODEL_A), e.catalog()).unwrap();
    let k = d.create_key(DIK_HANDLE, false).unwrap();
    let c = v.new_challenge("rp");
    let r = v.appraise(c.session_id, &quote(&d, k, c.nonce), "baseline");
    assert_eq!(r.failed_rules, ["chain.no_endorsement"]);
}

#[test]
fn registration_checks_roots_and_is_idempotent() {
    let (v, d, _) = setup();
    let e = fixtures::endorser();
    let end = e.make_endorsement(&d.identity(), d.manifest_ref()).unwrap();
    assert_eq!(v.register_endorsement(end.clone()), Ok(Ack::AlreadyKnown));

    let rogue = fixtures::endorser_with_seed(&[0x66; 32]);
    let forged = rogue
        .make_endorsement(&d.identity(), d.manifest_ref())
        .unwrap();
    assert_eq!(
        v.register_endorsement(forged),
        Err(RegistrationError::BadSignature)
    );

    let mut other = crate::claims::Endorser::new("mfr-unknown", &[5; 32]);
    other.publish_factory_manifest(
        fixtures::MODEL_A,
        crate::claims::HardwareClass::TrustedHardware,
    );
    let unknown = other
        .make_endorsement(&d.identity(), d.manifest_ref())
        .unwrap();
    assert_eq!(
        v.register_endorsement(unknown),
        Err(RegistrationError::UnknownEndorser("mfr-unknown".into()))
    );
    let m = e.catalog().iter().next().unwrap().clone();
    assert_eq!(v.register_manifest(m), Ok(Ack::AlreadyKnown));
}

#[test]
fn messages_round_trip_canonically() {
    let (v, d, k) = setup();
    let req = ChallengeRequest {
        requester_id: "vasp-1".into(),
    };
    assert_eq!(ChallengeRequest::from_bytes(&req.to_bytes()).unwrap(), req);
    let resp = v.handle(&req);
    assert_eq!(
        ChallengeResponse::from_bytes(&resp.to_bytes()).unwrap(),
        resp
    );
    let sub = EvidenceSubmission {
        session_id: resp.session_id,
        policy_id: "baseline".into(),
        evidence: quote(&d, k, resp.nonce),
    };
    let bytes = sub.to_bytes();
    assert_eq!(EvidenceSubmission::from_bytes(&bytes).unwrap(), sub);
    let delivery = v.handle_submission(&EvidenceSubmission::from_bytes(&bytes).unwrap());
    assert!(delivery.result.passed());
    assert_eq!(
        ResultDelivery::from_bytes(&delivery.to_bytes()).unwrap(),
        delivery
    );
}

#[test]
fn concurrent_submissions_consume_each_session_once() {
    let (v, d, k) = setup();
    let v = Arc::new(v);
    let c = v.new_challenge("rp");
    let ev = quote(&d, k, c.nonce);
    let threads: Vec<_> = (0..8)
        .map(|_| {
            let v = Arc::clone(&v);
            let ev = ev.clone();
            std::thread::spawn(move || v.appraise(c.session_id, &ev, "baseline").passed())
        })
        .collect();
    let passes = threads
        .into_iter()
        .map(|t| t.join().unwrap())
        .filter(|p| *p)
        .count();
    assert_eq!(passes, 1);
    assert_eq!(v.result_log().len(), 8);
}
