use super::*;
use crate::claims::{verify_chain, ClaimKind};
use crate::crypto::verify;
use crate::fixtures;
use crate::wire::WireType;

fn hex(d: Digest) -> String {
    d.to_hex()
}

fn device(seed: u8) -> DeviceState {
    let e = fixtures::endorser();
    create_device(
        [seed; 32],
        &ManifestRef::new(fixtures::MODEL_A),
        e.catalog(),
    )
    .unwrap()
}

#[test]
fn fresh_device_initial_state() {
    let d = device(1);
    assert_eq!(d.keys().count(), 2);
    assert_eq!(d.counter(), 0);
    assert!(d.pcr_bank().iter().all(|p| *p == Digest::ZERO));
    assert_eq!(d.key(EK_HANDLE).unwrap().kind, KeyKind::EndorsementKey);
    let dik = d.key(DIK_HANDLE).unwrap();
    assert_eq!(dik.parent, Some(EK_HANDLE));
    assert!(!dik.migratable);
}

#[test]
fn creation_is_deterministic() {
    let a = device(1);
    let b = device(1);
    assert_eq!(a.device_id(), b.device_id());
    assert_eq!(a.to_bytes(), b.to_bytes());
    assert_ne!(a.device_id(), device(2).device_id());
}

#[test]
fn unknown_manifest_rejected() {
    let e = fixtures::endorser();
    let err = create_device([1; 32], &ManifestRef::new("no-such-model"), e.catalog()).unwrap_err();
    assert_eq!(
        err,
        HwError::UnknownManifest(ManifestRef::new("no-such-model"))
    );
}

#[test]
fn application_key_chain_reaches_ek() {
    let mut d = device(3);
    let k = d.create_key(DIK_HANDLE, false).unwrap();
    let chain = d.provenance_chain(k);
    assert_eq!(chain.len(), 3);
    let ek = d.public_key(EK_HANDLE).unwrap();
    assert!(ChainLink::chain_reaches(&chain, &ek));
    assert_eq!(d.counter(), 0);
}

#[test]
fn create_key_under_erased_or_unknown_parent() {
    let mut d = device(3);
    let k = d.create_key(DIK_HANDLE, false).unwrap();
    d.erase_key(k).unwrap();
    assert_eq!(d.create_key(k, false), Err(HwError::ParentErased(k)));
    assert_eq!(
        d.create_key(KeyHandle(42), false),
        Err(HwError::UnknownParent(KeyHandle(42)))
    );
}

#[test]
fn usage_chain_matches_frozen_sha256_values() {
    let mut d = device(4);
    let k = d.create_key(DIK_HANDLE, false).unwrap();
    let pk = d.public_key(k).unwrap();
    let sa = d.sign_transaction(k, b"msg-A").unwrap();
    let sb = d.sign_transaction(k, b"msg-B").unwrap();
    assert!(verify(&pk, b"msg-A", &sa));
    assert!(verify(&pk, b"msg-B", &sb));
    let counters: Vec<u64> = d.usage_log().iter().map(|e| e.counter_value).collect();
    assert_eq!(counters, vec![1, 2]);
    // Computed independently with Python's hashlib.
    assert_eq!(
        hex(d.usage_log()[0].pcr_snapshot),
        "c867af843be1b7e9ee8c7e297c158954ff70d005034ab175c710fbcc39068abf"
    );
    assert_eq!(
        hex(d.pcr(USAGE_PCR).unwrap()),
        "f17df2909029ddf459388e95eebc0de5bbe26020fe3785a9be834229ab528dad"
    );
}

#[test]
fn identity_keys_cannot_sign_transactions() {
    let mut d = device(4);
    assert_eq!(
        d.sign_transaction(EK_HANDLE, b"x"),
        Err(HwError::WrongKeyRole(EK_HANDLE))
    );
    assert_eq!(
        d.sign_transaction(DIK_HANDLE, b"x"),
        Err(HwError::WrongKeyRole(DIK_HANDLE))
    );
    assert_eq!(d.counter(), 0);
}

#[test]
fn pcr_extend_from_zero() {
    let mut d = device(5);
    let m = Digest::of(b"measurement");
    let v = d.pcr_extend(0, m).unwrap();
    assert_eq!(
        hex(v),
        "a33935fd5b102ab5d5202b3776ad7ff3e7d07f00f080c83b1b5cabc335f54e3d"
    );
    assert_eq!(d.pcr_extend(8, m), Err(HwError::IndexOutOfRange(8)));
}

#[test]
fn pcr_extend_is_order_sensitive() {
    let (m1, m2) = (Digest::of(b"one"), Digest::of(b"two"));
    let mut a = device(5);
    let mut b = device(5);
    a.pcr_extend(2, m1).unwrap();
    a.pcr_extend(2, m2).unwrap();
    b.pcr_extend(2, m2).unwrap();
    b.pcr_extend(2, m1).unwrap();
    assert_ne!(a.pcr(2).unwrap(), b.pcr(2).unwrap());
}

#[test]
fn quote_reports_key_type_and_signs() {
    let e = fixtures::endorser();
    let mut d = device(6);
    let k = d.create_key(DIK_HANDLE, false).unwrap();
    let ev = d
        .quote(
            [9; 16],
            &[ClaimRequest::KeyType(k), ClaimRequest::KeyProvenance(k)],
        )
        .unwrap();
    match &ev.claims[0].body {
        ClaimBody::KeyType {
            migratable,
            creation_origin,
            ..
        } => {
            assert!(!migratable);
            assert_eq!(*creation_origin, CreationOrigin::GeneratedOnboard);
        }
        other => panic!("unexpected {other:?}"),
    }
    let end = e.make_endorsement(&d.identity(), d.manifest_ref()).unwrap();
    assert!(verify_chain(&ev, Some(&end), &e.root_key()).ok());

    let mut tampered = ev.clone();
    tampered.counter += 1;
    assert!(!verify_chain(&tampered, Some(&end), &e.root_key()).ok());
}

#[test]
fn quotes_with_different_nonces_share_claim_bodies() {
    let d = device(6);
    let sel = [ClaimRequest::SystemConfig, ClaimRequest::UsageLog];
    let a = d.quote([1; 16], &sel).unwrap();
    let b = d.quote([2; 16], &sel).unwrap();
    assert_eq!(a.claims, b.claims);
    assert_ne!(a.signature, b.signature);
    assert_ne!(a.to_bytes(), b.to_bytes());
}

#[test]
fn empty_selection_rejected() {
    assert_eq!(device(6).quote([0; 16], &[]), Err(HwError::EmptySelection));
}

#[test]
fn export_import_round_trip() {
    let mut src = device(7);
    let mut dst = device(8);
    let k = src.create_key(DIK_HANDLE, true).unwrap();
    let pk = src.public_key(k).unwrap();
    let blob = src.export_key(k, b"hunter2").unwrap();
    assert!(src.sign_transaction(k, b"still usable").is_ok());

    let before = dst.clone();
    assert_eq!(dst.import_blob(&blob, b"wrong"), Err(HwError::AuthFailure));
    assert_eq!(dst, before);

    let h = dst.import_blob(&blob, b"hunter2").unwrap();
    assert_eq!(dst.public_key(h).unwrap(), pk);
    let sig = dst.sign_transaction(h, b"restored").unwrap();
    assert!(verify(&pk, b"restored", &sig));

    let ev = dst
        .quote([0; 16], &[ClaimRequest::KeyProvenance(h)])
        .unwrap();
    match &ev.claims[0].body {
        ClaimBody::KeyProvenance {
            creation_origin,
            source_device,
            ..
        } => {
            assert_eq!(*creation_origin, CreationOrigin::Injected);
            assert_eq!(*source_device, Some(src.device_id()));
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn non_migratable_export_always_fails() {
    let mut d = device(9);
    let k = d.create_key(DIK_HANDLE, false).unwrap();
    for secret in [&b""[..], b"a", b"long secret"] {
        assert_eq!(d.export_key(k, secret), Err(HwError::NonMigratableKey(k)));
    }
    assert_eq!(
        d.export_key(EK_HANDLE, b"x"),
        Err(HwError::NonMigratableKey(EK_HANDLE))
    );
}

#[test]
fn import_manifest_mismatch_and_integrity() {
    let e = fixtures::endorser();
    let mut src = device(10);
    let mut other =
        create_device([11; 32], &ManifestRef::new(fixtures::MODEL_B), e.catalog()).unwrap();
    let k = src.create_key(DIK_HANDLE, true).unwrap();
    let blob = src.export_key(k, b"pw").unwrap();
    assert!(matches!(
        other.import_blob(&blob, b"pw"),
        Err(HwError::ManifestMismatch { .. })
    ));

    let mut dst = device(12);
    let mut bad = blob.clone();
    bad.integrity_tag[0] ^= 0x01;
    assert_eq!(dst.import_blob(&bad, b"pw"), Err(HwError::IntegrityFailure));
    let mut bad = blob.clone();
    let last = bad.payload.len() - 1;
    bad.payload[last] ^= 0x80;
    assert_eq!(dst.import_blob(&bad, b"pw"), Err(HwError::IntegrityFailure));
}

#[test]
fn erasure_receipt_and_lockout() {
    let mut d = device(13);
    let k = d.create_key(DIK_HANDLE, false).unwrap();
    d.sign_transaction(k, b"before").unwrap();
    let receipt = d.erase_key(k).unwrap();
    assert!(receipt.verify(&d.identity().identity_key));
    assert_eq!(receipt.handle(), Some(k));
    match receipt.claim.body {
        ClaimBody::Erasure {
            counter_at_erasure, ..
        } => assert_eq!(counter_at_erasure, 1),
        _ => panic!("wrong claim kind"),
    }
    assert_eq!(d.sign_transaction(k, b"after"), Err(HwError::KeyErased(k)));
    assert_eq!(d.erase_key(k), Err(HwError::UnknownKey(k)));
    assert!(d.key(k).is_none() && d.is_erased(k));

    let ev = d.quote([0; 16], &[ClaimRequest::Erasure(k)]).unwrap();
    assert_eq!(ev.claims[0].kind(), ClaimKind::Erasure);
}

#[test]
fn identity_keys_cannot_be_erased() {
    let mut d = device(13);
    assert_eq!(
        d.erase_key(DIK_HANDLE),
        Err(HwError::WrongKeyRole(DIK_HANDLE))
    );
}

#[test]
fn signature_origin_and_location_claims() {
    let mut d = device(14);
    let k = d.create_key(DIK_HANDLE, false).unwrap();
    d.sign_transaction(k, b"tx1").unwrap();
    let digest = Digest::of(b"tx1");
    let ev = d
        .quote([0; 16], &[ClaimRequest::SignatureOrigin(digest)])
        .unwrap();
    assert!(matches!(
        ev.claims[0].body,
        ClaimBody::SignatureOrigin {
            counter_value: 1,
            ..
        }
    ));
    assert_eq!(
        d.quote([0; 16], &[ClaimRequest::GeoLocation]),
        Err(HwError::LocationUnavailable)
    );
    d.set_location(GeoPoint::from_degrees(47.37, 8.54, 408.0));
    assert!(d.quote([0; 16], &[ClaimRequest::GeoLocation]).is_ok());
}

#[test]
fn storage_image_round_trips_and_validates() {
    let mut d = device(15);
    let k = d.create_key(DIK_HANDLE, true).unwrap();
    d.sign_transaction(k, b"a").unwrap();
    d.install_config(vec![Component::new("firmware", "2.0.0")]);
    let bytes = d.to_bytes();
    let restored = DeviceState::restore(&bytes).unwrap();
    assert_eq!(restored, d);
    assert_eq!(restored.to_bytes(), bytes);
}
