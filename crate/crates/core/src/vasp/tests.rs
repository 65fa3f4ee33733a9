use proptest::prelude::*;

use super::*;
use crate::claims::{Endorser, ErasureReceipt, Evidence, Nonce};
use crate::fixtures::{self, MODEL_A, MODEL_B, SOFT_WALLET};
use crate::hwemu::{DeviceState, HwResult};
use crate::ledger::{ToyLedger, Transaction};
use crate::verifier::Verifier;
use crate::wire::WireType;

struct Env {
    endorser: Endorser,
    verifier: Verifier,
    vasp: Vasp,
    ledger: ToyLedger,
}

fn env() -> Env {
    let endorser = fixtures::endorser();
    let verifier = fixtures::verifier("asp", [1; 32], &endorser);
    let vasp = Vasp::new(VaspConfig::new("vasp-1", [0x11; 32]));
    let mut ledger = ToyLedger::new(2);
    ledger.register_sweep_authority(vasp.signing_key());
    Env {
        endorser,
        verifier,
        vasp,
        ledger,
    }
}

impl Env {
    fn wallet(&self, seed: u8, model: &str) -> DeviceState {
        fixtures::wallet([seed; 32], model, &self.endorser, &self.verifier)
    }

    fn onboard(&mut self, name: &str, device: &mut DeviceState, migratable: bool) -> Onboarded {
        let key = device.create_key(DIK_HANDLE, migratable).unwrap();
        self.vasp
            .onboard_customer(&request(name, key), device, &self.verifier)
            .unwrap()
    }
}

fn request(name: &str, key: KeyHandle) -> OnboardRequest<'_> {
    OnboardRequest {
        name,
        key,
        operator: Operator::Customer,
        backup_secret: b"customer-secret",
    }
}

fn signed(device: &mut DeviceState, handle: KeyHandle, body: TxBody) -> Transaction {
    let sig = device
        .sign_transaction(handle, &body.signing_bytes())
        .unwrap();
    Transaction::owner_signed(body, sig)
}

#[test]
fn vasp_code_is_last_four_bytes() {
    let mut key = [0u8; 32];
    key[28..].copy_from_slice(&[0xDE, 0xAD, 0xBE, 0xEF]);
    assert_eq!(derive_vasp_code(&key), Ok(0xDEAD_BEEF));
    assert_eq!(derive_vasp_code(&[0u8; 32]), Ok(0));
    assert_eq!(derive_vasp_code(&[1, 2, 3]), Err(VaspError::KeyTooShort(3)));
    assert_eq!(derive_vasp_code(&[9, 1, 2, 3, 4]), Ok(0x0102_0304));
}

#[test]
fn onboarding_issues_marked_certificate() {
    let mut e = env();
    let mut d = e.wallet(2, MODEL_A);
    let out = e.onboard("alice", &mut d, false);
    assert!(!out.rekeyed);
    assert_eq!(out.result.loa, Some(4));
    assert!(out.certificate.non_migratable_marking);
    assert!(out.certificate.provenance_known_marking);
    assert_eq!(vaan_code(out.vaan), e.vasp.code());
    assert_eq!(
        vaan_code(out.vaan),
        derive_vasp_code(e.vasp.signing_key().as_bytes()).unwrap()
    );
    let acct = e.vasp.account(out.vaan).unwrap();
    assert_eq!(acct.status, AccountStatus::Active);
    assert_eq!(acct.keys[0].ownership, Ownership::CustomerOwned);
    assert_eq!(acct.keys[0].operator, Operator::Customer);
    assert!(acct.keys[0].backup_blob.is_none());
    assert!(e
        .vasp
        .certificate_sound(&out.certificate, &e.verifier.public_key()));

    let key = d.create_key(DIK_HANDLE, false).unwrap();
    assert_eq!(
        e.vasp
            .onboard_customer(&request("alice", key), &mut d, &e.verifier),
        Err(VaspError::AlreadyOnboarded)
    );
    assert_eq!(
        e.vasp
            .onboard_customer(&request(" ", key), &mut d, &e.verifier),
        Err(VaspError::PartyInfoIncomplete)
    );
}

#[test]
fn migratable_key_is_backed_up_and_graded_lower() {
    let mut e = env();
    let mut d = e.wallet(2, MODEL_A);
    let out = e.onboard("bob", &mut d, true);
    assert_eq!(out.result.loa, Some(2));
    assert!(!out.certificate.non_migratable_marking);
    let acct = e.vasp.account(out.vaan).unwrap();
    assert!(acct.keys[0].backup_blob.is_some());
}

#[test]
fn imported_key_is_replaced_by_an_onboard_key() {
    let mut e = env();
    let mut other = e.wallet(3, MODEL_A);
    let moved = other.create_key(DIK_HANDLE, true).unwrap();
    let blob = other.export_key(moved, b"s").unwrap();
    let mut d = e.wallet(2, MODEL_A);
    let injected = d.import_blob(&blob, b"s").unwrap();

    let out = e
        .vasp
        .onboard_customer(&request("carol", injected), &mut d, &e.verifier)
        .unwrap();
    assert!(out.rekeyed);
    assert_ne!(out.key, injected);
    assert_eq!(
        out.certificate.subject_public_key,
        d.public_key(out.key).unwrap()
    );
    assert!(out.certificate.non_migratable_marking);
    // The first appraisal failed on provenance and was archived too.
    assert!(e.vasp.archive().iter().any(|r| !r.passed()));
}

#[test]
fn software_wallet_cannot_preauthorize() {
    let mut e = env();
    let mut d = e.wallet(2, SOFT_WALLET);
    let out = e.onboard("dave", &mut d, false);
    assert_eq!(out.result.loa, Some(1));
    let dest = Beneficiary::Address(PublicKey([7; 32]));
    let decision = e
        .vasp
        .preauthorize_direct_transfer(out.vaan, &dest, 10, 0, &WalletLocation::Unknown)
        .unwrap();
    assert_eq!(
        decision,
        Decision::Rejected(RejectReason::InsufficientLoa { have: 1, need: 3 })
    );
}

#[test]
fn daily_limit_applies_per_logical_day() {
    let mut e = env();
    let mut a = e.wallet(2, MODEL_A);
    let mut b = e.wallet(3, MODEL_A);
    let alice = e.onboard("alice", &mut a, false);
    let bob = e.onboard("bob", &mut b, false);
    let dest = Beneficiary::Party(e.vasp.account(bob.vaan).unwrap().party.clone());
    let none = WalletLocation::Unknown;

    let first = e
        .vasp
        .preauthorize_direct_transfer(alice.vaan, &dest, 2500, 10, &none)
        .unwrap();
    let Decision::Approved(approval) = first else {
        panic!("{first:?}")
    };
    assert_eq!(approval.post_verification_deadline, None);
    assert_eq!(
        approval.notify.window_end,
        10 + e.vasp.policy().preauth_window
    );
    assert!(crate::crypto::verify(
        &e.vasp.signing_key(),
        &approval.notify.signing_payload(),
        &approval.notify.signature
    ));
    let second = e
        .vasp
        .preauthorize_direct_transfer(alice.vaan, &dest, 2500, 20, &none)
        .unwrap();
    assert_eq!(
        second,
        Decision::Rejected(RejectReason::DailyLimit {
            spent: 2500,
            limit: 3000
        })
    );
    let next_day = e
        .vasp
        .preauthorize_direct_transfer(alice.vaan, &dest, 2500, 1010, &none)
        .unwrap();
    assert!(next_day.is_approved());
}

#[test]
fn strict_counterparty_without_info_channel_is_rejected() {
    let mut e = env();
    let mut a = e.wallet(2, MODEL_A);
    let alice = e.onboard("alice", &mut a, false);

    let mut strict_cfg = VaspConfig::new("vasp-ch", [0x22; 32]);
    strict_cfg.jurisdiction = Jurisdiction::strict("ch");
    let mut strict = Vasp::new(strict_cfg);
    let mut peer = strict.peer_info();
    peer.info_channel = false;
    e.vasp.register_peer(peer);
    strict.register_peer(e.vasp.peer_info());
    let mut b = e.wallet(3, MODEL_A);
    let key = b.create_key(DIK_HANDLE, false).unwrap();
    strict
        .onboard_customer(&request("zoe", key), &mut b, &e.verifier)
        .unwrap();
    let dest = b.public_key(key).unwrap();

    let members = [&strict];
    let d = e
        .vasp
        .preauthorize_direct_transfer(
            alice.vaan,
            &Beneficiary::Address(dest),
            100,
            0,
            &Members(&members),
        )
        .unwrap();
    assert_eq!(d, Decision::Rejected(RejectReason::CrossJurisdiction));
}

#[test]
fn unresolved_beneficiary_needs_post_verification() {
    let mut e = env();
    let mut a = e.wallet(2, MODEL_A);
    let alice = e.onboard("alice", &mut a, false);
    let from = e.vasp.account(alice.vaan).unwrap().party.public_key;
    e.ledger.mint(from, 1000);
    let private = [PublicKey([7; 32]), PublicKey([8; 32])];

    let mut digests = Vec::new();
    for (i, dest) in private.iter().enumerate() {
        let d = e
            .vasp
            .preauthorize_direct_transfer(
                alice.vaan,
                &Beneficiary::Address(*dest),
                100,
                0,
                &WalletLocation::Unknown,
            )
            .unwrap();
        let Decision::Approved(approval) = d else {
            panic!()
        };
        assert_eq!(approval.post_verification_deadline, Some(1000));
        let tx = signed(
            &mut a,
            alice.key,
            TxBody::transfer(from, *dest, 100, i as u64),
        );
        digests.push(e.ledger.submit(tx, 0).unwrap());
    }
    e.ledger.advance(5);
    for c in e.ledger.confirmed().to_vec() {
        let r = e.vasp.accept_direct_transfer(&c).unwrap();
        assert_eq!(r.status, TravelRuleStatus::PreAuthorized);
    }
    let party = PartyInfo {
        name: "private holder".into(),
        vaan: 0,
        public_key: private[0],
    };
    assert!(e.vasp.post_verify(&digests[0], party));
    assert_eq!(
        e.vasp.record(&digests[0]).unwrap().status,
        TravelRuleStatus::PostVerified
    );

    let early = e.vasp.reconcile(e.ledger.confirmed(), &[], 500);
    assert!(early.is_clean(), "{early:?}");
    let late = e.vasp.reconcile(e.ledger.confirmed(), &[], 2000);
    assert_eq!(late.retroactive_rejections, vec![digests[1]]);
    assert_eq!(
        e.vasp.record(&digests[1]).unwrap().status,
        TravelRuleStatus::Rejected
    );
}

#[test]
fn strict_originator_refuses_unidentified_wallets() {
    let mut e = env();
    let mut cfg = VaspConfig::new("vasp-ch", [0x22; 32]);
    cfg.jurisdiction = Jurisdiction::strict("ch");
    e.vasp = Vasp::new(cfg);
    let mut a = e.wallet(2, MODEL_A);
    let alice = e.onboard("alice", &mut a, false);
    let d = e
        .vasp
        .preauthorize_direct_transfer(
            alice.vaan,
            &Beneficiary::Address(PublicKey([7; 32])),
            1,
            0,
            &WalletLocation::PrivacyWithheld,
        )
        .unwrap();
    assert_eq!(d, Decision::Rejected(RejectReason::CrossJurisdiction));
}

fn two_vasps() -> (Env, Vasp, DeviceState, DeviceState, Onboarded, Onboarded) {
    let mut e = env();
    let mut v2 = Vasp::new(VaspConfig::new("vasp-2", [0x22; 32]));
    e.vasp.register_peer(v2.peer_info());
    v2.register_peer(e.vasp.peer_info());
    let mut a = e.wallet(2, MODEL_A);
    let mut b = e.wallet(3, MODEL_A);
    let alice = e.onboard("alice", &mut a, false);
    let key = b.create_key(DIK_HANDLE, false).unwrap();
    let bob = v2
        .onboard_customer(&request("bob", key), &mut b, &e.verifier)
        .unwrap();
    (e, v2, a, b, alice, bob)
}

#[test]
fn travel_rule_record_is_verified_at_both_sides() {
    let (mut e, mut v2, _, _, alice, bob) = two_vasps();
    let body = e
        .vasp
        .open_transfer(alice.vaan, bob.certificate.subject_public_key, 40, 0)
        .unwrap();
    let digest = body.digest();
    let r = verify_travel_rule(&mut e.vasp, &mut v2, digest).unwrap();
    assert_eq!(r.status, TravelRuleStatus::Verified);
    assert_eq!(r.originator.name, "alice");
    assert_eq!(r.beneficiary.name, "bob");
    assert_eq!(e.vasp.record(&digest), Some(&r));
    assert_eq!(v2.record(&digest), Some(&r));
    assert_eq!(
        e.vasp.transfer(&digest).unwrap().state,
        TransferState::Verified
    );
}

#[test]
fn travel_rule_failures() {
    let (mut e, mut v2, _, _, alice, _) = two_vasps();
    let body = e
        .vasp
        .open_transfer(alice.vaan, PublicKey([9; 32]), 40, 0)
        .unwrap();
    assert_eq!(
        verify_travel_rule(&mut e.vasp, &mut v2, body.digest()),
        Err(VaspError::CounterpartyUnknownParty)
    );
    assert_eq!(
        e.vasp.transfer(&body.digest()).unwrap().state,
        TransferState::Deferred
    );
    assert_eq!(v2.records().count(), 0);

    assert_eq!(
        verify_travel_rule(&mut e.vasp, &mut v2, Digest::of(b"nothing pending")),
        Err(VaspError::NoTransactionContext)
    );

    let mut forged = e.vasp.peer_info();
    forged.transport_key = PublicKey([3; 32]);
    v2.register_peer(forged);
    let body = e
        .vasp
        .open_transfer(alice.vaan, PublicKey([9; 32]), 41, 1)
        .unwrap();
    let hello = e.vasp.channel_hello(v2.code(), body.digest()).unwrap();
    let accept = v2.accept_channel(&hello).unwrap();
    let (confirm, _) = e.vasp.confirm_channel(&accept).unwrap();
    assert_eq!(
        v2.finish_channel(&confirm),
        Err(VaspError::ChannelAuthFailure)
    );
}

#[test]
fn internal_transfers_are_recorded_immediately() {
    let mut e = env();
    let mut a = e.wallet(2, MODEL_A);
    let mut b = e.wallet(3, MODEL_A);
    let alice = e.onboard("alice", &mut a, false);
    let bob = e.onboard("bob", &mut b, false);
    let body = e
        .vasp
        .open_transfer(alice.vaan, bob.certificate.subject_public_key, 5, 0)
        .unwrap();
    let r = e.vasp.record(&body.digest()).unwrap();
    assert_eq!(
        (r.beneficiary.vaan, r.status),
        (bob.vaan, TravelRuleStatus::Verified)
    );
}

#[test]
fn discovery_answers() {
    let (e, v2, _, _, _, bob) = two_vasps();
    let mut cfg = VaspConfig::new("vasp-3", [0x33; 32]);
    cfg.jurisdiction = Jurisdiction::private("p");
    let mut v3 = Vasp::new(cfg);
    let mut c = e.wallet(4, MODEL_A);
    let key = c.create_key(DIK_HANDLE, false).unwrap();
    let carol = v3
        .onboard_customer(&request("carol", key), &mut c, &e.verifier)
        .unwrap();

    let members = [&e.vasp, &v2, &v3];
    let at = |k: &PublicKey| e.vasp.query_private_wallet(k, &members);
    assert_eq!(
        at(&bob.certificate.subject_public_key),
        WalletLocation::KnownAt(v2.code())
    );
    assert_eq!(
        at(&carol.certificate.subject_public_key),
        WalletLocation::PrivacyWithheld
    );
    assert_eq!(at(&PublicKey([5; 32])), WalletLocation::Unknown);
}

#[test]
fn recovery_restores_backup_blob() {
    let mut e = env();
    let mut d = e.wallet(2, MODEL_A);
    let out = e.onboard("bob", &mut d, true);
    let pk = out.certificate.subject_public_key;

    let mut wrong = e.wallet(5, MODEL_B);
    assert_eq!(
        e.vasp
            .recover_lost_device(
                out.vaan,
                Some((&mut wrong, b"customer-secret")),
                &e.ledger,
                0
            )
            .unwrap_err(),
        VaspError::ManifestMismatch
    );

    let mut fresh = e.wallet(6, MODEL_A);
    let report = e
        .vasp
        .recover_lost_device(
            out.vaan,
            Some((&mut fresh, b"customer-secret")),
            &e.ledger,
            0,
        )
        .unwrap();
    assert!(report.sweep().is_none());
    let RecoveryStep::RestoreBlob { handle, .. } = report.steps[0] else {
        panic!("{:?}", report.steps)
    };
    let sig = fresh.sign_transaction(handle, b"after recovery").unwrap();
    assert!(crate::crypto::verify(&pk, b"after recovery", &sig));
    assert_eq!(
        e.vasp.account(out.vaan).unwrap().wallet_device_id,
        fresh.device_id()
    );
}

#[test]
fn recovery_sweeps_non_migratable_key() {
    let mut e = env();
    let mut d = e.wallet(2, MODEL_A);
    let out = e.onboard("alice", &mut d, false);
    let pk = out.certificate.subject_public_key;
    e.ledger.mint(pk, 700);
    e.ledger.mint(PublicKey([4; 32]), 300);
    let before = e.ledger.total_supply();

    let report = e
        .vasp
        .recover_lost_device(out.vaan, None, &e.ledger, 10)
        .unwrap();
    assert_eq!(
        report.evidence_bundle[0].attested_migratable(&pk),
        Some(false)
    );
    let tx = report.sweep().unwrap().clone();
    let to = e.vasp.temp_keys()[0];
    e.ledger.submit(tx, 10).unwrap();
    e.ledger.advance(20);
    assert_eq!(e.ledger.balance(&pk), 0);
    assert_eq!(e.ledger.balance(&to), 700);
    assert_eq!(e.ledger.total_supply(), before);
    assert_eq!(
        e.vasp.account(out.vaan).unwrap().keys[0].state,
        KeyState::Swept
    );
    assert!(e.vasp.reconcile(e.ledger.confirmed(), &[], 20).is_clean());
    assert!(crate::crypto::verify(
        &e.vasp.signing_key(),
        &report.signing_payload(),
        &report.signature
    ));
}

#[test]
fn recovery_needs_recent_evidence() {
    let mut e = env();
    let mut d = e.wallet(2, MODEL_A);
    let out = e.onboard("alice", &mut d, false);
    let window = e.vasp.policy().evidence_window;
    assert_eq!(
        e.vasp
            .recover_lost_device(out.vaan, None, &e.ledger, window + 1)
            .unwrap_err(),
        VaspError::StaleEvidence
    );
    e.verifier.set_time(window + 1);
    e.vasp.reattest(out.vaan, &d, &e.verifier).unwrap();
    assert!(e
        .vasp
        .recover_lost_device(out.vaan, None, &e.ledger, window + 1)
        .is_ok());
}

#[test]
fn offboarding_erases_and_proves_it() {
    let mut e = env();
    let mut d = e.wallet(2, MODEL_A);
    let out = e.onboard("alice", &mut d, false);
    e.ledger.mint(out.certificate.subject_public_key, 50);

    let report = e
        .vasp
        .offboard_customer(out.vaan, &mut d, &e.verifier, Some(&e.ledger), 5)
        .unwrap();
    assert_eq!(
        e.vasp.account(out.vaan).unwrap().status,
        AccountStatus::OffBoarded
    );
    for _ in 0..10 {
        assert!(d.sign_transaction(out.key, b"late").is_err());
    }
    assert_eq!(report.asset_moves.len(), 1);
    e.ledger.submit(report.asset_moves[0].clone(), 5).unwrap();
    let (vk, rk) = (e.vasp.signing_key(), e.verifier.public_key());
    assert_eq!(verify_offboard_report(&report, &vk, &rk), Ok(()));

    let round = OffboardReport::from_bytes(&report.to_bytes()).unwrap();
    assert_eq!(verify_offboard_report(&round, &vk, &rk), Ok(()));
    let mut tampered = report.clone();
    tampered.receipts.clear();
    assert_eq!(
        verify_offboard_report(&tampered, &vk, &rk),
        Err(AuditFailure::BadReportSignature)
    );
    assert!(matches!(
        e.vasp.preauthorize_direct_transfer(
            out.vaan,
            &Beneficiary::Address(vk),
            1,
            6,
            &WalletLocation::Unknown
        ),
        Err(VaspError::AccountOffBoarded(_))
    ));
}

/// Quotes honestly but forges erasure receipts.
struct ForgedReceipts(DeviceState);

impl WalletDevice for ForgedReceipts {
    fn identity(&self) -> crate::claims::DeviceIdentity {
        self.0.identity()
    }
    fn manifest_ref(&self) -> ManifestRef {
        self.0.manifest_ref().clone()
    }
    fn public_key(&self, handle: KeyHandle) -> HwResult<PublicKey> {
        self.0.public_key(handle)
    }
    fn quote(&self, nonce: Nonce, selection: &[ClaimRequest]) -> HwResult<Evidence> {
        self.0.quote(nonce, selection)
    }
    fn create_key(&mut self, parent: KeyHandle, migratable: bool) -> HwResult<KeyHandle> {
        self.0.create_key(parent, migratable)
    }
    fn sign_transaction(&mut self, handle: KeyHandle, message: &[u8]) -> HwResult<Signature> {
        self.0.sign_transaction(handle, message)
    }
    fn export_key(&mut self, handle: KeyHandle, secret: &[u8]) -> HwResult<MigrationBlob> {
        self.0.export_key(handle, secret)
    }
    fn import_blob(&mut self, blob: &MigrationBlob, secret: &[u8]) -> HwResult<KeyHandle> {
        self.0.import_blob(blob, secret)
    }
    fn erase_key(&mut self, handle: KeyHandle) -> HwResult<ErasureReceipt> {
        let mut other = crate::hwemu::create_device(
            [0x99; 32],
            self.0.manifest_ref(),
            fixtures::endorser().catalog(),
        )?;
        let k = other.create_key(DIK_HANDLE, false)?;
        let mut r = other.erase_key(k)?;
        r.device_id = self.0.device_id();
        let _ = handle;
        Ok(r)
    }
}

#[test]
fn offboarding_without_valid_receipt_keeps_account() {
    let mut e = env();
    let mut d = e.wallet(2, MODEL_A);
    let out = e.onboard("alice", &mut d, false);
    let mut forged = ForgedReceipts(d);
    assert_eq!(
        e.vasp
            .offboard_customer(out.vaan, &mut forged, &e.verifier, None, 5)
            .unwrap_err(),
        VaspError::ErasureNotProven(out.certificate.subject_public_key)
    );
    assert_eq!(
        e.vasp.account(out.vaan).unwrap().status,
        AccountStatus::Active
    );
}

#[test]
fn reconcile_reports_loss_and_reordering() {
    let mut e = env();
    let mut a = e.wallet(2, MODEL_A);
    let mut b = e.wallet(3, MODEL_A);
    let alice = e.onboard("alice", &mut a, false);
    let bob = e.onboard("bob", &mut b, false);
    let (from, to) = (
        alice.certificate.subject_public_key,
        bob.certificate.subject_public_key,
    );
    e.ledger.mint(from, 100);

    let mut txs = Vec::new();
    for nonce in 0..3 {
        let body = e.vasp.open_transfer(alice.vaan, to, 1, nonce).unwrap();
        txs.push(signed(&mut a, alice.key, body));
    }
    let clean = e.vasp.reconcile(e.ledger.confirmed(), &[], 0);
    assert_eq!(clean.lost.len(), 3);

    // Submit the second before the first, and drop the third.
    e.ledger.submit(txs[1].clone(), 0).unwrap();
    e.ledger.submit(txs[0].clone(), 1).unwrap();
    let third = e.ledger.submit(txs[2].clone(), 1).unwrap();
    assert!(e.ledger.drop_pending(&third));
    e.ledger.advance(10);

    let report = e
        .vasp
        .reconcile(e.ledger.confirmed(), &[a.usage_log().to_vec()], 10);
    assert!(report.unrecorded.is_empty());
    assert_eq!(report.lost, vec![third]);
    assert_eq!(
        report.divergences,
        vec![OrderDivergence {
            signed_first: txs[0].digest(),
            signed_second: txs[1].digest()
        }]
    );
    assert!(!report.ownership_note.is_empty());
}

#[test]
fn reconcile_flags_unrecorded_transactions() {
    let mut e = env();
    let mut a = e.wallet(2, MODEL_A);
    let alice = e.onboard("alice", &mut a, false);
    let from = alice.certificate.subject_public_key;
    e.ledger.mint(from, 10);
    let tx = signed(
        &mut a,
        alice.key,
        TxBody::transfer(from, PublicKey([1; 32]), 3, 0),
    );
    let d = e.ledger.submit(tx, 0).unwrap();
    e.ledger.advance(5);
    let report = e
        .vasp
        .reconcile(e.ledger.confirmed(), &[a.usage_log().to_vec()], 5);
    assert_eq!(report.unrecorded, vec![d]);
    assert!(report.lost.is_empty() && report.divergences.is_empty());
}

#[test]
fn cross_vasp_authorization_checks_both_results() {
    let (e, v2, a, b, alice, bob) = two_vasps();
    let members = [&e.vasp, &v2];
    assert_eq!(
        e.vasp
            .query_private_wallet(&bob.certificate.subject_public_key, &members),
        WalletLocation::KnownAt(v2.code())
    );
    let c = e.verifier.new_challenge("vasp-1");
    let req = e.vasp.cross_vasp_request(
        bob.certificate.subject_public_key,
        "asp",
        c.session_id,
        c.nonce,
    );
    let req = CrossVaspAppraisalRequest::from_bytes(&req.to_bytes()).unwrap();
    let sub = v2.answer_cross_vasp_request(&req, &b).unwrap();
    let rb = e.verifier.handle_submission(&sub).result;
    let c = e.verifier.new_challenge("vasp-1");
    let ev = a
        .quote(
            c.nonce,
            &[
                ClaimRequest::KeyProvenance(alice.key),
                ClaimRequest::KeyType(alice.key),
                ClaimRequest::SystemConfig,
            ],
        )
        .unwrap();
    let ra = e.verifier.appraise(c.session_id, &ev, "baseline");
    let ok = e
        .vasp
        .authorize_cross_vasp(&ra, &rb, &e.verifier.public_key());
    assert!(ok.authorized, "{ok:?}");
    let bad = e.vasp.authorize_cross_vasp(&ra, &rb, &PublicKey([0; 32]));
    assert_eq!(
        bad.reasons,
        ["originator:bad_signature", "beneficiary:bad_signature"]
    );
}

#[test]
fn messages_round_trip() {
    let (mut e, mut v2, _, _, alice, bob) = two_vasps();
    let body = e
        .vasp
        .open_transfer(alice.vaan, bob.certificate.subject_public_key, 1, 0)
        .unwrap();
    let hello = e.vasp.channel_hello(v2.code(), body.digest()).unwrap();
    assert_eq!(ChannelHello::from_bytes(&hello.to_bytes()).unwrap(), hello);
    let accept = v2.accept_channel(&hello).unwrap();
    assert_eq!(
        ChannelAccept::from_bytes(&accept.to_bytes()).unwrap(),
        accept
    );
    let (confirm, ch) = e.vasp.confirm_channel(&accept).unwrap();
    assert_eq!(
        ChannelConfirm::from_bytes(&confirm.to_bytes()).unwrap(),
        confirm
    );
    v2.finish_channel(&confirm).unwrap();
    let ex = e.vasp.travel_rule_request(&ch).unwrap();
    assert_eq!(TravelRuleExchange::from_bytes(&ex.to_bytes()).unwrap(), ex);
    let reply = v2.handle_travel_rule(&ex).unwrap();
    assert_eq!(
        TravelRuleReply::from_bytes(&reply.to_bytes()).unwrap(),
        reply
    );
    let q = e.vasp.discovery_query(&PublicKey([1; 32]));
    assert_eq!(DiscoveryQuery::from_bytes(&q.to_bytes()).unwrap(), q);
    let r = v2.answer_discovery(&q);
    assert_eq!(DiscoveryReply::from_bytes(&r.to_bytes()).unwrap(), r);
    let p = v2.peer_info();
    assert_eq!(PeerInfo::from_bytes(&p.to_bytes()).unwrap(), p);
}

fn brute_inversions(xs: &[u64]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i in 0..xs.len() {
        for j in i + 1..xs.len() {
            if xs[i] > xs[j] {
                out.push((i, j));
            }
        }
    }
    out
}

proptest! {
    #[test]
    fn inversions_match_brute_force(xs in proptest::collection::vec(0u64..20, 0..40)) {
        prop_assert_eq!(inversions(&xs), brute_inversions(&xs));
    }
}
