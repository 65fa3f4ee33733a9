//! Registry of every top-level wire type, generic decoding, and the golden
//! byte vectors checked into `vectors/`.

use serde_json::{json, Value};

use crate::claims::{
    AttestationResult, Certificate, Claim, Endorsement, ErasureReceipt, Evidence, ManifestRef,
    PartyInfo, ReferenceManifest, TravelRuleRecord,
};
use crate::crypto::{self, Digest, PublicKey};
use crate::fixtures;
use crate::hwemu::{DeviceState, MigrationBlob, DIK_HANDLE};
use crate::ledger::{ToyLedger, Transaction, TxBody};
use crate::netsim::{
    AccountRequest, DeviceCommand, EventKind, ReconcileSummary, ScenarioOutcome, TraceEvent,
    TransferRequest,
};
use crate::vasp::{
    Beneficiary, ChannelAccept, ChannelConfirm, ChannelHello, CrossVaspAppraisalRequest, Decision,
    DiscoveryQuery, DiscoveryReply, OffboardReport, OnboardRequest, Operator, PeerInfo,
    PreAuthNotify, RecoveryReport, TravelRuleExchange, TravelRuleReply, Vasp, VaspConfig,
    WalletLocation,
};
use crate::verifier::{ChallengeRequest, ChallengeResponse, EvidenceSubmission, ResultDelivery};
use crate::wire::{WireError, WireResult, WireType};

/// A decoded wire value with its debug rendering.
#[derive(Debug, Clone, PartialEq)]
pub struct Decoded {
    pub type_name: &'static str,
    pub json: Value,
    /// The value encoded again; equal to the input for every accepted buffer.
    pub canonical: Vec<u8>,
}

macro_rules! registry {
    ($($ty:ty),* $(,)?) => {
        /// `(tag, name)` of every top-level wire type, in tag order.
        pub const WIRE_TYPES: &[(u8, &str)] = &[$((<$ty as WireType>::TAG, <$ty as WireType>::NAME)),*];

        fn decode_serializable(tag: u8, bytes: &[u8]) -> Option<WireResult<Decoded>> {
            $(
                if tag == <$ty as WireType>::TAG {
                    return Some(<$ty>::from_bytes(bytes).map(|v| Decoded {
                        type_name: <$ty as WireType>::NAME,
                        json: Render::render(&v),
                        canonical: v.to_bytes(),
                    }));
                }
            )*
            None
        }
    };
}

registry!(
    Claim,
    Evidence,
    Endorsement,
    ReferenceManifest,
    AttestationResult,
    Certificate,
    PartyInfo,
    TravelRuleRecord,
    ErasureReceipt,
    TxBody,
    Transaction,
    DeviceState,
    MigrationBlob,
    ChallengeRequest,
    ChallengeResponse,
    EvidenceSubmission,
    ResultDelivery,
    PeerInfo,
    PreAuthNotify,
    ChannelHello,
    ChannelAccept,
    ChannelConfirm,
    TravelRuleExchange,
    TravelRuleReply,
    DiscoveryQuery,
    DiscoveryReply,
    CrossVaspAppraisalRequest,
    RecoveryReport,
    OffboardReport,
    TraceEvent,
    TransferRequest,
    ReconcileSummary,
    DeviceCommand,
    AccountRequest,
    ScenarioOutcome,
);

trait Render {
    fn render(&self) -> Value;
}

macro_rules! render_json {
    ($($ty:ty),* $(,)?) => {$(
        impl Render for $ty {
            fn render(&self) -> Value {
                serde_json::to_value(self).expect("wire types serialize to JSON")
            }
        }
    )*};
}

render_json!(
    Claim,
    Evidence,
    Endorsement,
    ReferenceManifest,
    AttestationResult,
    Certificate,
    PartyInfo,
    TravelRuleRecord,
    ErasureReceipt,
    TxBody,
    Transaction,
    MigrationBlob,
    ChallengeRequest,
    ChallengeResponse,
    EvidenceSubmission,
    ResultDelivery,
    PeerInfo,
    PreAuthNotify,
    ChannelHello,
    ChannelAccept,
    ChannelConfirm,
    TravelRuleExchange,
    TravelRuleReply,
    DiscoveryQuery,
    DiscoveryReply,
    CrossVaspAppraisalRequest,
    RecoveryReport,
    OffboardReport,
    TraceEvent,
    TransferRequest,
    ReconcileSummary,
    DeviceCommand,
    AccountRequest,
    ScenarioOutcome,
);

/// The device storage image holds private keys; only public facts are shown.
impl Render for DeviceState {
    fn render(&self) -> Value {
        json!({
            "device_id": self.device_id(),
            "manifest_ref": self.manifest_ref(),
            "counter": self.counter(),
            "keys": self.keys().count(),
            "usage_entries": self.usage_log().len(),
        })
    }
}

pub fn type_name(tag: u8) -> Option<&'static str> {
    WIRE_TYPES.iter().find(|(t, _)| *t == tag).map(|(_, n)| *n)
}

/// Decodes any tagged buffer.
pub fn decode_any(bytes: &[u8]) -> WireResult<Decoded> {
    let Some(&tag) = bytes.first() else {
        return Err(WireError::MalformedBytes {
            offset: 0,
            what: "empty buffer",
        });
    };
    decode_serializable(tag, bytes).unwrap_or(Err(WireError::MalformedBytes {
        offset: 0,
        what: "unknown type tag",
    }))
}

macro_rules! check_signed {
    ($bytes:expr, $key:expr, $tag:expr, $($ty:ty),*) => {{
        $(
            if $tag == <$ty as WireType>::TAG {
                let v = <$ty>::from_bytes($bytes)?;
                return Ok(Some(crypto::verify($key, &v.signing_payload(), &v.signature)));
            }
        )*
    }};
}

/// Checks the signature of a signed wire value under `signer`. `None` for
/// types that carry no signature.
pub fn verify_signature(bytes: &[u8], signer: &PublicKey) -> WireResult<Option<bool>> {
    let tag = *bytes.first().ok_or(WireError::MalformedBytes {
        offset: 0,
        what: "empty buffer",
    })?;
    if tag == Transaction::TAG {
        let tx = Transaction::from_bytes(bytes)?;
        return Ok(Some(crypto::verify(
            signer,
            &tx.body.signing_bytes(),
            &tx.signature,
        )));
    }
    check_signed!(
        bytes,
        signer,
        tag,
        Evidence,
        Endorsement,
        ReferenceManifest,
        AttestationResult,
        Certificate,
        ErasureReceipt,
        PreAuthNotify,
        ChannelAccept,
        ChannelConfirm,
        TravelRuleExchange,
        TravelRuleReply,
        RecoveryReport,
        OffboardReport
    );
    decode_any(bytes).map(|_| None)
}

/// One golden vector: canonical bytes of a representative value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vector {
    pub type_name: &'static str,
    pub bytes: Vec<u8>,
    /// Key the value's signature verifies under, for signed types.
    pub signer: Option<PublicKey>,
}

impl Vector {
    pub fn file_name(&self) -> String {
        format!("{}.hex", self.type_name)
    }
}

fn vector<T: WireType>(value: &T, signer: Option<PublicKey>) -> Vector {
    Vector {
        type_name: T::NAME,
        bytes: value.to_bytes(),
        signer,
    }
}

/// Builds one representative value of every wire type from fixed seeds.
/// Output is identical on every run and platform.
pub fn golden() -> Vec<Vector> {
    let endorser = fixtures::endorser();
    let verifier = fixtures::verifier("asp-1", [0xA5; 32], &endorser);
    verifier.set_time(100);
    let mut alice = fixtures::wallet([0x11; 32], fixtures::MODEL_A, &endorser, &verifier);
    let mut bob = fixtures::wallet([0x22; 32], fixtures::MODEL_A, &endorser, &verifier);
    alice.set_time(100);
    bob.set_time(100);
    let alice_key = alice.create_key(DIK_HANDLE, false).expect("fresh device");
    let alice_spare = alice.create_key(DIK_HANDLE, true).expect("fresh device");
    let bob_key = bob.create_key(DIK_HANDLE, false).expect("fresh device");
    let alice_id = alice.identity().identity_key;
    let bob_id = bob.identity().identity_key;

    let mut a = Vasp::new(VaspConfig::new("vasp-a", [0x0A; 32]));
    let mut b = Vasp::new(VaspConfig::new("vasp-b", [0x0B; 32]));
    a.register_peer(b.peer_info());
    b.register_peer(a.peer_info());
    let onboard = |vasp: &mut Vasp, name: &str, device: &mut DeviceState, key| {
        vasp.onboard_customer(
            &OnboardRequest {
                name,
                key,
                operator: Operator::Customer,
                backup_secret: b"backup",
            },
            device,
            &verifier,
        )
        .expect("fixture wallets onboard")
    };
    let alice_acct = onboard(&mut a, "alice", &mut alice, alice_key);
    let bob_acct = onboard(&mut b, "bob", &mut bob, bob_key);
    let alice_pk = alice.public_key(alice_key).expect("live key");
    let bob_pk = bob.public_key(bob_key).expect("live key");

    let challenge_request = ChallengeRequest {
        requester_id: "vasp-a".into(),
    };
    let challenge = verifier.handle(&challenge_request);
    let evidence = alice
        .quote(challenge.nonce, &alice.full_selection(alice_key))
        .expect("live key");
    let submission = EvidenceSubmission {
        session_id: challenge.session_id,
        policy_id: "baseline".into(),
        evidence: evidence.clone(),
    };
    let delivery = verifier.handle_submission(&submission);
    let endorsement = endorser
        .make_endorsement(&alice.identity(), alice.manifest_ref())
        .expect("published model");
    let manifest = endorser
        .catalog()
        .get(&ManifestRef::new(fixtures::MODEL_A))
        .expect("published model")
        .clone();

    let mut ledger = ToyLedger::new(2);
    ledger.mint(alice_pk, 1000);
    let body = a
        .open_transfer(alice_acct.vaan, bob_pk, 10, 1)
        .expect("active account");
    let signature = alice
        .sign_transaction(alice_key, &body.signing_bytes())
        .expect("live key");
    let tx = Transaction::owner_signed(body.clone(), signature);

    let hello = a.channel_hello(b.code(), tx.digest()).expect("pending transfer");
    let accept = b.accept_channel(&hello).expect("registered peer");
    let (confirm, channel) = a.confirm_channel(&accept).expect("registered peer");
    b.finish_channel(&confirm).expect("registered peer");
    let exchange = a.travel_rule_request(&channel).expect("open channel");
    let reply = b.handle_travel_rule(&exchange).expect("open channel");
    let record = a.handle_travel_rule_reply(&reply).expect("known beneficiary");

    let notify = match a
        .preauthorize_direct_transfer(
            alice_acct.vaan,
            &Beneficiary::Address(bob_pk),
            5,
            100,
            &WalletLocation::KnownAt(b.code()),
        )
        .expect("active account")
    {
        Decision::Approved(approval) => approval.notify,
        other => panic!("fixture pre-authorization not approved: {other:?}"),
    };
    let query = a.discovery_query(&bob_pk);
    let discovery = b.answer_discovery(&query);
    let cross = a.cross_vasp_request(bob_pk, "asp-1", 7, [7; 16]);
    let blob = alice.export_key(alice_spare, b"backup").expect("migratable key");

    let offboard = b
        .offboard_customer(bob_acct.vaan, &mut bob, &verifier, None, 120)
        .expect("fixture wallet off-boards");
    let receipt = offboard.receipts[0].clone();
    let recovery = a
        .recover_lost_device(alice_acct.vaan, None, &ledger, 150)
        .expect("attested non-migratable key");

    let command = DeviceCommand {
        op: "quote".into(),
        handle: None,
        nonce: Some(challenge.nonce),
        selection: alice.full_selection(alice_key),
    };
    let event = TraceEvent {
        seq: 0,
        tick: 3,
        kind: EventKind::Send,
        from: "vasp-a".into(),
        to: "asp-1".into(),
        payload: challenge_request.to_bytes(),
    };
    let summary = ReconcileSummary {
        vasp: "vasp-a".into(),
        unrecorded: vec![],
        lost: vec![tx.digest()],
        divergences: vec![(tx.digest(), Digest::of(b"later"))],
        retroactive_rejections: vec![],
    };
    let outcome = ScenarioOutcome {
        name: "golden".into(),
        seed: 7,
        passed: true,
        metrics: [("confirmed".to_string(), 1u64)].into_iter().collect(),
        failures: vec![],
    };

    let a_sign = Some(a.signing_key());
    let b_sign = Some(b.signing_key());
    vec![
        vector(&evidence.claims[0], None),
        vector(&evidence, Some(alice_id)),
        vector(&endorsement, Some(endorser.root_key())),
        vector(&manifest, Some(endorser.root_key())),
        vector(&delivery.result, Some(verifier.public_key())),
        vector(&alice_acct.certificate, a_sign),
        vector(&record.originator, None),
        vector(&record, None),
        vector(&receipt, Some(bob_id)),
        vector(&body, None),
        vector(&tx, Some(alice_pk)),
        vector(&bob, None),
        vector(&blob, None),
        vector(&challenge_request, None),
        vector(&challenge, None),
        vector(&submission, None),
        vector(&delivery, None),
        vector(&a.peer_info(), None),
        vector(&notify, a_sign),
        vector(&hello, None),
        vector(&accept, Some(b.transport_key())),
        vector(&confirm, Some(a.transport_key())),
        vector(&exchange, Some(a.transport_key())),
        vector(&reply, Some(b.transport_key())),
        vector(&query, None),
        vector(&discovery, None),
        vector(&cross, None),
        vector(&recovery, a_sign),
        vector(&offboard, b_sign),
        vector(&event, None),
        vector(
            &TransferRequest {
                from_vaan: alice_acct.vaan,
                beneficiary: bob_pk,
                amount: 10,
                direct: false,
            },
            None,
        ),
        vector(&summary, None),
        vector(&command, None),
        vector(
            &AccountRequest {
                name: "alice".into(),
                device_id: alice.device_id(),
            },
            None,
        ),
        vector(&outcome, None),
    ]
}
