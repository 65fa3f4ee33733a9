//! Relying-party VASP: accounts, certificates, pre-authorization, Travel Rule
//! exchange, discovery, recovery, off-boarding and reconciliation.
//!
//! A [`Vasp`] owns all of its state and is driven by `&mut self` calls, one
//! message at a time. Counterparties are reached only through the message
//! types in this module, so distinct VASPs never share state.

mod lifecycle;
mod messages;
mod reconcile;
mod travel;

#[cfg(test)]
mod tests;

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::claims::{
    AttestationResult, Certificate, ClaimBody, ClaimKind, ClaimRequest, CreationOrigin, DeviceId,
    KeyHandle, LogicalTime, ManifestRef, PartyInfo, TravelRuleRecord, TravelRuleStatus,
};
use crate::crypto::{Digest, PublicKey, SecretKey, Signature};
use crate::hwemu::{HwError, MigrationBlob, WalletDevice, DIK_HANDLE};
use crate::ledger::{ConfirmedTx, LedgerError, TxBody};
use crate::verifier::{verify_result, AttestationService, ChallengeRequest, EvidenceSubmission};
use crate::{canonical_enum, canonical_struct};

pub use lifecycle::{
    verify_offboard_report, AuditFailure, OffboardReport, RecoveryReport, RecoveryStep,
};
pub use messages::*;
pub use reconcile::{inversions, OrderDivergence, ReconciliationReport};
pub use travel::{
    resolve_discovery, verify_travel_rule, Channel, Directory, Members, WalletLocation,
};

/// Big-endian value of the last four bytes of a public key.
pub fn derive_vasp_code(public_key: &[u8]) -> Result<u32, VaspError> {
    let n = public_key.len();
    if n < 4 {
        return Err(VaspError::KeyTooShort(n));
    }
    let tail: [u8; 4] = public_key[n - 4..].try_into().expect("four bytes");
    Ok(u32::from_be_bytes(tail))
}

pub fn vaan_code(vaan: u64) -> u32 {
    (vaan >> 32) as u32
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VaspError {
    #[error("public key has {0} bytes, need at least 4")]
    KeyTooShort(usize),
    #[error("party information is incomplete")]
    PartyInfoIncomplete,
    #[error("attestation failed: {:?}", .0.failed_rules)]
    AttestationFailed(Box<AttestationResult>),
    #[error("an active account already exists for this party and device")]
    AlreadyOnboarded,
    #[error("unknown account {0:#018x}")]
    UnknownAccount(u64),
    #[error("account {0:#018x} is off-boarded")]
    AccountOffBoarded(u64),
    #[error("unknown counterparty VASP {0:#010x}")]
    UnknownPeer(u32),
    #[error("channel authentication failed")]
    ChannelAuthFailure,
    #[error("counterparty cannot identify the beneficiary")]
    CounterpartyUnknownParty,
    #[error("no pending transaction for this exchange")]
    NoTransactionContext,
    #[error("verifier result signature or nonce binding is invalid")]
    BadResult,
    #[error("no recent key-type evidence for the lost key")]
    StaleEvidence,
    #[error("blob does not match the new device model")]
    ManifestMismatch,
    #[error("no backup blob and no evidence that the key is non-migratable")]
    NoRecoveryPath,
    #[error("no valid erasure receipt for key {0:?}")]
    ErasureNotProven(PublicKey),
    #[error("device error: {0}")]
    Device(#[from] HwError),
    #[error("ledger error: {0}")]
    Ledger(#[from] LedgerError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Jurisdiction {
    pub name: String,
    /// Transfers are only allowed to counterparties that can receive customer
    /// information, and never to unidentified wallets.
    pub strict: bool,
    /// Members may tell others that they hold an address.
    pub disclosure_allowed: bool,
}

impl Jurisdiction {
    pub fn open(name: &str) -> Jurisdiction {
        Jurisdiction {
            name: name.into(),
            strict: false,
            disclosure_allowed: true,
        }
    }

    pub fn strict(name: &str) -> Jurisdiction {
        Jurisdiction {
            name: name.into(),
            strict: true,
            disclosure_allowed: true,
        }
    }

    pub fn private(name: &str) -> Jurisdiction {
        Jurisdiction {
            name: name.into(),
            strict: false,
            disclosure_allowed: false,
        }
    }
}

canonical_struct!(Jurisdiction {
    name,
    strict,
    disclosure_allowed
});

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RelyingPartyPolicy {
    /// Verifier policy id used for every appraisal.
    pub policy_id: String,
    /// Rule whose failure triggers the new-key requirement at onboarding.
    pub provenance_rule: String,
    pub min_loa: u8,
    pub daily_limit: u64,
    pub ticks_per_day: LogicalTime,
    pub preauth_window: LogicalTime,
    /// Maximum age of key-type evidence accepted for recovery.
    pub evidence_window: LogicalTime,
}

impl Default for RelyingPartyPolicy {
    fn default() -> Self {
        RelyingPartyPolicy {
            policy_id: "baseline".into(),
            provenance_rule: "provenance".into(),
            min_loa: 3,
            daily_limit: 3000,
            ticks_per_day: 1000,
            preauth_window: 50,
            evidence_window: 500,
        }
    }
}

#[derive(Debug, Clone)]
pub struct VaspConfig {
    pub name: String,
    pub seed: [u8; 32],
    pub jurisdiction: Jurisdiction,
    pub policy: RelyingPartyPolicy,
}

impl VaspConfig {
    pub fn new(name: &str, seed: [u8; 32]) -> VaspConfig {
        VaspConfig {
            name: name.into(),
            seed,
            jurisdiction: Jurisdiction::open("open"),
            policy: RelyingPartyPolicy::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Ownership {
    CustomerOwned,
}

canonical_enum!(Ownership { CustomerOwned = 0 });

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Operator {
    Customer,
    VaspCustodial,
}

canonical_enum!(Operator {
    Customer = 0,
    VaspCustodial = 1,
});

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum KeyState {
    Active,
    Swept,
    Erased,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct KeyEntry {
    pub handle: KeyHandle,
    pub public_key: PublicKey,
    pub ownership: Ownership,
    pub operator: Operator,
    pub certificate: Certificate,
    #[serde(skip)]
    pub backup_blob: Option<MigrationBlob>,
    pub state: KeyState,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AccountStatus {
    Active,
    OffBoarded,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CustomerAccount {
    pub vaan: u64,
    pub party: PartyInfo,
    pub wallet_device_id: DeviceId,
    pub manifest_ref: ManifestRef,
    pub keys: Vec<KeyEntry>,
    pub status: AccountStatus,
    /// Assurance level of the last passing appraisal.
    pub loa: Option<u8>,
    /// Approved amounts per logical day.
    pub daily_spent: BTreeMap<u64, u64>,
}

impl CustomerAccount {
    pub fn active_key(&self) -> Option<&KeyEntry> {
        self.keys.iter().find(|k| k.state == KeyState::Active)
    }

    fn active_key_mut(&mut self) -> Option<&mut KeyEntry> {
        self.keys.iter_mut().find(|k| k.state == KeyState::Active)
    }

    pub fn holds(&self, key: &PublicKey) -> bool {
        self.keys.iter().any(|k| k.public_key == *key)
    }
}

pub struct OnboardRequest<'a> {
    pub name: &'a str,
    pub key: KeyHandle,
    pub operator: Operator,
    /// Customer authorization secret used to seal a backup of a migratable key.
    pub backup_secret: &'a [u8],
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Onboarded {
    pub vaan: u64,
    pub certificate: Certificate,
    pub key: KeyHandle,
    pub result: AttestationResult,
    /// The presented key failed the provenance check and a new one was generated.
    pub rekeyed: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Beneficiary {
    Party(PartyInfo),
    Address(PublicKey),
}

impl Beneficiary {
    pub fn public_key(&self) -> PublicKey {
        match self {
            Beneficiary::Party(p) => p.public_key,
            Beneficiary::Address(k) => *k,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    InsufficientLoa { have: u8, need: u8 },
    DailyLimit { spent: u64, limit: u64 },
    CrossJurisdiction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DeferReason {
    NoAttestation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Approval {
    pub notify: PreAuthNotify,
    /// Set when the beneficiary is not identified yet.
    pub post_verification_deadline: Option<LogicalTime>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Approved(Approval),
    Deferred(DeferReason),
    Rejected(RejectReason),
}

impl Decision {
    pub fn is_approved(&self) -> bool {
        matches!(self, Decision::Approved(_))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct PreAuth {
    notify: PreAuthNotify,
    beneficiary_party: Option<PartyInfo>,
    used: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TransferState {
    Pending,
    Deferred,
    Verified,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Transfer {
    pub vaan: u64,
    pub body: TxBody,
    pub beneficiary: PublicKey,
    pub amount: u64,
    pub state: TransferState,
}

/// Outcome of checking both sides of a cross-VASP transfer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CrossVaspDecision {
    pub authorized: bool,
    pub reasons: Vec<String>,
}

pub struct Vasp {
    name: String,
    seed: [u8; 32],
    signing: SecretKey,
    transport: SecretKey,
    code: u32,
    jurisdiction: Jurisdiction,
    policy: RelyingPartyPolicy,
    next_seq: u32,
    accounts: BTreeMap<u64, CustomerAccount>,
    archive: Vec<AttestationResult>,
    peers: BTreeMap<u32, PeerInfo>,
    channels: BTreeMap<Digest, travel::ChannelState>,
    transfers: BTreeMap<Digest, Transfer>,
    records: BTreeMap<Digest, TravelRuleRecord>,
    deadlines: BTreeMap<Digest, LogicalTime>,
    preauths: BTreeMap<u64, PreAuth>,
    next_preauth: u64,
    temp_keys: Vec<PublicKey>,
}

impl Vasp {
    pub fn new(config: VaspConfig) -> Vasp {
        let signing = SecretKey::derive(&config.seed, "vasp-signing", 0);
        let transport = SecretKey::derive(&config.seed, "vasp-transport", 0);
        let code = derive_vasp_code(signing.public().as_bytes()).expect("32-byte key");
        Vasp {
            name: config.name,
            seed: config.seed,
            signing,
            transport,
            code,
            jurisdiction: config.jurisdiction,
            policy: config.policy,
            next_seq: 1,
            accounts: BTreeMap::new(),
            archive: Vec::new(),
            peers: BTreeMap::new(),
            channels: BTreeMap::new(),
            transfers: BTreeMap::new(),
            records: BTreeMap::new(),
            deadlines: BTreeMap::new(),
            preauths: BTreeMap::new(),
            next_preauth: 1,
            temp_keys: Vec::new(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn code(&self) -> u32 {
        self.code
    }

    pub fn signing_key(&self) -> PublicKey {
        self.signing.public()
    }

    pub fn transport_key(&self) -> PublicKey {
        self.transport.public()
    }

    pub fn jurisdiction(&self) -> &Jurisdiction {
        &self.jurisdiction
    }

    pub fn policy(&self) -> &RelyingPartyPolicy {
        &self.policy
    }

    /// What counterparties need to register this VASP.
    pub fn peer_info(&self) -> PeerInfo {
        PeerInfo {
            code: self.code,
            name: self.name.clone(),
            signing_key: self.signing.public(),
            transport_key: self.transport.public(),
            jurisdiction: self.jurisdiction.clone(),
            info_channel: true,
        }
    }

    pub fn register_peer(&mut self, peer: PeerInfo) {
        self.peers.insert(peer.code, peer);
    }

    pub fn peer(&self, code: u32) -> Option<&PeerInfo> {
        self.peers.get(&code)
    }

    pub fn account(&self, vaan: u64) -> Option<&CustomerAccount> {
        self.accounts.get(&vaan)
    }

    pub fn accounts(&self) -> impl Iterator<Item = &CustomerAccount> {
        self.accounts.values()
    }

    pub fn archive(&self) -> &[AttestationResult] {
        &self.archive
    }

    pub fn record(&self, tx_digest: &Digest) -> Option<&TravelRuleRecord> {
        self.records.get(tx_digest)
    }

    pub fn records(&self) -> impl Iterator<Item = &TravelRuleRecord> {
        self.records.values()
    }

    pub fn transfer(&self, tx_digest: &Digest) -> Option<&Transfer> {
        self.transfers.get(tx_digest)
    }

    pub fn temp_keys(&self) -> &[PublicKey] {
        &self.temp_keys
    }

    /// The account holding `key`, if any.
    pub fn account_for_key(&self, key: &PublicKey) -> Option<&CustomerAccount> {
        self.accounts.values().find(|a| a.holds(key))
    }

    fn active_account_for_key(&self, key: &PublicKey) -> Option<&CustomerAccount> {
        self.accounts.values().find(|a| {
            a.status == AccountStatus::Active && a.active_key().map(|k| k.public_key) == Some(*key)
        })
    }

    fn account_mut(&mut self, vaan: u64) -> Result<&mut CustomerAccount, VaspError> {
        let acct = self
            .accounts
            .get_mut(&vaan)
            .ok_or(VaspError::UnknownAccount(vaan))?;
        if acct.status == AccountStatus::OffBoarded {
            return Err(VaspError::AccountOffBoarded(vaan));
        }
        Ok(acct)
    }

    fn sign_certificate(&self, mut cert: Certificate) -> Certificate {
        cert.signature = self.signing.sign(&cert.signing_payload());
        cert
    }

    fn party_of(&self, vaan: u64) -> Option<PartyInfo> {
        self.accounts.get(&vaan).map(|a| a.party.clone())
    }

    /// Challenges `device`, quotes `selection` and appraises it. Every verified
    /// result is archived, pass or fail.
    pub fn attest(
        &mut self,
        device: &dyn WalletDevice,
        selection: &[ClaimRequest],
        service: &dyn AttestationService,
    ) -> Result<AttestationResult, VaspError> {
        let challenge = service.request_challenge(&ChallengeRequest {
            requester_id: self.name.clone(),
        });
        let evidence = device.quote(challenge.nonce, selection)?;
        let delivery = service.submit_evidence(&EvidenceSubmission {
            session_id: challenge.session_id,
            policy_id: self.policy.policy_id.clone(),
            evidence,
        });
        let result = delivery.result;
        if !verify_result(&service.verifier_key(), &result) || result.nonce != challenge.nonce {
            return Err(VaspError::BadResult);
        }
        self.archive.push(result.clone());
        Ok(result)
    }

    fn key_selection(handle: KeyHandle) -> [ClaimRequest; 3] {
        [
            ClaimRequest::KeyProvenance(handle),
            ClaimRequest::KeyType(handle),
            ClaimRequest::SystemConfig,
        ]
    }

    fn failed_rule(&self, result: &AttestationResult, rule: &str) -> bool {
        let prefixed = format!("{rule}:");
        result
            .failed_rules
            .iter()
            .any(|f| f == rule || f.starts_with(&prefixed))
    }

    /// Appraises the wallet, requires a fresh on-device key when the presented
    /// key's provenance does not verify, and issues the account certificate.
    pub fn onboard_customer(
        &mut self,
        request: &OnboardRequest<'_>,
        device: &mut dyn WalletDevice,
        service: &dyn AttestationService,
    ) -> Result<Onboarded, VaspError> {
        if request.name.trim().is_empty() {
            return Err(VaspError::PartyInfoIncomplete);
        }
        let device_id = device.identity().device_id;
        if self.accounts.values().any(|a| {
            a.status == AccountStatus::Active
                && a.party.name == request.name
                && a.wallet_device_id == device_id
        }) {
            return Err(VaspError::AlreadyOnboarded);
        }

        let mut handle = request.key;
        let mut result = self.attest(device, &Self::key_selection(handle), service)?;
        let mut rekeyed = false;
        if !result.passed() && self.failed_rule(&result, &self.policy.provenance_rule) {
            handle = device.create_key(DIK_HANDLE, false)?;
            result = self.attest(device, &Self::key_selection(handle), service)?;
            rekeyed = true;
        }
        if !result.passed() {
            return Err(VaspError::AttestationFailed(Box::new(result)));
        }

        let public_key = device.public_key(handle)?;
        let migratable = result.attested_migratable(&public_key);
        let provenance_known = !self.failed_rule(&result, &self.policy.provenance_rule)
            && result.claims.iter().any(|c| match &c.body {
                ClaimBody::KeyProvenance {
                    public_key: pk,
                    creation_origin,
                    source_device,
                    ..
                } => {
                    *pk == public_key
                        && (*creation_origin == CreationOrigin::GeneratedOnboard
                            || source_device.is_some())
                }
                _ => false,
            });
        let backup_blob = if migratable == Some(true) {
            Some(device.export_key(handle, request.backup_secret)?)
        } else {
            None
        };

        let vaan = (u64::from(self.code) << 32) | u64::from(self.next_seq);
        self.next_seq += 1;
        let certificate = self.sign_certificate(Certificate {
            subject_public_key: public_key,
            vaan,
            issuer_vasp_code: self.code,
            non_migratable_marking: migratable == Some(false),
            provenance_known_marking: provenance_known,
            signature: Signature::default(),
        });
        self.accounts.insert(
            vaan,
            CustomerAccount {
                vaan,
                party: PartyInfo {
                    name: request.name.to_string(),
                    vaan,
                    public_key,
                },
                wallet_device_id: device_id,
                manifest_ref: device.manifest_ref(),
                keys: vec![KeyEntry {
                    handle,
                    public_key,
                    ownership: Ownership::CustomerOwned,
                    operator: request.operator,
                    certificate: certificate.clone(),
                    backup_blob,
                    state: KeyState::Active,
                }],
                status: AccountStatus::Active,
                loa: result.loa,
                daily_spent: BTreeMap::new(),
            },
        );
        Ok(Onboarded {
            vaan,
            certificate,
            key: handle,
            result,
            rekeyed,
        })
    }

    /// Re-appraises the account's active key and updates its assurance level.
    pub fn reattest(
        &mut self,
        vaan: u64,
        device: &dyn WalletDevice,
        service: &dyn AttestationService,
    ) -> Result<AttestationResult, VaspError> {
        let handle = self
            .account_mut(vaan)?
            .active_key()
            .map(|k| k.handle)
            .ok_or(VaspError::UnknownAccount(vaan))?;
        let mut selection = Self::key_selection(handle).to_vec();
        selection.push(ClaimRequest::UsageLog);
        let result = self.attest(device, &selection, service)?;
        let acct = self.account_mut(vaan)?;
        acct.loa = if result.passed() { result.loa } else { None };
        Ok(result)
    }

    /// Replays the archive: a non-migratable marking must be backed by a passing
    /// result attesting `migratable = false` for the certified key.
    pub fn certificate_sound(&self, cert: &Certificate, verifier_key: &PublicKey) -> bool {
        if !crate::crypto::verify(
            &self.signing.public(),
            &cert.signing_payload(),
            &cert.signature,
        ) {
            return false;
        }
        if !cert.non_migratable_marking {
            return true;
        }
        self.archive.iter().any(|r| {
            r.passed()
                && verify_result(verifier_key, r)
                && r.attested_migratable(&cert.subject_public_key) == Some(false)
        })
    }

    fn resolve(&self, beneficiary: &PublicKey, directory: &dyn Directory) -> WalletLocation {
        if self.active_account_for_key(beneficiary).is_some() {
            return WalletLocation::KnownAt(self.code);
        }
        directory.locate(self, beneficiary)
    }

    /// Decides whether the customer may send `amount` directly from their own
    /// wallet. Approval opens a window during which a matching ledger
    /// transaction is accepted.
    pub fn preauthorize_direct_transfer(
        &mut self,
        vaan: u64,
        beneficiary: &Beneficiary,
        amount: u64,
        now: LogicalTime,
        directory: &dyn Directory,
    ) -> Result<Decision, VaspError> {
        let policy = self.policy.clone();
        let acct = self.account_mut(vaan)?;
        let Some(loa) = acct.loa else {
            return Ok(Decision::Deferred(DeferReason::NoAttestation));
        };
        if loa < policy.min_loa {
            return Ok(Decision::Rejected(RejectReason::InsufficientLoa {
                have: loa,
                need: policy.min_loa,
            }));
        }
        let day = now / policy.ticks_per_day.max(1);
        let spent = acct.daily_spent.get(&day).copied().unwrap_or(0);
        if spent
            .checked_add(amount)
            .is_none_or(|t| t > policy.daily_limit)
        {
            return Ok(Decision::Rejected(RejectReason::DailyLimit {
                spent,
                limit: policy.daily_limit,
            }));
        }
        let Some(from) = acct.active_key().map(|k| k.public_key) else {
            return Err(VaspError::UnknownAccount(vaan));
        };

        let key = beneficiary.public_key();
        let location = self.resolve(&key, directory);
        let (resolved, beneficiary_party) = match location {
            WalletLocation::KnownAt(code) if code == self.code => (
                true,
                self.active_account_for_key(&key).map(|a| a.party.clone()),
            ),
            WalletLocation::KnownAt(code) => {
                let peer_ok = self.peers.get(&code).map(|p| {
                    p.info_channel || !(p.jurisdiction.strict || self.jurisdiction.strict)
                });
                match peer_ok {
                    Some(true) => (true, None),
                    _ => return Ok(Decision::Rejected(RejectReason::CrossJurisdiction)),
                }
            }
            WalletLocation::PrivacyWithheld | WalletLocation::Unknown => {
                if self.jurisdiction.strict {
                    return Ok(Decision::Rejected(RejectReason::CrossJurisdiction));
                }
                (false, None)
            }
        };
        let beneficiary_party = beneficiary_party.or(match beneficiary {
            Beneficiary::Party(p) if resolved => Some(p.clone()),
            _ => None,
        });

        let acct = self.account_mut(vaan)?;
        *acct.daily_spent.entry(day).or_insert(0) += amount;
        let id = self.next_preauth;
        self.next_preauth += 1;
        let mut notify = PreAuthNotify {
            preauth_id: id,
            vaan,
            from,
            beneficiary: key,
            amount,
            window_start: now,
            window_end: now + policy.preauth_window,
            signature: Signature::default(),
        };
        notify.signature = self.signing.sign(&notify.signing_payload());
        self.preauths.insert(
            id,
            PreAuth {
                notify: notify.clone(),
                beneficiary_party,
                used: false,
            },
        );
        Ok(Decision::Approved(Approval {
            notify,
            post_verification_deadline: (!resolved).then_some(now + policy.ticks_per_day),
        }))
    }

    /// Matches a confirmed ledger transaction against open pre-authorizations
    /// and records it.
    pub fn accept_direct_transfer(&mut self, confirmed: &ConfirmedTx) -> Option<TravelRuleRecord> {
        let body = &confirmed.tx.body;
        let [output] = body.outputs.as_slice() else {
            return None;
        };
        let (&id, pre) = self.preauths.iter().find(|(_, p)| {
            !p.used
                && p.notify.from == body.from
                && p.notify.beneficiary == output.to
                && p.notify.amount == output.amount
                && (p.notify.window_start..=p.notify.window_end).contains(&confirmed.confirmed_at)
        })?;
        let pre = pre.clone();
        self.preauths.get_mut(&id).expect("found above").used = true;
        let originator = self.party_of(pre.notify.vaan)?;
        let (beneficiary, status) = match pre.beneficiary_party {
            Some(p) => (p, TravelRuleStatus::Verified),
            None => {
                self.deadlines.insert(
                    confirmed.digest,
                    confirmed.confirmed_at + self.policy.ticks_per_day,
                );
                (unidentified(output.to), TravelRuleStatus::PreAuthorized)
            }
        };
        let record = TravelRuleRecord {
            originator,
            beneficiary,
            amount: output.amount,
            tx_digest: confirmed.digest,
            status,
        };
        if status == TravelRuleStatus::PreAuthorized {
            self.transfers.insert(
                confirmed.digest,
                Transfer {
                    vaan: pre.notify.vaan,
                    body: body.clone(),
                    beneficiary: output.to,
                    amount: output.amount,
                    state: TransferState::Pending,
                },
            );
        }
        self.records.insert(confirmed.digest, record.clone());
        Some(record)
    }

    /// Completes a pre-authorized record once the beneficiary is identified.
    pub fn post_verify(&mut self, tx_digest: &Digest, beneficiary: PartyInfo) -> bool {
        match self.records.get_mut(tx_digest) {
            Some(r) if r.status == TravelRuleStatus::PreAuthorized => {
                r.beneficiary = beneficiary;
                r.status = TravelRuleStatus::PostVerified;
                self.deadlines.remove(tx_digest);
                true
            }
            _ => false,
        }
    }

    /// Opens a transfer from the account's active key. Transfers between two
    /// customers of this VASP are recorded immediately.
    pub fn open_transfer(
        &mut self,
        vaan: u64,
        beneficiary: PublicKey,
        amount: u64,
        nonce: u64,
    ) -> Result<TxBody, VaspError> {
        let acct = self.account_mut(vaan)?;
        let from = acct
            .active_key()
            .map(|k| k.public_key)
            .ok_or(VaspError::UnknownAccount(vaan))?;
        let originator = acct.party.clone();
        let body = TxBody::transfer(from, beneficiary, amount, nonce);
        let digest = body.digest();
        let internal = self
            .active_account_for_key(&beneficiary)
            .map(|a| a.party.clone());
        let state = match internal {
            Some(party) => {
                self.records.insert(
                    digest,
                    TravelRuleRecord {
                        originator,
                        beneficiary: party,
                        amount,
                        tx_digest: digest,
                        status: TravelRuleStatus::Verified,
                    },
                );
                TransferState::Verified
            }
            None => TransferState::Pending,
        };
        self.transfers.insert(
            digest,
            Transfer {
                vaan,
                body: body.clone(),
                beneficiary,
                amount,
                state,
            },
        );
        Ok(body)
    }

    /// Checks both wallets' results for a cross-VASP transfer against this
    /// VASP's policy.
    pub fn authorize_cross_vasp(
        &self,
        originator: &AttestationResult,
        beneficiary: &AttestationResult,
        verifier_key: &PublicKey,
    ) -> CrossVaspDecision {
        let mut reasons = Vec::new();
        for (side, r) in [("originator", originator), ("beneficiary", beneficiary)] {
            if !verify_result(verifier_key, r) {
                reasons.push(format!("{side}:bad_signature"));
                continue;
            }
            if r.policy_id != self.policy.policy_id {
                reasons.push(format!("{side}:wrong_policy"));
            }
            if !r.passed() {
                reasons.push(format!("{side}:failed"));
            }
            match r.loa {
                Some(l) if l >= self.policy.min_loa => {}
                l => reasons.push(format!("{side}:loa_{}", l.unwrap_or(0))),
            }
        }
        CrossVaspDecision {
            authorized: reasons.is_empty(),
            reasons,
        }
    }

    /// A request for the counterparty's wallet to be appraised for this VASP.
    pub fn cross_vasp_request(
        &self,
        beneficiary: PublicKey,
        verifier_id: &str,
        session_id: u64,
        nonce: [u8; 16],
    ) -> CrossVaspAppraisalRequest {
        CrossVaspAppraisalRequest {
            requester_code: self.code,
            beneficiary,
            policy_id: self.policy.policy_id.clone(),
            verifier_id: verifier_id.into(),
            session_id,
            nonce,
        }
    }

    /// Handles a counterparty's appraisal request: the beneficiary's wallet
    /// quotes under the requester's nonce for submission to the named verifier.
    pub fn answer_cross_vasp_request(
        &self,
        request: &CrossVaspAppraisalRequest,
        device: &dyn WalletDevice,
    ) -> Result<EvidenceSubmission, VaspError> {
        if !self.peers.contains_key(&request.requester_code) {
            return Err(VaspError::UnknownPeer(request.requester_code));
        }
        let key = self
            .active_account_for_key(&request.beneficiary)
            .and_then(|a| a.active_key())
            .ok_or(VaspError::CounterpartyUnknownParty)?;
        let evidence = device.quote(request.nonce, &Self::key_selection(key.handle))?;
        Ok(EvidenceSubmission {
            session_id: request.session_id,
            policy_id: request.policy_id.clone(),
            evidence,
        })
    }

    fn latest_key_type_result(&self, key: &PublicKey) -> Option<&AttestationResult> {
        self.archive
            .iter()
            .rev()
            .find(|r| r.passed() && r.claims_of_key_type(key))
    }
}

trait ResultExt {
    fn claims_of_key_type(&self, key: &PublicKey) -> bool;
}

impl ResultExt for AttestationResult {
    fn claims_of_key_type(&self, key: &PublicKey) -> bool {
        self.claims.iter().any(|c| {
            c.kind() == ClaimKind::KeyType
                && matches!(&c.body, ClaimBody::KeyType { public_key, .. } if public_key == key)
        })
    }
}

/// Placeholder party for a beneficiary that has not been identified yet.
fn unidentified(key: PublicKey) -> PartyInfo {
    PartyInfo {
        name: String::new(),
        vaan: 0,
        public_key: key,
    }
}
