//! Lost-device recovery and off-boarding.

use serde::Serialize;
use thiserror::Error;

use super::{derive_vasp_code, vaan_code, AccountStatus, KeyState, Vasp, VaspError};
use crate::claims::{
    identity_certified, AttestationResult, ClaimBody, ClaimRequest, DeviceId, DeviceIdentity,
    ErasureReceipt, KeyHandle, KeyKind, LogicalTime, PartyInfo, TravelRuleRecord, TravelRuleStatus,
};
use crate::crypto::{self, PublicKey, SecretKey, Signature};
use crate::hwemu::{HwError, WalletDevice};
use crate::ledger::{ToyLedger, Transaction, TxAuthority, TxBody};
use crate::signed_struct;
use crate::verifier::{verify_result, AttestationService};
use crate::wire::{Canonical, Reader, WireResult};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RecoveryStep {
    RestoreBlob {
        device_id: DeviceId,
        handle: KeyHandle,
    },
    ReactivateKey {
        public_key: PublicKey,
    },
    SweepAssets {
        to: PublicKey,
        amount: u64,
        tx: Transaction,
    },
}

impl Canonical for RecoveryStep {
    fn write_to(&self, out: &mut Vec<u8>) {
        match self {
            RecoveryStep::RestoreBlob { device_id, handle } => {
                out.push(0);
                device_id.write_to(out);
                handle.write_to(out);
            }
            RecoveryStep::ReactivateKey { public_key } => {
                out.push(1);
                public_key.write_to(out);
            }
            RecoveryStep::SweepAssets { to, amount, tx } => {
                out.push(2);
                to.write_to(out);
                amount.write_to(out);
                tx.write_to(out);
            }
        }
    }
    fn read_from(r: &mut Reader<'_>) -> WireResult<Self> {
        match r.u8()? {
            0 => Ok(RecoveryStep::RestoreBlob {
                device_id: Canonical::read_from(r)?,
                handle: Canonical::read_from(r)?,
            }),
            1 => Ok(RecoveryStep::ReactivateKey {
                public_key: Canonical::read_from(r)?,
            }),
            2 => Ok(RecoveryStep::SweepAssets {
                to: Canonical::read_from(r)?,
                amount: Canonical::read_from(r)?,
                tx: Canonical::read_from(r)?,
            }),
            _ => Err(r.malformed("invalid recovery step")),
        }
    }
}

/// Executed recovery plan with the results that justified it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RecoveryReport {
    pub vaan: u64,
    pub lost_key: PublicKey,
    pub steps: Vec<RecoveryStep>,
    pub evidence_bundle: Vec<AttestationResult>,
    pub completed_at: LogicalTime,
    pub signature: Signature,
}

signed_struct!(RecoveryReport, 0x4A {
    vaan,
    lost_key,
    steps,
    evidence_bundle,
    completed_at
});

impl RecoveryReport {
    pub fn sweep(&self) -> Option<&Transaction> {
        self.steps.iter().find_map(|s| match s {
            RecoveryStep::SweepAssets { tx, .. } => Some(tx),
            _ => None,
        })
    }
}

/// Signed bundle of every artifact produced while off-boarding an account.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OffboardReport {
    pub vaan: u64,
    pub vasp_code: u32,
    pub identity: DeviceIdentity,
    pub snapshot: AttestationResult,
    pub asset_moves: Vec<Transaction>,
    pub receipts: Vec<ErasureReceipt>,
    pub completed_at: LogicalTime,
    pub signature: Signature,
}

signed_struct!(OffboardReport, 0x4B {
    vaan,
    vasp_code,
    identity,
    snapshot,
    asset_moves,
    receipts,
    completed_at
});

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AuditFailure {
    #[error("report signature does not verify under the VASP key")]
    BadReportSignature,
    #[error("VASP code does not match the signing key or account number")]
    VaspCodeMismatch,
    #[error("snapshot result signature does not verify")]
    BadSnapshot,
    #[error("device identity is inconsistent or uncertified")]
    BadIdentity,
    #[error("erasure receipt {0} does not verify")]
    BadReceipt(usize),
    #[error("asset move {0} is not signed by its sender")]
    BadAssetMove(usize),
    #[error("key {0:?} from the snapshot has no erasure receipt")]
    KeyNotErased(PublicKey),
}

/// Checks an off-boarding report end to end against the VASP key, the
/// verifier key and the device identity it names.
pub fn verify_offboard_report(
    report: &OffboardReport,
    vasp_key: &PublicKey,
    verifier_key: &PublicKey,
) -> Result<(), AuditFailure> {
    if !crypto::verify(vasp_key, &report.signing_payload(), &report.signature) {
        return Err(AuditFailure::BadReportSignature);
    }
    let code = derive_vasp_code(vasp_key.as_bytes()).map_err(|_| AuditFailure::VaspCodeMismatch)?;
    if code != report.vasp_code || vaan_code(report.vaan) != code {
        return Err(AuditFailure::VaspCodeMismatch);
    }
    if !verify_result(verifier_key, &report.snapshot) {
        return Err(AuditFailure::BadSnapshot);
    }
    let id = &report.identity;
    if report.snapshot.device_id != id.device_id
        || DeviceId::from_endorsement_key(&id.endorsement_key) != id.device_id
        || !identity_certified(id)
    {
        return Err(AuditFailure::BadIdentity);
    }
    for (i, receipt) in report.receipts.iter().enumerate() {
        if receipt.device_id != id.device_id || !receipt.verify(&id.identity_key) {
            return Err(AuditFailure::BadReceipt(i));
        }
    }
    for (i, tx) in report.asset_moves.iter().enumerate() {
        let owner_signed = tx.authority == TxAuthority::Owner
            && crypto::verify(&tx.body.from, &tx.body.signing_bytes(), &tx.signature);
        if !owner_signed {
            return Err(AuditFailure::BadAssetMove(i));
        }
    }
    for claim in &report.snapshot.claims {
        if let ClaimBody::KeyType {
            public_key,
            kind: KeyKind::ApplicationKey,
            ..
        } = &claim.body
        {
            if !report
                .receipts
                .iter()
                .any(|r| r.erased_key() == Some(*public_key))
            {
                return Err(AuditFailure::KeyNotErased(*public_key));
            }
        }
    }
    Ok(())
}

impl Vasp {
    fn next_temp_key(&mut self) -> PublicKey {
        let index = self.temp_keys.len() as u64;
        let key = SecretKey::derive(&self.seed, "vasp-temporary", index).public();
        self.temp_keys.push(key);
        key
    }

    fn sign_report(&self, mut report: RecoveryReport) -> RecoveryReport {
        report.signature = self.signing.sign(&report.signing_payload());
        report
    }

    fn own_party(&self, key: PublicKey) -> PartyInfo {
        PartyInfo {
            name: self.name.clone(),
            vaan: u64::from(self.code) << 32,
            public_key: key,
        }
    }

    /// Recovers the account's active key after its device was lost: restores
    /// the backup blob onto `new_device` when one exists, and otherwise sweeps
    /// the key's balance to a temporary VASP key. The sweep transaction is
    /// returned inside the report for submission.
    pub fn recover_lost_device(
        &mut self,
        vaan: u64,
        new_device: Option<(&mut dyn WalletDevice, &[u8])>,
        ledger: &ToyLedger,
        now: LogicalTime,
    ) -> Result<RecoveryReport, VaspError> {
        let window = self.policy.evidence_window;
        let acct = self.account_mut(vaan)?;
        let key = acct
            .active_key()
            .cloned()
            .ok_or(VaspError::UnknownAccount(vaan))?;
        let party = acct.party.clone();
        let evidence = self
            .latest_key_type_result(&key.public_key)
            .filter(|r| now.saturating_sub(r.evaluated_at) <= window)
            .cloned()
            .ok_or(VaspError::StaleEvidence)?;

        let mut steps = Vec::new();
        match (&key.backup_blob, new_device) {
            (Some(blob), Some((device, secret))) => {
                let handle = device.import_blob(blob, secret).map_err(|e| match e {
                    HwError::ManifestMismatch { .. } => VaspError::ManifestMismatch,
                    e => VaspError::Device(e),
                })?;
                if device.public_key(handle)? != key.public_key {
                    return Err(VaspError::Device(HwError::IntegrityFailure));
                }
                let device_id = device.identity().device_id;
                steps.push(RecoveryStep::RestoreBlob { device_id, handle });
                steps.push(RecoveryStep::ReactivateKey {
                    public_key: key.public_key,
                });
                let acct = self.account_mut(vaan)?;
                acct.wallet_device_id = device_id;
                acct.active_key_mut().expect("active key").handle = handle;
            }
            (Some(_), None) => return Err(VaspError::NoRecoveryPath),
            (None, _) => {
                if evidence.attested_migratable(&key.public_key) != Some(false) {
                    return Err(VaspError::NoRecoveryPath);
                }
                let to = self.next_temp_key();
                let amount = ledger.balance(&key.public_key);
                let body = TxBody::transfer(
                    key.public_key,
                    to,
                    amount,
                    u64::MAX - self.temp_keys.len() as u64,
                );
                let tx = Transaction {
                    signature: self.signing.sign(&body.signing_bytes()),
                    authority: TxAuthority::Sweep {
                        vasp_key: self.signing.public(),
                        certificate: key.certificate.clone(),
                    },
                    body,
                };
                let digest = tx.digest();
                self.records.insert(
                    digest,
                    TravelRuleRecord {
                        originator: party,
                        beneficiary: self.own_party(to),
                        amount,
                        tx_digest: digest,
                        status: TravelRuleStatus::Verified,
                    },
                );
                steps.push(RecoveryStep::SweepAssets { to, amount, tx });
                self.account_mut(vaan)?
                    .active_key_mut()
                    .expect("active key")
                    .state = KeyState::Swept;
            }
        }
        Ok(self.sign_report(RecoveryReport {
            vaan,
            lost_key: key.public_key,
            steps,
            evidence_bundle: vec![evidence],
            completed_at: now,
            signature: Signature::default(),
        }))
    }

    /// Takes a final appraisal, optionally moves the balance to a temporary
    /// VASP key, and erases the key on the device. The account is only marked
    /// off-boarded when every erasure receipt verifies.
    pub fn offboard_customer(
        &mut self,
        vaan: u64,
        device: &mut dyn WalletDevice,
        service: &dyn AttestationService,
        move_assets: Option<&ToyLedger>,
        now: LogicalTime,
    ) -> Result<OffboardReport, VaspError> {
        let acct = self.account_mut(vaan)?;
        let key = acct
            .active_key()
            .cloned()
            .ok_or(VaspError::UnknownAccount(vaan))?;
        let party = acct.party.clone();
        let identity = device.identity();
        if identity.device_id != acct.wallet_device_id {
            return Err(VaspError::ErasureNotProven(key.public_key));
        }

        let selection = [
            ClaimRequest::KeyProvenance(key.handle),
            ClaimRequest::KeyType(key.handle),
            ClaimRequest::SystemConfig,
            ClaimRequest::UsageLog,
        ];
        let snapshot = self.attest(device, &selection, service)?;

        let mut asset_moves = Vec::new();
        if let Some(ledger) = move_assets {
            let amount = ledger.balance(&key.public_key);
            if amount > 0 {
                let to = self.next_temp_key();
                let body = TxBody::transfer(key.public_key, to, amount, u64::MAX);
                let signature = device.sign_transaction(key.handle, &body.signing_bytes())?;
                let tx = Transaction::owner_signed(body, signature);
                let digest = tx.digest();
                self.records.insert(
                    digest,
                    TravelRuleRecord {
                        originator: party.clone(),
                        beneficiary: self.own_party(to),
                        amount,
                        tx_digest: digest,
                        status: TravelRuleStatus::Verified,
                    },
                );
                asset_moves.push(tx);
            }
        }

        let not_proven = VaspError::ErasureNotProven(key.public_key);
        let receipt = device
            .erase_key(key.handle)
            .map_err(|_| not_proven.clone())?;
        let valid = receipt.device_id == identity.device_id
            && identity_certified(&identity)
            && receipt.verify(&identity.identity_key)
            && receipt.erased_key() == Some(key.public_key);
        if !valid {
            return Err(not_proven);
        }

        let acct = self.account_mut(vaan)?;
        acct.active_key_mut().expect("active key").state = KeyState::Erased;
        acct.status = AccountStatus::OffBoarded;
        let mut report = OffboardReport {
            vaan,
            vasp_code: self.code,
            identity,
            snapshot,
            asset_moves,
            receipts: vec![receipt],
            completed_at: now,
            signature: Signature::default(),
        };
        report.signature = self.signing.sign(&report.signing_payload());
        Ok(report)
    }
}
