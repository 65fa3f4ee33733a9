//! Account-balance toy ledger standing in for a public blockchain.
//!
//! Transactions enter a pending pool and confirm after a fixed delay, in pool
//! order. Besides owner-signed transfers the ledger accepts sweeps signed by a
//! registered VASP authority for keys that VASP certified.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::claims::{Certificate, LogicalTime};
use crate::crypto::{self, Digest, PublicKey, Signature};
use crate::wire::{Canonical, Reader, WireResult, WireType};
use crate::{canonical_struct, wire_type};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct TxOutput {
    pub to: PublicKey,
    pub amount: u64,
}

canonical_struct!(TxOutput { to, amount });

/// The signed part of a transaction. `nonce` distinguishes repeated transfers.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct TxBody {
    pub from: PublicKey,
    pub outputs: Vec<TxOutput>,
    pub nonce: u64,
}

canonical_struct!(TxBody {
    from,
    outputs,
    nonce
});
wire_type!(TxBody, 0x10);

impl TxBody {
    pub fn transfer(from: PublicKey, to: PublicKey, amount: u64, nonce: u64) -> TxBody {
        TxBody {
            from,
            outputs: vec![TxOutput { to, amount }],
            nonce,
        }
    }

    /// The bytes a wallet signs.
    pub fn signing_bytes(&self) -> Vec<u8> {
        self.to_bytes()
    }

    pub fn digest(&self) -> Digest {
        Digest::of(&self.signing_bytes())
    }

    pub fn total(&self) -> Option<u64> {
        self.outputs
            .iter()
            .try_fold(0u64, |acc, o| acc.checked_add(o.amount))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum TxAuthority {
    /// Signed by `body.from`.
    Owner,
    /// Signed by a VASP authority key that certified `body.from`.
    Sweep {
        vasp_key: PublicKey,
        certificate: Certificate,
    },
}

impl Canonical for TxAuthority {
    fn write_to(&self, out: &mut Vec<u8>) {
        match self {
            TxAuthority::Owner => out.push(0),
            TxAuthority::Sweep {
                vasp_key,
                certificate,
            } => {
                out.push(1);
                vasp_key.write_to(out);
                certificate.write_to(out);
            }
        }
    }
    fn read_from(r: &mut Reader<'_>) -> WireResult<Self> {
        match r.u8()? {
            0 => Ok(TxAuthority::Owner),
            1 => Ok(TxAuthority::Sweep {
                vasp_key: Canonical::read_from(r)?,
                certificate: Canonical::read_from(r)?,
            }),
            _ => Err(r.malformed("invalid tx authority")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Transaction {
    pub body: TxBody,
    pub authority: TxAuthority,
    pub signature: Signature,
}

canonical_struct!(Transaction {
    body,
    authority,
    signature
});
wire_type!(Transaction, 0x11);

impl Transaction {
    pub fn owner_signed(body: TxBody, signature: Signature) -> Transaction {
        Transaction {
            body,
            authority: TxAuthority::Owner,
            signature,
        }
    }

    pub fn digest(&self) -> Digest {
        self.body.digest()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConfirmedTx {
    pub seq: u64,
    pub digest: Digest,
    pub tx: Transaction,
    pub confirmed_at: LogicalTime,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LedgerError {
    #[error("signature does not verify")]
    BadSignature,
    #[error("insufficient balance: available {available}, needed {needed}")]
    InsufficientBalance { available: u64, needed: u64 },
    #[error("transaction already submitted")]
    Duplicate,
    #[error("transaction has no outputs or overflows")]
    Malformed,
}

#[derive(Debug, Clone)]
struct Pending {
    tx: Transaction,
    digest: Digest,
    due: LogicalTime,
}

#[derive(Debug, Clone)]
pub struct ToyLedger {
    confirmation_delay: LogicalTime,
    balances: BTreeMap<PublicKey, u64>,
    pending: Vec<Pending>,
    confirmed: Vec<ConfirmedTx>,
    seen: BTreeSet<Digest>,
    sweep_authorities: BTreeSet<PublicKey>,
    minted: u64,
}

impl ToyLedger {
    pub fn new(confirmation_delay: LogicalTime) -> ToyLedger {
        ToyLedger {
            confirmation_delay,
            balances: BTreeMap::new(),
            pending: Vec::new(),
            confirmed: Vec::new(),
            seen: BTreeSet::new(),
            sweep_authorities: BTreeSet::new(),
            minted: 0,
        }
    }

    pub fn confirmation_delay(&self) -> LogicalTime {
        self.confirmation_delay
    }

    /// Genesis funding.
    pub fn mint(&mut self, to: PublicKey, amount: u64) {
        *self.balances.entry(to).or_default() += amount;
        self.minted += amount;
    }

    pub fn register_sweep_authority(&mut self, vasp_key: PublicKey) {
        self.sweep_authorities.insert(vasp_key);
    }

    pub fn balance(&self, key: &PublicKey) -> u64 {
        self.balances.get(key).copied().unwrap_or(0)
    }

    /// Sum of all balances; equals everything minted.
    pub fn total_supply(&self) -> u64 {
        self.balances.values().sum()
    }

    pub fn minted(&self) -> u64 {
        self.minted
    }

    fn pending_outflow(&self, key: &PublicKey) -> u64 {
        self.pending
            .iter()
            .filter(|p| p.tx.body.from == *key)
            .filter_map(|p| p.tx.body.total())
            .sum()
    }

    fn authorized(&self, tx: &Transaction) -> bool {
        let msg = tx.body.signing_bytes();
        match &tx.authority {
            TxAuthority::Owner => crypto::verify(&tx.body.from, &msg, &tx.signature),
            TxAuthority::Sweep {
                vasp_key,
                certificate,
            } => {
                self.sweep_authorities.contains(vasp_key)
                    && certificate.subject_public_key == tx.body.from
                    && crypto::verify(
                        vasp_key,
                        &certificate.signing_payload(),
                        &certificate.signature,
                    )
                    && crypto::verify(vasp_key, &msg, &tx.signature)
            }
        }
    }

    pub fn submit(&mut self, tx: Transaction, now: LogicalTime) -> Result<Digest, LedgerError> {
        let needed = tx.body.total().ok_or(LedgerError::Malformed)?;
        if tx.body.outputs.is_empty() {
            return Err(LedgerError::Malformed);
        }
        if !self.authorized(&tx) {
            return Err(LedgerError::BadSignature);
        }
        let digest = tx.digest();
        if self.seen.contains(&digest) {
            return Err(LedgerError::Duplicate);
        }
        let available = self
            .balance(&tx.body.from)
            .saturating_sub(self.pending_outflow(&tx.body.from));
        if needed > available {
            return Err(LedgerError::InsufficientBalance { available, needed });
        }
        self.seen.insert(digest);
        self.pending.push(Pending {
            tx,
            digest,
            due: now + self.confirmation_delay,
        });
        Ok(digest)
    }

    /// Confirms every pending transaction due by `now`, in pool order.
    pub fn advance(&mut self, now: LogicalTime) -> Vec<Digest> {
        let (due, rest): (Vec<Pending>, Vec<Pending>) =
            self.pending.drain(..).partition(|p| p.due <= now);
        self.pending = rest;
        let mut out = Vec::new();
        for p in due {
            let total = p.tx.body.total().unwrap_or(u64::MAX);
            let from = self.balances.entry(p.tx.body.from).or_default();
            if *from < total {
                continue;
            }
            *from -= total;
            for o in &p.tx.body.outputs {
                *self.balances.entry(o.to).or_default() += o.amount;
            }
            out.push(p.digest);
            self.confirmed.push(ConfirmedTx {
                seq: self.confirmed.len() as u64,
                digest: p.digest,
                tx: p.tx,
                confirmed_at: now,
            });
        }
        out
    }

    /// Fault hook: removes a pending transaction as if it were lost in transit.
    pub fn drop_pending(&mut self, digest: &Digest) -> bool {
        let before = self.pending.len();
        self.pending.retain(|p| p.digest != *digest);
        self.pending.len() != before
    }

    pub fn pending(&self) -> impl Iterator<Item = &Digest> {
        self.pending.iter().map(|p| &p.digest)
    }

    pub fn confirmed(&self) -> &[ConfirmedTx] {
        &self.confirmed
    }

    pub fn is_confirmed(&self, digest: &Digest) -> bool {
        self.confirmed.iter().any(|c| c.digest == *digest)
    }

    /// Canonical bytes of every confirmed transaction, for payload scans.
    pub fn payload_bytes(&self) -> Vec<Vec<u8>> {
        self.confirmed.iter().map(|c| c.tx.to_bytes()).collect()
    }
}
