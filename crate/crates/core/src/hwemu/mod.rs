//! Software emulation of a wallet's trusted hardware.
//!
//! The device holds a three-level key hierarchy (endorsement key, device
//! identity key, application keys), eight hash-extend registers, a monotonic
//! counter and an append-only usage log. Private key bytes only leave the
//! device inside a sealed [`MigrationBlob`], and only for keys created
//! migratable.

mod migration;

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::canonical_struct;
use crate::claims::{
    certification_payload, config_digest, ChainLink, Claim, ClaimBody, ClaimRequest, Component,
    CreationOrigin, DeviceId, DeviceIdentity, ErasureReceipt, Evidence, GeoPoint, KeyHandle,
    KeyKind, LogicalTime, ManifestCatalog, ManifestRef, Nonce, Subject, UsageEntry,
};
use crate::crypto::{Digest, PublicKey, SecretKey, Signature};
use crate::wire::{Canonical, Reader, WireResult};
use crate::wire_type;

pub use migration::MigrationBlob;

pub const PCR_COUNT: usize = 8;
/// Register reserved for the transaction usage chain.
pub const USAGE_PCR: usize = 7;
/// Register extended with each installed configuration digest.
pub const CONFIG_PCR: usize = 0;

pub const EK_HANDLE: KeyHandle = KeyHandle(0x8100_0001);
pub const DIK_HANDLE: KeyHandle = KeyHandle(0x8100_0002);
const FIRST_APP_HANDLE: u32 = 0x8100_0010;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HwError {
    #[error("unknown manifest {0}")]
    UnknownManifest(ManifestRef),
    #[error("unknown parent key {0:?}")]
    UnknownParent(KeyHandle),
    #[error("parent key {0:?} has been erased")]
    ParentErased(KeyHandle),
    #[error("unknown key {0:?}")]
    UnknownKey(KeyHandle),
    #[error("key {0:?} has been erased")]
    KeyErased(KeyHandle),
    #[error("key {0:?} may not be used for this operation")]
    WrongKeyRole(KeyHandle),
    #[error("register index {0} out of range")]
    IndexOutOfRange(usize),
    #[error("empty claim selection")]
    EmptySelection,
    #[error("no location fix available")]
    LocationUnavailable,
    #[error("no usage entry for digest {0}")]
    UnknownUsage(Digest),
    #[error("key {0:?} is not migratable")]
    NonMigratableKey(KeyHandle),
    #[error("migration authorization failed")]
    AuthFailure,
    #[error("blob targets manifest {blob}, device is {device}")]
    ManifestMismatch {
        blob: ManifestRef,
        device: ManifestRef,
    },
    #[error("migration blob integrity check failed")]
    IntegrityFailure,
}

pub type HwResult<T> = Result<T, HwError>;

/// A key held in shielded storage.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyRecord {
    pub handle: KeyHandle,
    pub kind: KeyKind,
    pub migratable: bool,
    pub parent: Option<KeyHandle>,
    pub public_key: PublicKey,
    pub(crate) private_key: SecretKey,
    pub created_at: LogicalTime,
    pub creation_origin: CreationOrigin,
    /// Parent's signature over the certification payload.
    pub certification: Option<Signature>,
    /// Device the key was migrated from, for injected keys.
    pub source_device: Option<DeviceId>,
}

impl Canonical for SecretKey {
    fn write_to(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.0);
    }
    fn read_from(r: &mut Reader<'_>) -> WireResult<Self> {
        Ok(SecretKey(r.array()?))
    }
}

canonical_struct!(KeyRecord {
    handle,
    kind,
    migratable,
    parent,
    public_key,
    private_key,
    created_at,
    creation_origin,
    certification,
    source_device,
});

/// What remains of a key after erasure: enough to keep provenance chains of
/// surviving children walkable, plus the receipt.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ErasedKey {
    pub kind: KeyKind,
    pub migratable: bool,
    pub parent: Option<KeyHandle>,
    pub public_key: PublicKey,
    pub creation_origin: CreationOrigin,
    pub certification: Option<Signature>,
    pub receipt: ErasureReceipt,
}

canonical_struct!(ErasedKey {
    kind,
    migratable,
    parent,
    public_key,
    creation_origin,
    certification,
    receipt,
});

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PcrEvent {
    pub index: u8,
    pub measurement: Digest,
}

canonical_struct!(PcrEvent { index, measurement });

/// Full state of an emulated wallet device. The canonical encoding of this
/// type is the device's own non-volatile storage image and includes private
/// keys; it is never sent to other parties.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeviceState {
    seed: [u8; 32],
    device_id: DeviceId,
    manifest_ref: ManifestRef,
    keys: BTreeMap<KeyHandle, KeyRecord>,
    pcr_bank: [Digest; PCR_COUNT],
    pcr_events: Vec<PcrEvent>,
    counter: u64,
    usage_log: Vec<UsageEntry>,
    erased: BTreeMap<KeyHandle, ErasedKey>,
    components: Vec<Component>,
    config_digest: Digest,
    location: Option<GeoPoint>,
    clock: LogicalTime,
    next_handle: u32,
    derivations: u64,
}

impl Canonical for [Digest; PCR_COUNT] {
    fn write_to(&self, out: &mut Vec<u8>) {
        for d in self {
            d.write_to(out);
        }
    }
    fn read_from(r: &mut Reader<'_>) -> WireResult<Self> {
        let mut bank = [Digest::ZERO; PCR_COUNT];
        for d in bank.iter_mut() {
            *d = Digest::read_from(r)?;
        }
        Ok(bank)
    }
}

canonical_struct!(DeviceState {
    seed,
    device_id,
    manifest_ref,
    keys,
    pcr_bank,
    pcr_events,
    counter,
    usage_log,
    erased,
    components,
    config_digest,
    location,
    clock,
    next_handle,
    derivations,
});
wire_type!(DeviceState, 0x20);

/// Instantiates a device for a known model. Key material is a pure function
/// of `seed`.
pub fn create_device(
    seed: [u8; 32],
    manifest_ref: &ManifestRef,
    catalog: &ManifestCatalog,
) -> HwResult<DeviceState> {
    if !catalog.contains(manifest_ref) {
        return Err(HwError::UnknownManifest(manifest_ref.clone()));
    }
    let ek = SecretKey::derive(&seed, "endorsement", 0);
    let dik = SecretKey::derive(&seed, "device-identity", 0);
    let ek_pub = ek.public();
    let dik_pub = dik.public();
    let dik_cert = ek.sign(&certification_payload(
        &dik_pub,
        KeyKind::DeviceIdentityKey,
        false,
        CreationOrigin::GeneratedOnboard,
        &ek_pub,
    ));
    let mut keys = BTreeMap::new();
    keys.insert(
        EK_HANDLE,
        KeyRecord {
            handle: EK_HANDLE,
            kind: KeyKind::EndorsementKey,
            migratable: false,
            parent: None,
            public_key: ek_pub,
            private_key: ek,
            created_at: 0,
            creation_origin: CreationOrigin::GeneratedOnboard,
            certification: None,
            source_device: None,
        },
    );
    keys.insert(
        DIK_HANDLE,
        KeyRecord {
            handle: DIK_HANDLE,
            kind: KeyKind::DeviceIdentityKey,
            migratable: false,
            parent: Some(EK_HANDLE),
            public_key: dik_pub,
            private_key: dik,
            created_at: 0,
            creation_origin: CreationOrigin::GeneratedOnboard,
            certification: Some(dik_cert),
            source_device: None,
        },
    );
    let components = Component::factory_set(manifest_ref);
    Ok(DeviceState {
        seed,
        device_id: DeviceId::from_endorsement_key(&ek_pub),
        manifest_ref: manifest_ref.clone(),
        keys,
        pcr_bank: [Digest::ZERO; PCR_COUNT],
        pcr_events: Vec::new(),
        counter: 0,
        usage_log: Vec::new(),
        erased: BTreeMap::new(),
        config_digest: config_digest(&components),
        components,
        location: None,
        clock: 0,
        next_handle: FIRST_APP_HANDLE,
        derivations: 0,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RestoreError {
    #[error(transparent)]
    Wire(#[from] crate::wire::WireError),
    #[error("storage image violates device invariant: {0}")]
    Inconsistent(&'static str),
}

/// Recomputes a register bank from the all-zero state over `events`.
pub fn replay_pcrs(events: &[PcrEvent]) -> Option<[Digest; PCR_COUNT]> {
    let mut bank = [Digest::ZERO; PCR_COUNT];
    for e in events {
        let slot = bank.get_mut(e.index as usize)?;
        *slot = slot.extend(&e.measurement);
    }
    Some(bank)
}

impl DeviceState {
    /// Decodes a storage image and checks the device invariants.
    pub fn restore(bytes: &[u8]) -> Result<DeviceState, RestoreError> {
        use crate::wire::WireType;
        let d = DeviceState::from_bytes(bytes)?;
        let bad = RestoreError::Inconsistent;
        let ek = d
            .keys
            .get(&EK_HANDLE)
            .ok_or(bad("missing endorsement key"))?;
        let dik = d.keys.get(&DIK_HANDLE).ok_or(bad("missing identity key"))?;
        if ek.kind != KeyKind::EndorsementKey
            || dik.kind != KeyKind::DeviceIdentityKey
            || ek.migratable
            || dik.migratable
            || dik.certification.is_none()
        {
            return Err(bad("identity keys malformed"));
        }
        if d.device_id != DeviceId::from_endorsement_key(&ek.public_key) {
            return Err(bad("device id does not match endorsement key"));
        }
        if d.keys
            .iter()
            .any(|(h, k)| *h != k.handle || k.private_key.public() != k.public_key)
        {
            return Err(bad("key record inconsistent"));
        }
        if d.keys.keys().any(|h| d.erased.contains_key(h)) {
            return Err(bad("live and erased keys overlap"));
        }
        if replay_pcrs(&d.pcr_events) != Some(d.pcr_bank) {
            return Err(bad("registers do not replay"));
        }
        let counters_ok = d
            .usage_log
            .iter()
            .enumerate()
            .all(|(i, e)| e.counter_value == i as u64 + 1);
        if !counters_ok || d.usage_log.len() as u64 != d.counter {
            return Err(bad("usage log counters inconsistent"));
        }
        if d.config_digest != config_digest(&d.components) {
            return Err(bad("configuration digest mismatch"));
        }
        Ok(d)
    }

    pub fn device_id(&self) -> DeviceId {
        self.device_id
    }

    pub fn manifest_ref(&self) -> &ManifestRef {
        &self.manifest_ref
    }

    pub fn counter(&self) -> u64 {
        self.counter
    }

    pub fn pcr(&self, index: usize) -> HwResult<Digest> {
        self.pcr_bank
            .get(index)
            .copied()
            .ok_or(HwError::IndexOutOfRange(index))
    }

    pub fn pcr_bank(&self) -> &[Digest; PCR_COUNT] {
        &self.pcr_bank
    }

    pub fn pcr_events(&self) -> &[PcrEvent] {
        &self.pcr_events
    }

    pub fn usage_log(&self) -> &[UsageEntry] {
        &self.usage_log
    }

    pub fn config_digest(&self) -> Digest {
        self.config_digest
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn key(&self, handle: KeyHandle) -> Option<&KeyRecord> {
        self.keys.get(&handle)
    }

    pub fn keys(&self) -> impl Iterator<Item = &KeyRecord> {
        self.keys.values()
    }

    pub fn is_erased(&self, handle: KeyHandle) -> bool {
        self.erased.contains_key(&handle)
    }

    pub fn erased(&self) -> impl Iterator<Item = (&KeyHandle, &ErasedKey)> {
        self.erased.iter()
    }

    pub fn location(&self) -> Option<GeoPoint> {
        self.location
    }

    pub fn public_key(&self, handle: KeyHandle) -> HwResult<PublicKey> {
        self.live_key(handle).map(|k| k.public_key)
    }

    /// Public identity data as a manufacturer would record it.
    pub fn identity(&self) -> DeviceIdentity {
        let ek = &self.keys[&EK_HANDLE];
        let dik = &self.keys[&DIK_HANDLE];
        DeviceIdentity {
            device_id: self.device_id,
            endorsement_key: ek.public_key,
            identity_key: dik.public_key,
            identity_certification: dik.certification.expect("identity key is certified"),
        }
    }

    /// Advances the device's logical clock (used for key timestamps).
    pub fn set_time(&mut self, now: LogicalTime) {
        self.clock = self.clock.max(now);
    }

    pub fn set_location(&mut self, location: GeoPoint) {
        self.location = Some(location);
    }

    /// Installs a new configuration and measures it into the config register.
    pub fn install_config(&mut self, components: Vec<Component>) -> Digest {
        self.config_digest = config_digest(&components);
        self.components = components;
        let d = self.config_digest;
        self.extend(CONFIG_PCR, d);
        d
    }

    fn live_key(&self, handle: KeyHandle) -> HwResult<&KeyRecord> {
        if self.erased.contains_key(&handle) {
            return Err(HwError::KeyErased(handle));
        }
        self.keys.get(&handle).ok_or(HwError::UnknownKey(handle))
    }

    fn next_secret(&mut self, label: &str) -> SecretKey {
        let k = SecretKey::derive(&self.seed, label, self.derivations);
        self.derivations += 1;
        k
    }

    fn allocate_handle(&mut self) -> KeyHandle {
        let h = KeyHandle(self.next_handle);
        self.next_handle += 1;
        h
    }

    fn extend(&mut self, index: usize, measurement: Digest) -> Digest {
        let v = self.pcr_bank[index].extend(&measurement);
        self.pcr_bank[index] = v;
        self.pcr_events.push(PcrEvent {
            index: index as u8,
            measurement,
        });
        v
    }

    fn identity_sign(&self, payload: &[u8]) -> Signature {
        self.keys[&DIK_HANDLE].private_key.sign(payload)
    }

    /// Generates an application key on board, certified by `parent`.
    pub fn create_key(&mut self, parent: KeyHandle, migratable: bool) -> HwResult<KeyHandle> {
        if self.erased.contains_key(&parent) {
            return Err(HwError::ParentErased(parent));
        }
        let parent_rec = self
            .keys
            .get(&parent)
            .ok_or(HwError::UnknownParent(parent))?;
        let parent_pub = parent_rec.public_key;
        let parent_sk = parent_rec.private_key.clone();
        let sk = self.next_secret("application");
        let public_key = sk.public();
        let certification = parent_sk.sign(&certification_payload(
            &public_key,
            KeyKind::ApplicationKey,
            migratable,
            CreationOrigin::GeneratedOnboard,
            &parent_pub,
        ));
        let handle = self.allocate_handle();
        self.keys.insert(
            handle,
            KeyRecord {
                handle,
                kind: KeyKind::ApplicationKey,
                migratable,
                parent: Some(parent),
                public_key,
                private_key: sk,
                created_at: self.clock,
                creation_origin: CreationOrigin::GeneratedOnboard,
                certification: Some(certification),
                source_device: None,
            },
        );
        Ok(handle)
    }

    /// Signs a transaction with an application key, advancing the counter and
    /// extending the usage register with the message digest.
    pub fn sign_transaction(&mut self, handle: KeyHandle, message: &[u8]) -> HwResult<Signature> {
        let key = self.live_key(handle)?;
        if key.kind != KeyKind::ApplicationKey {
            return Err(HwError::WrongKeyRole(handle));
        }
        let signature = key.private_key.sign(message);
        let digest = Digest::of(message);
        self.counter += 1;
        let snapshot = self.extend(USAGE_PCR, digest);
        self.usage_log.push(UsageEntry {
            counter_value: self.counter,
            signed_digest: digest,
            key_handle: handle,
            pcr_snapshot: snapshot,
        });
        Ok(signature)
    }

    pub fn pcr_extend(&mut self, index: usize, measurement: Digest) -> HwResult<Digest> {
        if index >= PCR_COUNT {
            return Err(HwError::IndexOutOfRange(index));
        }
        Ok(self.extend(index, measurement))
    }

    fn chain_link(&self, handle: KeyHandle) -> Option<(ChainLink, Option<KeyHandle>)> {
        if let Some(k) = self.keys.get(&handle) {
            return Some((
                ChainLink {
                    public_key: k.public_key,
                    kind: k.kind,
                    migratable: k.migratable,
                    creation_origin: k.creation_origin,
                    certification: k.certification,
                },
                k.parent,
            ));
        }
        self.erased.get(&handle).map(|k| {
            (
                ChainLink {
                    public_key: k.public_key,
                    kind: k.kind,
                    migratable: k.migratable,
                    creation_origin: k.creation_origin,
                    certification: k.certification,
                },
                k.parent,
            )
        })
    }

    /// Walks the parent links from `handle` up to the root.
    pub fn provenance_chain(&self, handle: KeyHandle) -> Vec<ChainLink> {
        let mut chain = Vec::new();
        let mut cur = Some(handle);
        let bound = self.keys.len() + self.erased.len();
        while let Some(h) = cur {
            if chain.len() > bound {
                break;
            }
            let Some((link, parent)) = self.chain_link(h) else {
                break;
            };
            chain.push(link);
            cur = parent;
        }
        chain
    }

    fn claim_for(&self, request: &ClaimRequest) -> HwResult<Claim> {
        let device = Subject::Device(self.device_id);
        Ok(match *request {
            ClaimRequest::KeyProvenance(h) => {
                let k = self.live_key(h)?;
                Claim {
                    subject: Subject::Key(h),
                    body: ClaimBody::KeyProvenance {
                        public_key: k.public_key,
                        creation_origin: k.creation_origin,
                        chain: self.provenance_chain(h),
                        source_device: k.source_device,
                    },
                }
            }
            ClaimRequest::KeyType(h) => {
                let k = self.live_key(h)?;
                Claim {
                    subject: Subject::Key(h),
                    body: ClaimBody::KeyType {
                        public_key: k.public_key,
                        kind: k.kind,
                        migratable: k.migratable,
                        creation_origin: k.creation_origin,
                    },
                }
            }
            ClaimRequest::GeoLocation => Claim {
                subject: device,
                body: ClaimBody::GeoLocation(self.location.ok_or(HwError::LocationUnavailable)?),
            },
            ClaimRequest::UsageLog => Claim {
                subject: device,
                body: ClaimBody::UsageLog {
                    entries: self.usage_log.clone(),
                    pcr7: self.pcr_bank[USAGE_PCR],
                },
            },
            ClaimRequest::SystemConfig => Claim {
                subject: device,
                body: ClaimBody::SystemConfig {
                    config_digest: self.config_digest,
                    components: self.components.clone(),
                    boot_pcrs: self.pcr_bank[..USAGE_PCR].to_vec(),
                },
            },
            ClaimRequest::SignatureOrigin(digest) => {
                let entry = self
                    .usage_log
                    .iter()
                    .find(|e| e.signed_digest == digest)
                    .ok_or(HwError::UnknownUsage(digest))?;
                let public_key = self
                    .chain_link(entry.key_handle)
                    .map(|(l, _)| l.public_key)
                    .ok_or(HwError::UnknownKey(entry.key_handle))?;
                Claim {
                    subject: Subject::Key(entry.key_handle),
                    body: ClaimBody::SignatureOrigin {
                        public_key,
                        tx_digest: digest,
                        counter_value: entry.counter_value,
                    },
                }
            }
            ClaimRequest::Erasure(h) => self
                .erased
                .get(&h)
                .map(|e| e.receipt.claim.clone())
                .ok_or(HwError::UnknownKey(h))?,
        })
    }

    /// Produces evidence over the selected claims, signed by the device
    /// identity key and bound to `nonce`.
    pub fn quote(&self, nonce: Nonce, selection: &[ClaimRequest]) -> HwResult<Evidence> {
        if selection.is_empty() {
            return Err(HwError::EmptySelection);
        }
        let claims = selection
            .iter()
            .map(|r| self.claim_for(r))
            .collect::<HwResult<Vec<_>>>()?;
        let mut ev = Evidence {
            claims,
            nonce,
            device_id: self.device_id,
            manifest_ref: self.manifest_ref.clone(),
            counter: self.counter,
            signature: Signature::default(),
        };
        ev.signature = self.identity_sign(&ev.signing_payload());
        Ok(ev)
    }

    /// Destroys an application key and returns a signed receipt.
    pub fn erase_key(&mut self, handle: KeyHandle) -> HwResult<ErasureReceipt> {
        let key = self.keys.get(&handle).ok_or(HwError::UnknownKey(handle))?;
        if key.kind != KeyKind::ApplicationKey {
            return Err(HwError::WrongKeyRole(handle));
        }
        let key = self.keys.remove(&handle).expect("checked above");
        let mut receipt = ErasureReceipt {
            device_id: self.device_id,
            claim: Claim {
                subject: Subject::Key(handle),
                body: ClaimBody::Erasure {
                    public_key: key.public_key,
                    counter_at_erasure: self.counter,
                },
            },
            signature: Signature::default(),
        };
        receipt.signature = self.identity_sign(&receipt.signing_payload());
        self.erased.insert(
            handle,
            ErasedKey {
                kind: key.kind,
                migratable: key.migratable,
                parent: key.parent,
                public_key: key.public_key,
                creation_origin: key.creation_origin,
                certification: key.certification,
                receipt: receipt.clone(),
            },
        );
        Ok(receipt)
    }

    /// Seals a copy of a migratable key for `auth_secret`. The key stays usable here.
    pub fn export_key(&mut self, handle: KeyHandle, auth_secret: &[u8]) -> HwResult<MigrationBlob> {
        let key = self.live_key(handle).map_err(|e| match e {
            HwError::KeyErased(h) => HwError::UnknownKey(h),
            e => e,
        })?;
        if !key.migratable {
            return Err(HwError::NonMigratableKey(handle));
        }
        let key = key.clone();
        let nonce_seed = self.next_secret("blob-nonce");
        Ok(migration::seal(
            &key,
            self.device_id,
            &self.manifest_ref,
            auth_secret,
            &nonce_seed,
        ))
    }

    /// Installs a key from a migration blob sealed for this device model.
    pub fn import_blob(&mut self, blob: &MigrationBlob, auth_secret: &[u8]) -> HwResult<KeyHandle> {
        if blob.target_manifest_ref != self.manifest_ref {
            return Err(HwError::ManifestMismatch {
                blob: blob.target_manifest_ref.clone(),
                device: self.manifest_ref.clone(),
            });
        }
        let moved = migration::unseal(blob, auth_secret)?;
        let handle = self.allocate_handle();
        self.keys.insert(
            handle,
            KeyRecord {
                handle,
                kind: KeyKind::ApplicationKey,
                migratable: moved.migratable,
                parent: None,
                public_key: moved.private_key.public(),
                private_key: moved.private_key,
                created_at: self.clock,
                creation_origin: CreationOrigin::Injected,
                certification: None,
                source_device: Some(blob.source_device),
            },
        );
        Ok(handle)
    }

    /// All claim kinds this device can currently report for `handle`.
    pub fn full_selection(&self, handle: KeyHandle) -> Vec<ClaimRequest> {
        let mut sel = vec![
            ClaimRequest::KeyProvenance(handle),
            ClaimRequest::KeyType(handle),
            ClaimRequest::SystemConfig,
            ClaimRequest::UsageLog,
        ];
        if self.location.is_some() {
            sel.push(ClaimRequest::GeoLocation);
        }
        sel
    }
}

/// The device operations a relying party drives remotely. Implemented by
/// [`DeviceState`]; test doubles implement it to model misbehaving wallets.
pub trait WalletDevice {
    fn identity(&self) -> DeviceIdentity;
    fn manifest_ref(&self) -> ManifestRef;
    fn public_key(&self, handle: KeyHandle) -> HwResult<PublicKey>;
    fn quote(&self, nonce: Nonce, selection: &[ClaimRequest]) -> HwResult<Evidence>;
    fn create_key(&mut self, parent: KeyHandle, migratable: bool) -> HwResult<KeyHandle>;
    fn sign_transaction(&mut self, handle: KeyHandle, message: &[u8]) -> HwResult<Signature>;
    fn export_key(&mut self, handle: KeyHandle, auth_secret: &[u8]) -> HwResult<MigrationBlob>;
    fn import_blob(&mut self, blob: &MigrationBlob, auth_secret: &[u8]) -> HwResult<KeyHandle>;
    fn erase_key(&mut self, handle: KeyHandle) -> HwResult<ErasureReceipt>;
}

impl WalletDevice for DeviceState {
    fn identity(&self) -> DeviceIdentity {
        DeviceState::identity(self)
    }
    fn manifest_ref(&self) -> ManifestRef {
        self.manifest_ref.clone()
    }
    fn public_key(&self, handle: KeyHandle) -> HwResult<PublicKey> {
        DeviceState::public_key(self, handle)
    }
    fn quote(&self, nonce: Nonce, selection: &[ClaimRequest]) -> HwResult<Evidence> {
        DeviceState::quote(self, nonce, selection)
    }
    fn create_key(&mut self, parent: KeyHandle, migratable: bool) -> HwResult<KeyHandle> {
        DeviceState::create_key(self, parent, migratable)
    }
    fn sign_transaction(&mut self, handle: KeyHandle, message: &[u8]) -> HwResult<Signature> {
        DeviceState::sign_transaction(self, handle, message)
    }
    fn export_key(&mut self, handle: KeyHandle, auth_secret: &[u8]) -> HwResult<MigrationBlob> {
        DeviceState::export_key(self, handle, auth_secret)
    }
    fn import_blob(&mut self, blob: &MigrationBlob, auth_secret: &[u8]) -> HwResult<KeyHandle> {
        DeviceState::import_blob(self, blob, auth_secret)
    }
    fn erase_key(&mut self, handle: KeyHandle) -> HwResult<ErasureReceipt> {
        DeviceState::erase_key(self, handle)
    }
}

#[cfg(test)]
mod tests;
