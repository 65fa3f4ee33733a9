//! Claim and signed-container data model.

use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

use crate::crypto::{Digest, PublicKey, Signature};
use crate::wire::{Canonical, Reader, WireResult};
use crate::{canonical_enum, canonical_struct, wire_type};

/// Simulator ticks. No wall-clock time appears anywhere in the stack.
pub type LogicalTime = u64;

pub type Nonce = [u8; 16];

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct KeyHandle(pub u32);

impl fmt::Debug for KeyHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "KeyHandle({:#x})", self.0)
    }
}

canonical_struct!(KeyHandle { 0 });

/// Identifier of an emulated device: hash of its endorsement public key.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct DeviceId(pub Digest);

impl DeviceId {
    pub fn from_endorsement_key(ek: &PublicKey) -> DeviceId {
        DeviceId(Digest::of_parts(&[b"device-id", ek.as_bytes()]))
    }
}

impl fmt::Debug for DeviceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DeviceId({})", &self.0.to_hex()[..16])
    }
}

canonical_struct!(DeviceId { 0 });

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct ManifestRef(pub String);

impl ManifestRef {
    pub fn new(s: impl Into<String>) -> Self {
        ManifestRef(s.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for ManifestRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ManifestRef({:?})", self.0)
    }
}

impl fmt::Display for ManifestRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

canonical_struct!(ManifestRef { 0 });

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum KeyKind {
    EndorsementKey,
    DeviceIdentityKey,
    ApplicationKey,
}

canonical_enum!(KeyKind {
    EndorsementKey = 0,
    DeviceIdentityKey = 1,
    ApplicationKey = 2,
});

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CreationOrigin {
    GeneratedOnboard,
    Injected,
}

canonical_enum!(CreationOrigin {
    GeneratedOnboard = 0,
    Injected = 1,
});

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum HardwareClass {
    TrustedHardware,
    SoftwareOnly,
}

canonical_enum!(HardwareClass {
    TrustedHardware = 0,
    SoftwareOnly = 1,
});

/// A point on the globe in fixed-point units (micro-degrees, millimetres).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct GeoPoint {
    pub lat_micro: i64,
    pub lon_micro: i64,
    pub alt_mm: i64,
}

canonical_struct!(GeoPoint {
    lat_micro,
    lon_micro,
    alt_mm
});

impl GeoPoint {
    pub fn from_degrees(lat: f64, lon: f64, alt_m: f64) -> GeoPoint {
        GeoPoint {
            lat_micro: (lat * 1e6).round() as i64,
            lon_micro: (lon * 1e6).round() as i64,
            alt_mm: (alt_m * 1e3).round() as i64,
        }
    }

    pub fn lat(&self) -> f64 {
        self.lat_micro as f64 / 1e6
    }

    pub fn lon(&self) -> f64 {
        self.lon_micro as f64 / 1e6
    }

    pub fn alt(&self) -> f64 {
        self.alt_mm as f64 / 1e3
    }
}

/// One installed hardware, firmware or software component.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Component {
    pub name: String,
    pub version: String,
}

canonical_struct!(Component { name, version });

impl Component {
    pub fn new(name: &str, version: &str) -> Self {
        Component {
            name: name.into(),
            version: version.into(),
        }
    }

    /// The configuration a device of the given model ships with.
    pub fn factory_set(manifest_ref: &ManifestRef) -> Vec<Component> {
        vec![
            Component::new("hardware", manifest_ref.as_str()),
            Component::new("firmware", "1.0.0"),
            Component::new("wallet-app", "1.0.0"),
        ]
    }
}

/// Digest of a configuration descriptor (the canonical component list).
pub fn config_digest(components: &[Component]) -> Digest {
    let mut buf = b"config".to_vec();
    components.to_vec().write_to(&mut buf);
    Digest::of(&buf)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct UsageEntry {
    pub counter_value: u64,
    pub signed_digest: Digest,
    pub key_handle: KeyHandle,
    pub pcr_snapshot: Digest,
}

canonical_struct!(UsageEntry {
    counter_value,
    signed_digest,
    key_handle,
    pcr_snapshot
});

/// One link of a key provenance chain. `certification` is the parent's
/// signature over [`certification_payload`]; the root link has none.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct ChainLink {
    pub public_key: PublicKey,
    pub kind: KeyKind,
    pub migratable: bool,
    pub creation_origin: CreationOrigin,
    pub certification: Option<Signature>,
}

canonical_struct!(ChainLink {
    public_key,
    kind,
    migratable,
    creation_origin,
    certification
});

/// Bytes a parent key signs when certifying a child key.
pub fn certification_payload(
    child: &PublicKey,
    kind: KeyKind,
    migratable: bool,
    origin: CreationOrigin,
    parent: &PublicKey,
) -> Vec<u8> {
    let mut out = b"key-certification".to_vec();
    child.write_to(&mut out);
    kind.write_to(&mut out);
    migratable.write_to(&mut out);
    origin.write_to(&mut out);
    parent.write_to(&mut out);
    out
}

impl ChainLink {
    /// True when each link is certified by the next and the chain ends at `root`.
    pub fn chain_reaches(chain: &[ChainLink], root: &PublicKey) -> bool {
        let Some(last) = chain.last() else {
            return false;
        };
        if last.public_key != *root || last.kind != KeyKind::EndorsementKey {
            return false;
        }
        chain.windows(2).all(|w| {
            let (child, parent) = (&w[0], &w[1]);
            let Some(sig) = &child.certification else {
                return false;
            };
            let payload = certification_payload(
                &child.public_key,
                child.kind,
                child.migratable,
                child.creation_origin,
                &parent.public_key,
            );
            crate::crypto::verify(&parent.public_key, &payload, sig)
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ClaimKind {
    KeyProvenance,
    KeyType,
    GeoLocation,
    UsageLog,
    SystemConfig,
    SignatureOrigin,
    Erasure,
}

impl ClaimKind {
    pub const ALL: [ClaimKind; 7] = [
        ClaimKind::KeyProvenance,
        ClaimKind::KeyType,
        ClaimKind::GeoLocation,
        ClaimKind::UsageLog,
        ClaimKind::SystemConfig,
        ClaimKind::SignatureOrigin,
        ClaimKind::Erasure,
    ];

    /// Name used in policy field paths.
    pub fn policy_name(self) -> &'static str {
        match self {
            ClaimKind::KeyProvenance => "key_provenance",
            ClaimKind::KeyType => "key_type",
            ClaimKind::GeoLocation => "geo_location",
            ClaimKind::UsageLog => "usage_log",
            ClaimKind::SystemConfig => "system_config",
            ClaimKind::SignatureOrigin => "signature_origin",
            ClaimKind::Erasure => "erasure",
        }
    }

    pub fn from_policy_name(s: &str) -> Option<ClaimKind> {
        ClaimKind::ALL.into_iter().find(|k| k.policy_name() == s)
    }
}

canonical_enum!(ClaimKind {
    KeyProvenance = 0,
    KeyType = 1,
    GeoLocation = 2,
    UsageLog = 3,
    SystemConfig = 4,
    SignatureOrigin = 5,
    Erasure = 6,
});

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Subject {
    Key(KeyHandle),
    Device(DeviceId),
}

impl Canonical for Subject {
    fn write_to(&self, out: &mut Vec<u8>) {
        match self {
            Subject::Key(h) => {
                out.push(0);
                h.write_to(out);
            }
            Subject::Device(d) => {
                out.push(1);
                d.write_to(out);
            }
        }
    }
    fn read_from(r: &mut Reader<'_>) -> WireResult<Self> {
        match r.u8()? {
            0 => Ok(Subject::Key(KeyHandle::read_from(r)?)),
            1 => Ok(Subject::Device(DeviceId::read_from(r)?)),
            _ => Err(r.malformed("invalid subject tag")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
#[serde(tag = "claim", rename_all = "snake_case")]
pub enum ClaimBody {
    KeyProvenance {
        public_key: PublicKey,
        creation_origin: CreationOrigin,
        chain: Vec<ChainLink>,
        source_device: Option<DeviceId>,
    },
    KeyType {
        public_key: PublicKey,
        kind: KeyKind,
        migratable: bool,
        creation_origin: CreationOrigin,
    },
    GeoLocation(GeoPoint),
    UsageLog {
        entries: Vec<UsageEntry>,
        pcr7: Digest,
    },
    SystemConfig {
        config_digest: Digest,
        components: Vec<Component>,
        /// PCR[0..7] at quote time: the boot and configuration measurements.
        boot_pcrs: Vec<Digest>,
    },
    SignatureOrigin {
        public_key: PublicKey,
        tx_digest: Digest,
        counter_value: u64,
    },
    Erasure {
        public_key: PublicKey,
        counter_at_erasure: u64,
    },
}

impl ClaimBody {
    pub fn kind(&self) -> ClaimKind {
        match self {
            ClaimBody::KeyProvenance { .. } => ClaimKind::KeyProvenance,
            ClaimBody::KeyType { .. } => ClaimKind::KeyType,
            ClaimBody::GeoLocation(_) => ClaimKind::GeoLocation,
            ClaimBody::UsageLog { .. } => ClaimKind::UsageLog,
            ClaimBody::SystemConfig { .. } => ClaimKind::SystemConfig,
            ClaimBody::SignatureOrigin { .. } => ClaimKind::SignatureOrigin,
            ClaimBody::Erasure { .. } => ClaimKind::Erasure,
        }
    }
}

/// A single assertion about a key or device.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Claim {
    pub subject: Subject,
    pub body: ClaimBody,
}

impl Claim {
    pub fn kind(&self) -> ClaimKind {
        self.body.kind()
    }
}

// Layout: kind discriminant, subject, then the kind-specific fields.
impl Canonical for Claim {
    fn write_to(&self, out: &mut Vec<u8>) {
        self.kind().write_to(out);
        self.subject.write_to(out);
        match &self.body {
            ClaimBody::KeyProvenance {
                public_key,
                creation_origin,
                chain,
                source_device,
            } => {
                public_key.write_to(out);
                creation_origin.write_to(out);
                chain.write_to(out);
                source_device.write_to(out);
            }
            ClaimBody::KeyType {
                public_key,
                kind,
                migratable,
                creation_origin,
            } => {
                public_key.write_to(out);
                kind.write_to(out);
                migratable.write_to(out);
                creation_origin.write_to(out);
            }
            ClaimBody::GeoLocation(p) => p.write_to(out),
            ClaimBody::UsageLog { entries, pcr7 } => {
                entries.write_to(out);
                pcr7.write_to(out);
            }
            ClaimBody::SystemConfig {
                config_digest,
                components,
                boot_pcrs,
            } => {
                config_digest.write_to(out);
                components.write_to(out);
                boot_pcrs.write_to(out);
            }
            ClaimBody::SignatureOrigin {
                public_key,
                tx_digest,
                counter_value,
            } => {
                public_key.write_to(out);
                tx_digest.write_to(out);
                counter_value.write_to(out);
            }
            ClaimBody::Erasure {
                public_key,
                counter_at_erasure,
            } => {
                public_key.write_to(out);
                counter_at_erasure.write_to(out);
            }
        }
    }

    fn read_from(r: &mut Reader<'_>) -> WireResult<Self> {
        let kind = ClaimKind::read_from(r)?;
        let subject = Subject::read_from(r)?;
        let body = match kind {
            ClaimKind::KeyProvenance => ClaimBody::KeyProvenance {
                public_key: Canonical::read_from(r)?,
                creation_origin: Canonical::read_from(r)?,
                chain: Canonical::read_from(r)?,
                source_device: Canonical::read_from(r)?,
            },
            ClaimKind::KeyType => ClaimBody::KeyType {
                public_key: Canonical::read_from(r)?,
                kind: Canonical::read_from(r)?,
                migratable: Canonical::read_from(r)?,
                creation_origin: Canonical::read_from(r)?,
            },
            ClaimKind::GeoLocation => ClaimBody::GeoLocation(Canonical::read_from(r)?),
            ClaimKind::UsageLog => ClaimBody::UsageLog {
                entries: Canonical::read_from(r)?,
                pcr7: Canonical::read_from(r)?,
            },
            ClaimKind::SystemConfig => ClaimBody::SystemConfig {
                config_digest: Canonical::read_from(r)?,
                components: Canonical::read_from(r)?,
                boot_pcrs: Canonical::read_from(r)?,
            },
            ClaimKind::SignatureOrigin => ClaimBody::SignatureOrigin {
                public_key: Canonical::read_from(r)?,
                tx_digest: Canonical::read_from(r)?,
                counter_value: Canonical::read_from(r)?,
            },
            ClaimKind::Erasure => ClaimBody::Erasure {
                public_key: Canonical::read_from(r)?,
                counter_at_erasure: Canonical::read_from(r)?,
            },
        };
        Ok(Claim { subject, body })
    }
}

wire_type!(Claim, 0x01);

/// What a challenger asks the device to report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum ClaimRequest {
    KeyProvenance(KeyHandle),
    KeyType(KeyHandle),
    GeoLocation,
    UsageLog,
    SystemConfig,
    SignatureOrigin(Digest),
    Erasure(KeyHandle),
}

impl ClaimRequest {
    pub fn kind(&self) -> ClaimKind {
        match self {
            ClaimRequest::KeyProvenance(_) => ClaimKind::KeyProvenance,
            ClaimRequest::KeyType(_) => ClaimKind::KeyType,
            ClaimRequest::GeoLocation => ClaimKind::GeoLocation,
            ClaimRequest::UsageLog => ClaimKind::UsageLog,
            ClaimRequest::SystemConfig => ClaimKind::SystemConfig,
            ClaimRequest::SignatureOrigin(_) => ClaimKind::SignatureOrigin,
            ClaimRequest::Erasure(_) => ClaimKind::Erasure,
        }
    }
}

impl Canonical for ClaimRequest {
    fn write_to(&self, out: &mut Vec<u8>) {
        self.kind().write_to(out);
        match self {
            ClaimRequest::KeyProvenance(h)
            | ClaimRequest::KeyType(h)
            | ClaimRequest::Erasure(h) => h.write_to(out),
            ClaimRequest::SignatureOrigin(d) => d.write_to(out),
            ClaimRequest::GeoLocation | ClaimRequest::UsageLog | ClaimRequest::SystemConfig => {}
        }
    }
    fn read_from(r: &mut Reader<'_>) -> WireResult<Self> {
        Ok(match ClaimKind::read_from(r)? {
            ClaimKind::KeyProvenance => ClaimRequest::KeyProvenance(Canonical::read_from(r)?),
            ClaimKind::KeyType => ClaimRequest::KeyType(Canonical::read_from(r)?),
            ClaimKind::GeoLocation => ClaimRequest::GeoLocation,
            ClaimKind::UsageLog => ClaimRequest::UsageLog,
            ClaimKind::SystemConfig => ClaimRequest::SystemConfig,
            ClaimKind::SignatureOrigin => ClaimRequest::SignatureOrigin(Canonical::read_from(r)?),
            ClaimKind::Erasure => ClaimRequest::Erasure(Canonical::read_from(r)?),
        })
    }
}

/// Declares a signed container: `signing_payload` covers the tag and every
/// listed field; the wire form appends the signature.
#[macro_export]
macro_rules! signed_struct {
    ($ty:ident, $tag:literal { $($field:ident),* $(,)? }) => {
        impl $ty {
            pub fn signing_payload(&self) -> Vec<u8> {
                let mut out = vec![b'S', b'I', b'G', $tag];
                $( $crate::wire::Canonical::write_to(&self.$field, &mut out); )*
                out
            }
        }
        impl $crate::wire::Canonical for $ty {
            fn write_to(&self, out: &mut Vec<u8>) {
                $( $crate::wire::Canonical::write_to(&self.$field, out); )*
                $crate::wire::Canonical::write_to(&self.signature, out);
            }
            fn read_from(r: &mut $crate::wire::Reader<'_>) -> $crate::wire::WireResult<Self> {
                Ok($ty {
                    $( $field: $crate::wire::Canonical::read_from(r)?, )*
                    signature: $crate::wire::Canonical::read_from(r)?,
                })
            }
        }
        $crate::wire_type!($ty, $tag);
    };
}

/// Signed claim set produced by an attester in response to a challenge.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Evidence {
    pub claims: Vec<Claim>,
    #[serde(serialize_with = "crate::claims::render::hex_bytes")]
    pub nonce: Nonce,
    pub device_id: DeviceId,
    pub manifest_ref: ManifestRef,
    pub counter: u64,
    pub signature: Signature,
}

signed_struct!(Evidence, 0x02 {
    claims,
    nonce,
    device_id,
    manifest_ref,
    counter
});

impl Evidence {
    pub fn claims_of(&self, kind: ClaimKind) -> impl Iterator<Item = &Claim> {
        self.claims.iter().filter(move |c| c.kind() == kind)
    }
}

/// Public identity of a device as recorded by its manufacturer.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct DeviceIdentity {
    pub device_id: DeviceId,
    pub endorsement_key: PublicKey,
    pub identity_key: PublicKey,
    /// EK signature certifying the identity key.
    pub identity_certification: Signature,
}

canonical_struct!(DeviceIdentity {
    device_id,
    endorsement_key,
    identity_key,
    identity_certification
});

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum EndorsementScope {
    Device(DeviceIdentity),
    Model,
}

impl Canonical for EndorsementScope {
    fn write_to(&self, out: &mut Vec<u8>) {
        match self {
            EndorsementScope::Device(id) => {
                out.push(0);
                id.write_to(out);
            }
            EndorsementScope::Model => out.push(1),
        }
    }
    fn read_from(r: &mut Reader<'_>) -> WireResult<Self> {
        match r.u8()? {
            0 => Ok(EndorsementScope::Device(DeviceIdentity::read_from(r)?)),
            1 => Ok(EndorsementScope::Model),
            _ => Err(r.malformed("invalid endorsement scope")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Endorsement {
    pub endorser_id: String,
    pub scope: EndorsementScope,
    pub manifest_ref: ManifestRef,
    pub reference_claims: Vec<Claim>,
    pub signature: Signature,
}

signed_struct!(Endorsement, 0x03 {
    endorser_id,
    scope,
    manifest_ref,
    reference_claims
});

impl Endorsement {
    pub fn device(&self) -> Option<&DeviceIdentity> {
        match &self.scope {
            EndorsementScope::Device(id) => Some(id),
            EndorsementScope::Model => None,
        }
    }
}

/// Manufacturer-published approved configuration for a device model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ReferenceManifest {
    pub manifest_ref: ManifestRef,
    pub approved_config_digests: BTreeSet<Digest>,
    pub hardware_class: HardwareClass,
    pub manufacturer_id: String,
    pub signature: Signature,
}

signed_struct!(ReferenceManifest, 0x04 {
    manifest_ref,
    approved_config_digests,
    hardware_class,
    manufacturer_id
});

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
}

canonical_enum!(Verdict { Pass = 0, Fail = 1 });

/// Verifier-signed appraisal outcome.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AttestationResult {
    pub verifier_id: String,
    pub device_id: DeviceId,
    pub policy_id: String,
    pub verdict: Verdict,
    pub failed_rules: Vec<String>,
    pub loa: Option<u8>,
    pub evaluated_at: LogicalTime,
    #[serde(serialize_with = "crate::claims::render::hex_bytes")]
    pub nonce: Nonce,
    /// The appraised claims, kept so relying parties can audit what passed.
    pub claims: Vec<Claim>,
    pub signature: Signature,
}

signed_struct!(AttestationResult, 0x05 {
    verifier_id,
    device_id,
    policy_id,
    verdict,
    failed_rules,
    loa,
    evaluated_at,
    nonce,
    claims
});

impl AttestationResult {
    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    /// The `migratable` flag this result attests for `key`, if any.
    pub fn attested_migratable(&self, key: &PublicKey) -> Option<bool> {
        self.claims.iter().find_map(|c| match &c.body {
            ClaimBody::KeyType {
                public_key,
                migratable,
                ..
            } if public_key == key => Some(*migratable),
            _ => None,
        })
    }
}

/// Simplified public-key certificate issued by a VASP.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Certificate {
    pub subject_public_key: PublicKey,
    pub vaan: u64,
    pub issuer_vasp_code: u32,
    pub non_migratable_marking: bool,
    pub provenance_known_marking: bool,
    pub signature: Signature,
}

signed_struct!(Certificate, 0x06 {
    subject_public_key,
    vaan,
    issuer_vasp_code,
    non_migratable_marking,
    provenance_known_marking
});

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct PartyInfo {
    pub name: String,
    pub vaan: u64,
    pub public_key: PublicKey,
}

canonical_struct!(PartyInfo {
    name,
    vaan,
    public_key
});
wire_type!(PartyInfo, 0x07);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TravelRuleStatus {
    PreAuthorized,
    Verified,
    PostVerified,
    Rejected,
}

canonical_enum!(TravelRuleStatus {
    PreAuthorized = 0,
    Verified = 1,
    PostVerified = 2,
    Rejected = 3,
});

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TravelRuleRecord {
    pub originator: PartyInfo,
    pub beneficiary: PartyInfo,
    pub amount: u64,
    pub tx_digest: Digest,
    pub status: TravelRuleStatus,
}

canonical_struct!(TravelRuleRecord {
    originator,
    beneficiary,
    amount,
    tx_digest,
    status
});
wire_type!(TravelRuleRecord, 0x08);

/// Device-signed proof that a key was destroyed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ErasureReceipt {
    pub device_id: DeviceId,
    pub claim: Claim,
    pub signature: Signature,
}

signed_struct!(ErasureReceipt, 0x09 { device_id, claim });

impl ErasureReceipt {
    pub fn handle(&self) -> Option<KeyHandle> {
        match self.claim.subject {
            Subject::Key(h) => Some(h),
            Subject::Device(_) => None,
        }
    }

    pub fn erased_key(&self) -> Option<PublicKey> {
        match &self.claim.body {
            ClaimBody::Erasure { public_key, .. } => Some(*public_key),
            _ => None,
        }
    }

    pub fn verify(&self, identity_key: &PublicKey) -> bool {
        self.claim.kind() == ClaimKind::Erasure
            && crate::crypto::verify(identity_key, &self.signing_payload(), &self.signature)
    }
}
