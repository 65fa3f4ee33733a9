//! Claims, signed containers, endorsements and chain verification.

mod model;
pub mod render;

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::crypto::{self, Digest, PublicKey, SecretKey};

pub use model::*;

/// Why an evidence/endorsement chain did not verify.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ChainFailure {
    NoEndorsement,
    BadEndorsementSignature,
    ModelScopeOnly,
    SubjectMismatch,
    IdentityMismatch,
    BadIdentityCertification,
    ManifestMismatch,
    BadEvidenceSignature,
}

impl ChainFailure {
    pub fn code(self) -> &'static str {
        match self {
            ChainFailure::NoEndorsement => "chain.no_endorsement",
            ChainFailure::BadEndorsementSignature => "chain.bad_endorsement_signature",
            ChainFailure::ModelScopeOnly => "chain.model_scope_only",
            ChainFailure::SubjectMismatch => "chain.subject_mismatch",
            ChainFailure::IdentityMismatch => "chain.identity_mismatch",
            ChainFailure::BadIdentityCertification => "chain.bad_identity_certification",
            ChainFailure::ManifestMismatch => "chain.manifest_mismatch",
            ChainFailure::BadEvidenceSignature => "chain.bad_evidence_signature",
        }
    }
}

/// Boolean verification outcome that always carries a reason on failure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChainCheck {
    pub reason: Option<ChainFailure>,
}

impl ChainCheck {
    pub fn ok(&self) -> bool {
        self.reason.is_none()
    }

    fn fail(reason: ChainFailure) -> ChainCheck {
        ChainCheck {
            reason: Some(reason),
        }
    }
}

/// Checks that `evidence` was signed by the identity key named in
/// `endorsement` and that the endorsement itself was signed by `endorser_root`.
pub fn verify_chain(
    evidence: &Evidence,
    endorsement: Option<&Endorsement>,
    endorser_root: &PublicKey,
) -> ChainCheck {
    let Some(endorsement) = endorsement else {
        return ChainCheck::fail(ChainFailure::NoEndorsement);
    };
    if !crypto::verify(
        endorser_root,
        &endorsement.signing_payload(),
        &endorsement.signature,
    ) {
        return ChainCheck::fail(ChainFailure::BadEndorsementSignature);
    }
    let Some(identity) = endorsement.device() else {
        return ChainCheck::fail(ChainFailure::ModelScopeOnly);
    };
    if identity.device_id != evidence.device_id {
        return ChainCheck::fail(ChainFailure::SubjectMismatch);
    }
    if DeviceId::from_endorsement_key(&identity.endorsement_key) != identity.device_id {
        return ChainCheck::fail(ChainFailure::IdentityMismatch);
    }
    if !identity_certified(identity) {
        return ChainCheck::fail(ChainFailure::BadIdentityCertification);
    }
    if endorsement.manifest_ref != evidence.manifest_ref {
        return ChainCheck::fail(ChainFailure::ManifestMismatch);
    }
    if !crypto::verify(
        &identity.identity_key,
        &evidence.signing_payload(),
        &evidence.signature,
    ) {
        return ChainCheck::fail(ChainFailure::BadEvidenceSignature);
    }
    ChainCheck { reason: None }
}

/// True when the identity key is certified by the endorsement key.
pub fn identity_certified(identity: &DeviceIdentity) -> bool {
    let payload = certification_payload(
        &identity.identity_key,
        KeyKind::DeviceIdentityKey,
        false,
        CreationOrigin::GeneratedOnboard,
        &identity.endorsement_key,
    );
    crypto::verify(
        &identity.endorsement_key,
        &payload,
        &identity.identity_certification,
    )
}

/// Reference manifests indexed by model identifier.
#[derive(Debug, Clone, Default)]
pub struct ManifestCatalog {
    manifests: BTreeMap<ManifestRef, ReferenceManifest>,
}

impl ManifestCatalog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, manifest: ReferenceManifest) {
        self.manifests
            .insert(manifest.manifest_ref.clone(), manifest);
    }

    pub fn get(&self, r: &ManifestRef) -> Option<&ReferenceManifest> {
        self.manifests.get(r)
    }

    pub fn contains(&self, r: &ManifestRef) -> bool {
        self.manifests.contains_key(r)
    }

    pub fn iter(&self) -> impl Iterator<Item = &ReferenceManifest> {
        self.manifests.values()
    }
}

impl FromIterator<ReferenceManifest> for ManifestCatalog {
    fn from_iter<I: IntoIterator<Item = ReferenceManifest>>(iter: I) -> Self {
        let mut c = ManifestCatalog::new();
        for m in iter {
            c.insert(m);
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EndorseError {
    #[error("endorser holds no manifest {0}")]
    UnknownManifest(ManifestRef),
    #[error("manifest must approve at least one configuration")]
    EmptyManifest,
}

/// A supply-chain actor: publishes reference manifests and endorses devices.
#[derive(Debug, Clone)]
pub struct Endorser {
    pub id: String,
    key: SecretKey,
    catalog: ManifestCatalog,
}

impl Endorser {
    pub fn new(id: impl Into<String>, seed: &[u8; 32]) -> Self {
        let id = id.into();
        Endorser {
            key: SecretKey::derive(seed, &format!("endorser/{id}"), 0),
            id,
            catalog: ManifestCatalog::new(),
        }
    }

    pub fn root_key(&self) -> PublicKey {
        self.key.public()
    }

    pub fn catalog(&self) -> &ManifestCatalog {
        &self.catalog
    }

    /// Publishes a signed manifest approving the given configurations.
    pub fn publish_manifest(
        &mut self,
        manifest_ref: ManifestRef,
        approved: impl IntoIterator<Item = Digest>,
        hardware_class: HardwareClass,
    ) -> Result<ReferenceManifest, EndorseError> {
        let approved: BTreeSet<Digest> = approved.into_iter().collect();
        if approved.is_empty() {
            return Err(EndorseError::EmptyManifest);
        }
        let mut m = ReferenceManifest {
            manifest_ref,
            approved_config_digests: approved,
            hardware_class,
            manufacturer_id: self.id.clone(),
            signature: Default::default(),
        };
        m.signature = self.key.sign(&m.signing_payload());
        self.catalog.insert(m.clone());
        Ok(m)
    }

    /// Convenience: a manifest approving exactly the factory configuration.
    pub fn publish_factory_manifest(
        &mut self,
        manifest_ref: &str,
        hardware_class: HardwareClass,
    ) -> ReferenceManifest {
        let r = ManifestRef::new(manifest_ref);
        let digest = config_digest(&Component::factory_set(&r));
        self.publish_manifest(r, [digest], hardware_class)
            .expect("factory manifest is nonempty")
    }

    pub fn make_endorsement(
        &self,
        device: &DeviceIdentity,
        manifest_ref: &ManifestRef,
    ) -> Result<Endorsement, EndorseError> {
        make_endorsement(&self.id, &self.key, &self.catalog, device, manifest_ref)
    }
}

/// Signs an endorsement embedding the device identity and its intrinsic
/// reference claims (non-migratable onboard identity key, factory config).
pub fn make_endorsement(
    endorser_id: &str,
    endorser_key: &SecretKey,
    catalog: &ManifestCatalog,
    device: &DeviceIdentity,
    manifest_ref: &ManifestRef,
) -> Result<Endorsement, EndorseError> {
    if !catalog.contains(manifest_ref) {
        return Err(EndorseError::UnknownManifest(manifest_ref.clone()));
    }
    let factory = Component::factory_set(manifest_ref);
    let reference_claims = vec![
        Claim {
            subject: Subject::Device(device.device_id),
            body: ClaimBody::KeyType {
                public_key: device.identity_key,
                kind: KeyKind::DeviceIdentityKey,
                migratable: false,
                creation_origin: CreationOrigin::GeneratedOnboard,
            },
        },
        Claim {
            subject: Subject::Device(device.device_id),
            body: ClaimBody::SystemConfig {
                config_digest: config_digest(&factory),
                components: factory,
                boot_pcrs: Vec::new(),
            },
        },
    ];
    let mut e = Endorsement {
        endorser_id: endorser_id.to_string(),
        scope: EndorsementScope::Device(device.clone()),
        manifest_ref: manifest_ref.clone(),
        reference_claims,
        signature: Default::default(),
    };
    e.signature = endorser_key.sign(&e.signing_payload());
    Ok(e)
}
