//! Ready-made actors for examples, tests and shipped scenarios.

use crate::claims::{Endorser, HardwareClass, ManifestRef};
use crate::hwemu::{create_device, DeviceState};
use crate::verifier::{Verifier, VerifierConfig};

/// Trusted-hardware wallet model.
pub const MODEL_A: &str = "mfr-model-A";
/// A second trusted-hardware model; blobs do not move between A and B.
pub const MODEL_B: &str = "mfr-model-B";
/// Software-only wallet.
pub const SOFT_WALLET: &str = "soft-wallet";

pub const ENDORSER_ID: &str = "mfr-1";

/// The default manufacturer, publishing factory manifests for every model.
pub fn endorser() -> Endorser {
    endorser_with_seed(&[0xE0; 32])
}

pub fn endorser_with_seed(seed: &[u8; 32]) -> Endorser {
    let mut e = Endorser::new(ENDORSER_ID, seed);
    e.publish_factory_manifest(MODEL_A, HardwareClass::TrustedHardware);
    e.publish_factory_manifest(MODEL_B, HardwareClass::TrustedHardware);
    e.publish_factory_manifest(SOFT_WALLET, HardwareClass::SoftwareOnly);
    e
}

/// A verifier trusting `endorser`, holding its manifests and the baseline policy
/// under the id `baseline`.
pub fn verifier(id: &str, seed: [u8; 32], endorser: &Endorser) -> Verifier {
    let v = Verifier::new(VerifierConfig::new(id, seed));
    v.trust_endorser(endorser.id.clone(), endorser.root_key());
    for m in endorser.catalog().iter() {
        v.register_manifest(m.clone())
            .expect("endorser manifests are self-signed");
    }
    v.install_policy("baseline", crate::policy::baseline());
    v
}

/// A device of `model` whose endorsement is registered with `verifier`.
pub fn wallet(
    seed: [u8; 32],
    model: &str,
    endorser: &Endorser,
    verifier: &Verifier,
) -> DeviceState {
    let d = create_device(seed, &ManifestRef::new(model), endorser.catalog())
        .expect("fixture models are published");
    let e = endorser
        .make_endorsement(&d.identity(), d.manifest_ref())
        .expect("fixture models are published");
    verifier
        .register_endorsement(e)
        .expect("verifier trusts the fixture endorser");
    d
}
