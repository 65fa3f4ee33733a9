use std::collections::BTreeMap;

use serde::Serialize;

use crate::claims::{ClaimRequest, DeviceId, KeyHandle, Nonce};
use crate::crypto::{Digest, PublicKey};
use crate::{canonical_struct, wire_type};

/// Customer asks its VASP to move funds, either through the VASP or directly
/// from the wallet after pre-authorization.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TransferRequest {
    pub from_vaan: u64,
    pub beneficiary: PublicKey,
    pub amount: u64,
    pub direct: bool,
}

canonical_struct!(TransferRequest {
    from_vaan,
    beneficiary,
    amount,
    direct
});
wire_type!(TransferRequest, 0x51);

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ReconcileSummary {
    pub vasp: String,
    pub unrecorded: Vec<Digest>,
    pub lost: Vec<Digest>,
    pub divergences: Vec<(Digest, Digest)>,
    pub retroactive_rejections: Vec<Digest>,
}

canonical_struct!(ReconcileSummary {
    vasp,
    unrecorded,
    lost,
    divergences,
    retroactive_rejections
});
wire_type!(ReconcileSummary, 0x52);

/// A relying party's request to a remote wallet device.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DeviceCommand {
    pub op: String,
    pub handle: Option<KeyHandle>,
    pub nonce: Option<Nonce>,
    pub selection: Vec<ClaimRequest>,
}

canonical_struct!(DeviceCommand {
    op,
    handle,
    nonce,
    selection
});
wire_type!(DeviceCommand, 0x53);

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AccountRequest {
    pub name: String,
    pub device_id: DeviceId,
}

canonical_struct!(AccountRequest { name, device_id });
wire_type!(AccountRequest, 0x54);

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ScenarioOutcome {
    pub name: String,
    pub seed: u64,
    pub passed: bool,
    pub metrics: BTreeMap<String, u64>,
    pub failures: Vec<String>,
}

canonical_struct!(ScenarioOutcome {
    name,
    seed,
    passed,
    metrics,
    failures
});
wire_type!(ScenarioOutcome, 0x55);
