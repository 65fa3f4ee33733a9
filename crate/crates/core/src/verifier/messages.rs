use serde::Serialize;

use crate::claims::{AttestationResult, Evidence, Nonce};
use crate::{canonical_struct, wire_type};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ChallengeRequest {
    pub requester_id: String,
}

canonical_struct!(ChallengeRequest { requester_id });
wire_type!(ChallengeRequest, 0x30);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ChallengeResponse {
    pub session_id: u64,
    #[serde(serialize_with = "crate::claims::render::hex_bytes")]
    pub nonce: Nonce,
}

canonical_struct!(ChallengeResponse { session_id, nonce });
wire_type!(ChallengeResponse, 0x31);

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EvidenceSubmission {
    pub session_id: u64,
    pub policy_id: String,
    pub evidence: Evidence,
}

canonical_struct!(EvidenceSubmission {
    session_id,
    policy_id,
    evidence
});
wire_type!(EvidenceSubmission, 0x32);

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ResultDelivery {
    pub result: AttestationResult,
}

canonical_struct!(ResultDelivery { result });
wire_type!(ResultDelivery, 0x33);
