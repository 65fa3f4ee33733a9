use serde::Serialize;

use super::Jurisdiction;
use crate::claims::{LogicalTime, Nonce, TravelRuleRecord};
use crate::crypto::{Digest, PublicKey, Signature};
use crate::{canonical_enum, canonical_struct, signed_struct, wire_type};

/// Directory entry for a member VASP.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PeerInfo {
    pub code: u32,
    pub name: String,
    pub signing_key: PublicKey,
    pub transport_key: PublicKey,
    pub jurisdiction: Jurisdiction,
    /// The peer can receive originator and beneficiary information.
    pub info_channel: bool,
}

canonical_struct!(PeerInfo {
    code,
    name,
    signing_key,
    transport_key,
    jurisdiction,
    info_channel
});
wire_type!(PeerInfo, 0x40);

/// Abstract single-sign-on notification: the customer may send exactly this
/// transfer from their own wallet during the window.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PreAuthNotify {
    pub preauth_id: u64,
    pub vaan: u64,
    pub from: PublicKey,
    pub beneficiary: PublicKey,
    pub amount: u64,
    pub window_start: LogicalTime,
    pub window_end: LogicalTime,
    pub signature: Signature,
}

signed_struct!(PreAuthNotify, 0x41 {
    preauth_id,
    vaan,
    from,
    beneficiary,
    amount,
    window_start,
    window_end
});

/// First handshake message. A channel is always bound to one transaction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ChannelHello {
    pub from_code: u32,
    pub to_code: u32,
    pub tx_digest: Digest,
    #[serde(serialize_with = "crate::claims::render::hex_bytes")]
    pub nonce: Nonce,
}

canonical_struct!(ChannelHello {
    from_code,
    to_code,
    tx_digest,
    nonce
});
wire_type!(ChannelHello, 0x42);

/// Responder's transport-key signature over the hello and its own nonce.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ChannelAccept {
    pub from_code: u32,
    pub hello_digest: Digest,
    #[serde(serialize_with = "crate::claims::render::hex_bytes")]
    pub nonce: Nonce,
    pub signature: Signature,
}

signed_struct!(ChannelAccept, 0x43 {
    from_code,
    hello_digest,
    nonce
});

/// Initiator's transport-key signature over the accepted transcript.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ChannelConfirm {
    pub from_code: u32,
    pub channel_id: Digest,
    pub signature: Signature,
}

signed_struct!(ChannelConfirm, 0x44 { from_code, channel_id });

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TravelRuleExchange {
    pub channel_id: Digest,
    pub record: TravelRuleRecord,
    pub signature: Signature,
}

signed_struct!(TravelRuleExchange, 0x45 { channel_id, record });

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ReplyStatus {
    Verified,
    UnknownParty,
}

canonical_enum!(ReplyStatus {
    Verified = 0,
    UnknownParty = 1,
});

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TravelRuleReply {
    pub channel_id: Digest,
    pub status: ReplyStatus,
    pub record: TravelRuleRecord,
    pub signature: Signature,
}

signed_struct!(TravelRuleReply, 0x46 {
    channel_id,
    status,
    record
});

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DiscoveryQuery {
    pub from_code: u32,
    pub query_id: u64,
    pub address: PublicKey,
}

canonical_struct!(DiscoveryQuery {
    from_code,
    query_id,
    address
});
wire_type!(DiscoveryQuery, 0x47);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscoveryAnswer {
    Known,
    Withheld,
    NotFound,
}

canonical_enum!(DiscoveryAnswer {
    Known = 0,
    Withheld = 1,
    NotFound = 2,
});

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DiscoveryReply {
    pub from_code: u32,
    pub query_id: u64,
    pub answer: DiscoveryAnswer,
}

canonical_struct!(DiscoveryReply {
    from_code,
    query_id,
    answer
});
wire_type!(DiscoveryReply, 0x48);

/// Asks a member VASP to have its customer's wallet quote under `nonce` for
/// the requester's policy at the named verifier.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CrossVaspAppraisalRequest {
    pub requester_code: u32,
    pub beneficiary: PublicKey,
    pub policy_id: String,
    pub verifier_id: String,
    pub session_id: u64,
    #[serde(serialize_with = "crate::claims::render::hex_bytes")]
    pub nonce: Nonce,
}

canonical_struct!(CrossVaspAppraisalRequest {
    requester_code,
    beneficiary,
    policy_id,
    verifier_id,
    session_id,
    nonce
});
wire_type!(CrossVaspAppraisalRequest, 0x49);
