//! Authenticated VASP-to-VASP channels, Travel Rule exchange and discovery.

use serde::Serialize;

use super::messages::*;
use super::{unidentified, vaan_code, TransferState, Vasp, VaspError};
use crate::claims::{Nonce, TravelRuleRecord, TravelRuleStatus};
use crate::crypto::{self, Digest, PublicKey, Signature};
use crate::wire::WireType;

#[derive(Debug, Clone, PartialEq, Eq)]
pub(super) struct ChannelState {
    peer_code: u32,
    tx_digest: Digest,
    channel_id: Option<Digest>,
    established: bool,
}

/// An established channel, bound to one transaction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Channel {
    pub id: Digest,
    pub peer_code: u32,
    pub tx_digest: Digest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WalletLocation {
    KnownAt(u32),
    PrivacyWithheld,
    Unknown,
}

/// Locates the VASP holding an address.
pub trait Directory {
    fn locate(&self, requester: &Vasp, address: &PublicKey) -> WalletLocation;
}

/// Broadcasts discovery queries to every listed member.
pub struct Members<'a>(pub &'a [&'a Vasp]);

impl Directory for Members<'_> {
    fn locate(&self, requester: &Vasp, address: &PublicKey) -> WalletLocation {
        requester.query_private_wallet(address, self.0)
    }
}

/// A location already established, for example by an earlier discovery round.
impl Directory for WalletLocation {
    fn locate(&self, _: &Vasp, _: &PublicKey) -> WalletLocation {
        *self
    }
}

fn channel_id(hello_digest: &Digest, accept_nonce: &Nonce) -> Digest {
    Digest::of_parts(&[b"channel", hello_digest.as_bytes(), accept_nonce])
}

/// Combines discovery replies: any holder wins, then any withheld answer.
pub fn resolve_discovery(replies: &[DiscoveryReply]) -> WalletLocation {
    if let Some(r) = replies.iter().find(|r| r.answer == DiscoveryAnswer::Known) {
        return WalletLocation::KnownAt(r.from_code);
    }
    if replies
        .iter()
        .any(|r| r.answer == DiscoveryAnswer::Withheld)
    {
        return WalletLocation::PrivacyWithheld;
    }
    WalletLocation::Unknown
}

impl Vasp {
    fn nonce_for(&self, label: &str, peer: u32, binder: &Digest) -> Nonce {
        let d = Digest::of_parts(&[
            label.as_bytes(),
            self.transport.as_bytes(),
            &peer.to_be_bytes(),
            binder.as_bytes(),
        ]);
        d.0[..16].try_into().expect("16 bytes")
    }

    fn peer_transport_key(&self, code: u32) -> Result<PublicKey, VaspError> {
        self.peers
            .get(&code)
            .map(|p| p.transport_key)
            .ok_or(VaspError::ChannelAuthFailure)
    }

    /// Starts a channel for a pending transfer.
    pub fn channel_hello(
        &mut self,
        peer_code: u32,
        tx_digest: Digest,
    ) -> Result<ChannelHello, VaspError> {
        if !self.transfers.contains_key(&tx_digest) {
            return Err(VaspError::NoTransactionContext);
        }
        if !self.peers.contains_key(&peer_code) {
            return Err(VaspError::UnknownPeer(peer_code));
        }
        let hello = ChannelHello {
            from_code: self.code,
            to_code: peer_code,
            tx_digest,
            nonce: self.nonce_for("hello", peer_code, &tx_digest),
        };
        self.channels.insert(
            Digest::of(&hello.to_bytes()),
            ChannelState {
                peer_code,
                tx_digest,
                channel_id: None,
                established: false,
            },
        );
        Ok(hello)
    }

    pub fn accept_channel(&mut self, hello: &ChannelHello) -> Result<ChannelAccept, VaspError> {
        if hello.to_code != self.code || hello.tx_digest == Digest::ZERO {
            return Err(VaspError::ChannelAuthFailure);
        }
        self.peer_transport_key(hello.from_code)?;
        let hello_digest = Digest::of(&hello.to_bytes());
        let mut accept = ChannelAccept {
            from_code: self.code,
            hello_digest,
            nonce: self.nonce_for("accept", hello.from_code, &hello_digest),
            signature: Signature::default(),
        };
        accept.signature = self.transport.sign(&accept.signing_payload());
        self.channels.insert(
            hello_digest,
            ChannelState {
                peer_code: hello.from_code,
                tx_digest: hello.tx_digest,
                channel_id: Some(channel_id(&hello_digest, &accept.nonce)),
                established: false,
            },
        );
        Ok(accept)
    }

    pub fn confirm_channel(
        &mut self,
        accept: &ChannelAccept,
    ) -> Result<(ChannelConfirm, Channel), VaspError> {
        let state = self
            .channels
            .get(&accept.hello_digest)
            .filter(|s| s.channel_id.is_none() && s.peer_code == accept.from_code)
            .cloned()
            .ok_or(VaspError::ChannelAuthFailure)?;
        let peer_key = self.peer_transport_key(state.peer_code)?;
        if !crypto::verify(&peer_key, &accept.signing_payload(), &accept.signature) {
            return Err(VaspError::ChannelAuthFailure);
        }
        let id = channel_id(&accept.hello_digest, &accept.nonce);
        let mut confirm = ChannelConfirm {
            from_code: self.code,
            channel_id: id,
            signature: Signature::default(),
        };
        confirm.signature = self.transport.sign(&confirm.signing_payload());
        let entry = self
            .channels
            .get_mut(&accept.hello_digest)
            .expect("found above");
        entry.channel_id = Some(id);
        entry.established = true;
        Ok((
            confirm,
            Channel {
                id,
                peer_code: state.peer_code,
                tx_digest: state.tx_digest,
            },
        ))
    }

    pub fn finish_channel(&mut self, confirm: &ChannelConfirm) -> Result<Channel, VaspError> {
        let peer_key = self.peer_transport_key(confirm.from_code)?;
        let state = self
            .channels
            .values_mut()
            .find(|s| s.channel_id == Some(confirm.channel_id) && s.peer_code == confirm.from_code)
            .ok_or(VaspError::ChannelAuthFailure)?;
        if !crypto::verify(&peer_key, &confirm.signing_payload(), &confirm.signature) {
            return Err(VaspError::ChannelAuthFailure);
        }
        state.established = true;
        Ok(Channel {
            id: confirm.channel_id,
            peer_code: state.peer_code,
            tx_digest: state.tx_digest,
        })
    }

    fn established(&self, id: &Digest) -> Option<&ChannelState> {
        self.channels
            .values()
            .find(|s| s.established && s.channel_id == Some(*id))
    }

    /// Sends the originator's information for the channel's transaction.
    pub fn travel_rule_request(&self, channel: &Channel) -> Result<TravelRuleExchange, VaspError> {
        let state = self
            .established(&channel.id)
            .ok_or(VaspError::ChannelAuthFailure)?;
        let transfer = self
            .transfers
            .get(&state.tx_digest)
            .ok_or(VaspError::NoTransactionContext)?;
        let originator = self
            .party_of(transfer.vaan)
            .ok_or(VaspError::UnknownAccount(transfer.vaan))?;
        let mut ex = TravelRuleExchange {
            channel_id: channel.id,
            record: TravelRuleRecord {
                originator,
                beneficiary: unidentified(transfer.beneficiary),
                amount: transfer.amount,
                tx_digest: state.tx_digest,
                status: TravelRuleStatus::PreAuthorized,
            },
            signature: Signature::default(),
        };
        ex.signature = self.transport.sign(&ex.signing_payload());
        Ok(ex)
    }

    /// Beneficiary side: identifies the destination key and stores the record.
    pub fn handle_travel_rule(
        &mut self,
        ex: &TravelRuleExchange,
    ) -> Result<TravelRuleReply, VaspError> {
        let state = self
            .established(&ex.channel_id)
            .cloned()
            .ok_or(VaspError::ChannelAuthFailure)?;
        let peer_key = self.peer_transport_key(state.peer_code)?;
        if !crypto::verify(&peer_key, &ex.signing_payload(), &ex.signature) {
            return Err(VaspError::ChannelAuthFailure);
        }
        if ex.record.tx_digest != state.tx_digest || ex.record.tx_digest == Digest::ZERO {
            return Err(VaspError::NoTransactionContext);
        }
        if vaan_code(ex.record.originator.vaan) != state.peer_code {
            return Err(VaspError::ChannelAuthFailure);
        }
        let mut record = ex.record.clone();
        let status = match self.active_account_for_key(&record.beneficiary.public_key) {
            Some(acct) => {
                record.beneficiary = acct.party.clone();
                record.status = TravelRuleStatus::Verified;
                self.records.insert(record.tx_digest, record.clone());
                ReplyStatus::Verified
            }
            None => ReplyStatus::UnknownParty,
        };
        let mut reply = TravelRuleReply {
            channel_id: ex.channel_id,
            status,
            record,
            signature: Signature::default(),
        };
        reply.signature = self.transport.sign(&reply.signing_payload());
        Ok(reply)
    }

    /// Originator side: stores the verified record, or defers the transfer.
    pub fn handle_travel_rule_reply(
        &mut self,
        reply: &TravelRuleReply,
    ) -> Result<TravelRuleRecord, VaspError> {
        let state = self
            .established(&reply.channel_id)
            .cloned()
            .ok_or(VaspError::ChannelAuthFailure)?;
        let peer_key = self.peer_transport_key(state.peer_code)?;
        if !crypto::verify(&peer_key, &reply.signing_payload(), &reply.signature) {
            return Err(VaspError::ChannelAuthFailure);
        }
        let transfer = self
            .transfers
            .get_mut(&state.tx_digest)
            .ok_or(VaspError::NoTransactionContext)?;
        if reply.status == ReplyStatus::UnknownParty {
            transfer.state = TransferState::Deferred;
            return Err(VaspError::CounterpartyUnknownParty);
        }
        if reply.record.tx_digest != state.tx_digest
            || reply.record.beneficiary.public_key != transfer.beneficiary
            || vaan_code(reply.record.beneficiary.vaan) != state.peer_code
        {
            return Err(VaspError::ChannelAuthFailure);
        }
        transfer.state = TransferState::Verified;
        let mut record = reply.record.clone();
        let post = self
            .records
            .get(&state.tx_digest)
            .is_some_and(|r| r.status == TravelRuleStatus::PreAuthorized);
        if post {
            record.status = TravelRuleStatus::PostVerified;
            self.deadlines.remove(&state.tx_digest);
        }
        self.records.insert(state.tx_digest, record.clone());
        Ok(record)
    }

    pub fn discovery_query(&self, address: &PublicKey) -> DiscoveryQuery {
        let d = Digest::of_parts(&[b"discovery", &self.code.to_be_bytes(), address.as_bytes()]);
        DiscoveryQuery {
            from_code: self.code,
            query_id: u64::from_be_bytes(d.0[..8].try_into().expect("8 bytes")),
            address: *address,
        }
    }

    pub fn answer_discovery(&self, query: &DiscoveryQuery) -> DiscoveryReply {
        let answer = match self.active_account_for_key(&query.address) {
            Some(_) if self.jurisdiction.disclosure_allowed => DiscoveryAnswer::Known,
            Some(_) => DiscoveryAnswer::Withheld,
            None => DiscoveryAnswer::NotFound,
        };
        DiscoveryReply {
            from_code: self.code,
            query_id: query.query_id,
            answer,
        }
    }

    /// Asks every other member whether it holds `address`.
    pub fn query_private_wallet(&self, address: &PublicKey, members: &[&Vasp]) -> WalletLocation {
        let query = self.discovery_query(address);
        let replies: Vec<DiscoveryReply> = members
            .iter()
            .filter(|m| m.code() != self.code)
            .map(|m| m.answer_discovery(&query))
            .collect();
        resolve_discovery(&replies)
    }
}

/// Runs the handshake and the exchange for one pending transfer. On success
/// the record is stored as verified at both VASPs.
pub fn verify_travel_rule(
    originator: &mut Vasp,
    beneficiary: &mut Vasp,
    tx_digest: Digest,
) -> Result<TravelRuleRecord, VaspError> {
    let hello = originator.channel_hello(beneficiary.code(), tx_digest)?;
    let accept = beneficiary.accept_channel(&hello)?;
    let (confirm, channel) = originator.confirm_channel(&accept)?;
    beneficiary.finish_channel(&confirm)?;
    let ex = originator.travel_rule_request(&channel)?;
    let reply = beneficiary.handle_travel_rule(&ex)?;
    originator.handle_travel_rule_reply(&reply)
}
