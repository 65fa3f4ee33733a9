//! Messaging plane: seeded links, retransmission and traced RPC wrappers.

use std::cell::RefCell;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::messages::DeviceCommand;
use super::scenario::LinkPolicy;
use super::trace::{EventKind, Trace};
use crate::claims::{
    ClaimRequest, DeviceIdentity, ErasureReceipt, Evidence, KeyHandle, LogicalTime, ManifestRef,
    Nonce,
};
use crate::crypto::{PublicKey, Signature};
use crate::hwemu::{DeviceState, HwResult, MigrationBlob, WalletDevice};
use crate::verifier::{
    AttestationService, ChallengeRequest, ChallengeResponse, EvidenceSubmission, ResultDelivery,
    Verifier,
};
use crate::wire::WireType;

/// Transmissions of one message before it is delivered regardless of loss.
pub const MAX_ATTEMPTS: u32 = 64;

pub struct Net {
    clock: LogicalTime,
    rng: ChaCha20Rng,
    default_link: LinkPolicy,
    links: Vec<(String, String, LinkPolicy)>,
    trace: Trace,
    retransmissions: u64,
}

impl Net {
    pub fn new(seed: [u8; 32], default_link: LinkPolicy, links: Vec<(String, String, LinkPolicy)>) -> Net {
        Net {
            clock: 0,
            rng: ChaCha20Rng::from_seed(seed),
            default_link,
            links,
            trace: Trace::new(),
            retransmissions: 0,
        }
    }

    pub fn now(&self) -> LogicalTime {
        self.clock
    }

    pub fn advance(&mut self, ticks: LogicalTime) {
        self.clock += ticks;
    }

    pub fn rng(&mut self) -> &mut ChaCha20Rng {
        &mut self.rng
    }

    pub fn trace(&self) -> &Trace {
        &self.trace
    }

    pub fn into_trace(self) -> Trace {
        self.trace
    }

    pub fn retransmissions(&self) -> u64 {
        self.retransmissions
    }

    /// The last matching `link` declaration, else the default.
    pub fn link(&self, from: &str, to: &str) -> LinkPolicy {
        self.links
            .iter()
            .rev()
            .find(|(a, b, _)| (a == "*" || a == from) && (b == "*" || b == to))
            .map_or(self.default_link, |l| l.2)
    }

    pub fn record(&mut self, kind: EventKind, from: &str, to: &str, payload: Vec<u8>) {
        self.trace.push(self.clock, kind, from, to, payload);
    }

    pub fn note(&mut self, from: &str, text: &str) {
        self.record(EventKind::Note, from, "-", text.as_bytes().to_vec());
    }

    /// Delivers `msg`, retransmitting after each seeded loss. The clock
    /// advances by the link delay per transmission.
    pub fn send<T: WireType>(&mut self, from: &str, to: &str, msg: &T) {
        let bytes = msg.to_bytes();
        let link = self.link(from, to);
        for attempt in 1..=MAX_ATTEMPTS {
            self.record(EventKind::Send, from, to, bytes.clone());
            self.clock += link.delay;
            let lost = link.drop > 0.0 && attempt < MAX_ATTEMPTS && self.rng.gen_bool(link.drop);
            if !lost {
                return;
            }
            self.record(EventKind::Drop, from, to, bytes.clone());
            self.retransmissions += 1;
        }
    }
}

/// A verifier reached over the network by `caller`.
pub struct RemoteVerifier<'a> {
    pub net: &'a RefCell<Net>,
    pub verifier: &'a Verifier,
    pub name: &'a str,
    pub caller: &'a str,
}

impl AttestationService for RemoteVerifier<'_> {
    fn verifier_key(&self) -> PublicKey {
        self.verifier.public_key()
    }

    fn request_challenge(&self, request: &ChallengeRequest) -> ChallengeResponse {
        let mut net = self.net.borrow_mut();
        net.send(self.caller, self.name, request);
        self.verifier.set_time(net.now());
        let response = self.verifier.handle(request);
        net.send(self.name, self.caller, &response);
        response
    }

    fn submit_evidence(&self, submission: &EvidenceSubmission) -> ResultDelivery {
        let mut net = self.net.borrow_mut();
        net.send(self.caller, self.name, submission);
        self.verifier.set_time(net.now());
        let delivery = self.verifier.handle_submission(submission);
        net.send(self.name, self.caller, &delivery);
        delivery
    }
}

/// A wallet device driven over the network by a relying party.
pub struct RemoteDevice<'a> {
    pub net: &'a RefCell<Net>,
    pub device: &'a mut DeviceState,
    pub name: &'a str,
    pub caller: &'a str,
}

impl<'a> RemoteDevice<'a> {
    pub fn new(net: &'a RefCell<Net>, device: &'a mut DeviceState, name: &'a str, caller: &'a str) -> Self {
        device.set_time(net.borrow().now());
        RemoteDevice {
            net,
            device,
            name,
            caller,
        }
    }

    fn command(&self, op: &str, handle: Option<KeyHandle>, nonce: Option<Nonce>, selection: &[ClaimRequest]) {
        let cmd = DeviceCommand {
            op: op.into(),
            handle,
            nonce,
            selection: selection.to_vec(),
        };
        self.net.borrow_mut().send(self.caller, self.name, &cmd);
    }

    fn reply<T: WireType>(&self, msg: &T) {
        self.net.borrow_mut().send(self.name, self.caller, msg);
    }
}

impl WalletDevice for RemoteDevice<'_> {
    fn identity(&self) -> DeviceIdentity {
        self.device.identity()
    }

    fn manifest_ref(&self) -> ManifestRef {
        self.device.manifest_ref().clone()
    }

    fn public_key(&self, handle: KeyHandle) -> HwResult<PublicKey> {
        self.device.public_key(handle)
    }

    fn quote(&self, nonce: Nonce, selection: &[ClaimRequest]) -> HwResult<Evidence> {
        self.command("quote", None, Some(nonce), selection);
        let evidence = self.device.quote(nonce, selection)?;
        self.reply(&evidence);
        Ok(evidence)
    }

    fn create_key(&mut self, parent: KeyHandle, migratable: bool) -> HwResult<KeyHandle> {
        let op = if migratable {
            "create_key_migratable"
        } else {
            "create_key"
        };
        self.command(op, Some(parent), None, &[]);
        self.device.create_key(parent, migratable)
    }

    fn sign_transaction(&mut self, handle: KeyHandle, message: &[u8]) -> HwResult<Signature> {
        self.command("sign", Some(handle), None, &[]);
        self.device.sign_transaction(handle, message)
    }

    fn export_key(&mut self, handle: KeyHandle, auth_secret: &[u8]) -> HwResult<MigrationBlob> {
        self.command("export", Some(handle), None, &[]);
        let blob = self.device.export_key(handle, auth_secret)?;
        self.reply(&blob);
        Ok(blob)
    }

    fn import_blob(&mut self, blob: &MigrationBlob, auth_secret: &[u8]) -> HwResult<KeyHandle> {
        self.net.borrow_mut().send(self.caller, self.name, blob);
        self.command("import", None, None, &[]);
        self.device.import_blob(blob, auth_secret)
    }

    fn erase_key(&mut self, handle: KeyHandle) -> HwResult<ErasureReceipt> {
        self.command("erase", Some(handle), None, &[]);
        let receipt = self.device.erase_key(handle)?;
        self.reply(&receipt);
        Ok(receipt)
    }
}
