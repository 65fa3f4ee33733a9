//! Deterministic simulation of wallets, VASPs, verifiers and a toy ledger.
//!
//! A [`World`] is built from a parsed [`Scenario`] and a 64-bit seed. Every
//! random draw comes from one seeded stream and every collection is ordered,
//! so a run's [`Trace`] is a pure function of the scenario, the seed and the
//! policy sources.
//!
//! Two planes are modelled. The messaging plane carries protocol messages over
//! links with a delay and a loss probability; lost messages are retransmitted.
//! The ledger plane carries transactions to the ledger, where scripted or
//! seeded faults lose or reorder submissions for good.

mod messages;
mod net;
mod scenario;
mod trace;


use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::Serialize;
use thiserror::Error;

pub use messages::{AccountRequest, DeviceCommand, ReconcileSummary, ScenarioOutcome, TransferRequest};
pub use net::{Net, RemoteDevice, RemoteVerifier, MAX_ATTEMPTS};
pub use scenario::{
    parse_scenario, Action, CrossPath, Expectation, JurisdictionKind, LinkPolicy, Scenario,
    ScenarioError, Scheduled, VaspDecl, WalletDecl, METRICS,
};
pub use trace::{EventKind, Trace, TraceEvent, TraceParseError};

use crate::claims::{
    ClaimBody, ClaimRequest, Endorser, KeyHandle, LogicalTime, ManifestRef, TravelRuleRecord,
    TravelRuleStatus, UsageEntry,
};
use crate::crypto::{Digest, PublicKey};
use crate::hwemu::{create_device, DeviceState, WalletDevice, DIK_HANDLE};
use crate::ledger::{ConfirmedTx, ToyLedger, Transaction, TxBody};
use crate::policy::{parse_policy, PolicyError};
use crate::vasp::{
    resolve_discovery, verify_offboard_report, AccountStatus, Beneficiary, CrossVaspDecision,
    Decision, Jurisdiction, OnboardRequest, Operator, OrderDivergence, ReconciliationReport,
    RecoveryStep, RelyingPartyPolicy, Vasp, VaspConfig, VaspError, WalletLocation,
};
use crate::verifier::{AttestationService, ChallengeRequest, Verifier};
use crate::wire::{Canonical, WireType};
use crate::fixtures;

/// Resolves a policy file name to its source text.
pub type PolicyLoader<'a> = &'a (dyn Fn(&str) -> Option<String> + Sync);

/// Overlays shipped with the crate, by file name.
pub fn builtin_policy(file: &str) -> Option<String> {
    let src = match file {
        "baseline.apl" => crate::policy::BASELINE_SOURCE,
        "overlay-alpine.apl" => include_str!("../../policies/overlay-alpine.apl"),
        "overlay-strict.apl" => include_str!("../../policies/overlay-strict.apl"),
        _ => return None,
    };
    Some(src.to_string())
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SetupError {
    #[error("policy `{id}`: no source for `{file}`")]
    MissingPolicy { id: String, file: String },
    #[error("policy `{id}` in `{file}` at {error}")]
    BadPolicy {
        id: String,
        file: String,
        error: PolicyError,
    },
}

/// Both appraisal paths of one cross-VASP transfer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CrossOutcome {
    pub from: String,
    pub to: String,
    /// Beneficiary evidence appraised by the requester's own verifier.
    pub own: Option<CrossVaspDecision>,
    /// Beneficiary evidence appraised by the shared service.
    pub shared: Option<CrossVaspDecision>,
}

impl CrossOutcome {
    pub fn mismatch(&self) -> bool {
        match (&self.own, &self.shared) {
            (Some(a), Some(b)) => a != b,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ScenarioReport {
    pub name: String,
    pub seed: u64,
    pub passed: bool,
    pub metrics: BTreeMap<String, u64>,
    pub failures: Vec<String>,
    pub cross: Vec<CrossOutcome>,
    pub reconciliations: Vec<(String, ReconciliationReport)>,
    #[serde(skip)]
    pub trace: Trace,
}

impl ScenarioReport {
    pub fn metric(&self, name: &str) -> u64 {
        self.metrics.get(name).copied().unwrap_or(0)
    }
}

struct VaspNode {
    vasp: Vasp,
    verifier: usize,
}

struct WalletNode {
    name: String,
    device: DeviceState,
    vasp: Option<usize>,
    key: KeyHandle,
    vaan: Option<u64>,
    funds: u64,
    nonce: u64,
    secret: Vec<u8>,
    lost: bool,
    replacements: u64,
}

struct LedgerMsg {
    n: u64,
    from: String,
    tx: Transaction,
    deliver_at: LogicalTime,
    held: bool,
}

/// Probability that a submission on a `reorder` ledger link is overtaken.
const REORDER_PROBABILITY: f64 = 0.25;

type ActionResult = Result<(), String>;

pub struct World {
    name: String,
    seed: u64,
    budget: LogicalTime,
    net: RefCell<Net>,
    endorser: Endorser,
    verifiers: Vec<(String, Verifier)>,
    shared: Option<usize>,
    vasps: Vec<VaspNode>,
    wallets: Vec<WalletNode>,
    ledger: ToyLedger,
    ledger_link: LinkPolicy,
    queue: Vec<LedgerMsg>,
    submissions: u64,
    drops: BTreeSet<u64>,
    reorders: BTreeSet<u64>,
    metrics: BTreeMap<String, u64>,
    lost: BTreeSet<Digest>,
    divergences: BTreeSet<OrderDivergence>,
    unrecorded: BTreeSet<Digest>,
    retroactive: BTreeSet<Digest>,
    cross: Vec<CrossOutcome>,
    reconciliations: Vec<(String, ReconciliationReport)>,
}

fn derive(seed: u64, label: &str) -> [u8; 32] {
    Digest::of_parts(&[b"netsim", &seed.to_be_bytes(), label.as_bytes()]).0
}

fn bump(metrics: &mut BTreeMap<String, u64>, name: &str) {
    *metrics.entry(name.to_string()).or_insert(0) += 1;
}

fn pair_mut<T>(items: &mut [T], a: usize, b: usize) -> (&mut T, &mut T) {
    assert_ne!(a, b);
    if a < b {
        let (l, r) = items.split_at_mut(b);
        (&mut l[a], &mut r[0])
    } else {
        let (l, r) = items.split_at_mut(a);
        (&mut r[0], &mut l[b])
    }
}

fn contains(haystack: &[u8], needle: &[u8]) -> bool {
    !needle.is_empty() && haystack.windows(needle.len()).any(|w| w == needle)
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

impl World {
    pub fn new(sc: &Scenario, seed: u64, policies: PolicyLoader<'_>) -> Result<World, SetupError> {
        let mut overlays = Vec::new();
        for (id, file) in &sc.policies {
            let src = policies(file).ok_or_else(|| SetupError::MissingPolicy {
                id: id.clone(),
                file: file.clone(),
            })?;
            let overlay = parse_policy(&src).map_err(|error| SetupError::BadPolicy {
                id: id.clone(),
                file: file.clone(),
                error,
            })?;
            overlays.push((id.clone(), crate::policy::baseline().with_overlay(&overlay)));
        }

        let mut net = Net::new(derive(seed, "net"), sc.default_link, sc.links.clone());
        let endorser = fixtures::endorser_with_seed(&derive(seed, "endorser"));
        let verifiers: Vec<(String, Verifier)> = sc
            .verifiers
            .iter()
            .map(|name| {
                let v = fixtures::verifier(name, derive(seed, &format!("verifier/{name}")), &endorser);
                for (id, program) in &overlays {
                    v.install_policy(id.clone(), program.clone());
                }
                (name.clone(), v)
            })
            .collect();
        let verifier_index = |name: &str| {
            verifiers
                .iter()
                .position(|(n, _)| n == name)
                .expect("scenario references are validated")
        };

        let mut vasps: Vec<VaspNode> = sc
            .vasps
            .iter()
            .map(|d| {
                let jurisdiction = match d.jurisdiction {
                    JurisdictionKind::Open => Jurisdiction::open("open"),
                    JurisdictionKind::Strict => Jurisdiction::strict("strict"),
                    JurisdictionKind::Private => Jurisdiction::private("private"),
                };
                let mut config = VaspConfig::new(&d.name, derive(seed, &format!("vasp/{}", d.name)));
                config.jurisdiction = jurisdiction;
                config.policy = RelyingPartyPolicy {
                    policy_id: d.policy.clone(),
                    min_loa: d.min_loa,
                    daily_limit: d.daily_limit,
                    ..RelyingPartyPolicy::default()
                };
                VaspNode {
                    vasp: Vasp::new(config),
                    verifier: verifier_index(&d.verifier),
                }
            })
            .collect();
        for i in 0..vasps.len() {
            let mut info = vasps[i].vasp.peer_info();
            info.info_channel = sc.vasps[i].info_channel;
            for j in 0..vasps.len() {
                if i != j {
                    net.send(vasps[i].vasp.name(), vasps[j].vasp.name(), &info);
                    vasps[j].vasp.register_peer(info.clone());
                }
            }
        }

        let mut ledger = ToyLedger::new(sc.confirm_delay);
        for node in &vasps {
            ledger.register_sweep_authority(node.vasp.signing_key());
        }

        let mut wallets = Vec::new();
        for d in &sc.wallets {
            let mut device = create_device(
                derive(seed, &format!("wallet/{}", d.name)),
                &ManifestRef::new(d.model.as_str()),
                endorser.catalog(),
            )
            .expect("scenario models are published");
            let key = device
                .create_key(DIK_HANDLE, d.migratable)
                .expect("fresh device creates keys");
            endorse(&mut net, &endorser, &verifiers, &device);
            let vasp = d.vasp.as_ref().map(|v| {
                vasps
                    .iter()
                    .position(|n| n.vasp.name() == v)
                    .expect("scenario references are validated")
            });
            if vasp.is_none() && d.funds > 0 {
                ledger.mint(device.public_key(key).expect("new key"), d.funds);
            }
            wallets.push(WalletNode {
                name: d.name.clone(),
                device,
                vasp,
                key,
                vaan: None,
                funds: d.funds,
                nonce: 0,
                secret: derive(seed, &format!("secret/{}", d.name)).to_vec(),
                lost: false,
                replacements: 0,
            });
        }

        let shared = sc.shared.as_deref().map(verifier_index);
        Ok(World {
            name: sc.name.clone(),
            seed,
            budget: sc.budget,
            net: RefCell::new(net),
            endorser,
            verifiers,
            shared,
            vasps,
            wallets,
            ledger,
            ledger_link: sc.ledger_link,
            queue: Vec::new(),
            submissions: 0,
            drops: sc.drops.clone(),
            reorders: sc.reorders.clone(),
            metrics: METRICS.iter().map(|m| (m.to_string(), 0)).collect(),
            lost: BTreeSet::new(),
            divergences: BTreeSet::new(),
            unrecorded: BTreeSet::new(),
            retroactive: BTreeSet::new(),
            cross: Vec::new(),
            reconciliations: Vec::new(),
        })
    }

    pub fn now(&self) -> LogicalTime {
        self.net.borrow().now()
    }

    pub fn ledger(&self) -> &ToyLedger {
        &self.ledger
    }

    pub fn vasp(&self, name: &str) -> Option<&Vasp> {
        self.vasps
            .iter()
            .map(|n| &n.vasp)
            .find(|v| v.name() == name)
    }

    fn note(&self, from: &str, text: &str) {
        self.net.borrow_mut().note(from, text);
    }

    fn wallet_index(&self, name: &str) -> Result<usize, String> {
        self.wallets
            .iter()
            .position(|w| w.name == name)
            .ok_or_else(|| format!("unknown wallet `{name}`"))
    }

    fn vasp_index(&self, name: &str) -> Result<usize, String> {
        self.vasps
            .iter()
            .position(|n| n.vasp.name() == name)
            .ok_or_else(|| format!("unknown VASP `{name}`"))
    }

    fn vasp_by_code(&self, code: u32) -> Option<usize> {
        self.vasps.iter().position(|n| n.vasp.code() == code)
    }

    /// The wallet's VASP and account number.
    fn hosted(&self, w: usize) -> Result<(usize, u64), String> {
        let wallet = &self.wallets[w];
        if wallet.lost {
            return Err(format!("wallet `{}` is lost", wallet.name));
        }
        self.account(w)
    }

    /// Like `hosted`, but also for a wallet whose device is lost.
    fn account(&self, w: usize) -> Result<(usize, u64), String> {
        let wallet = &self.wallets[w];
        match (wallet.vasp, wallet.vaan) {
            (Some(v), Some(vaan)) => Ok((v, vaan)),
            (None, _) => Err(format!("wallet `{}` has no VASP", wallet.name)),
            (Some(_), None) => Err(format!("wallet `{}` is not onboarded", wallet.name)),
        }
    }

    fn wallet_key(&self, w: usize) -> Result<PublicKey, String> {
        let wallet = &self.wallets[w];
        wallet.device.public_key(wallet.key).map_err(err)
    }

    fn advance_to(&mut self, tick: LogicalTime) {
        while self.now() < tick {
            self.net.borrow_mut().advance(1);
            self.pump();
        }
    }

    /// Hands a transaction to the ledger plane.
    fn submit_tx(&mut self, from: &str, tx: Transaction) {
        self.submissions += 1;
        let n = self.submissions;
        let mut net = self.net.borrow_mut();
        net.record(EventKind::Send, from, "ledger", tx.to_bytes());
        let link = self.ledger_link;
        let dropped =
            self.drops.contains(&n) || (link.drop > 0.0 && net.rng().gen_bool(link.drop));
        if dropped {
            net.record(EventKind::LedgerDrop, from, "ledger", tx.to_bytes());
            bump(&mut self.metrics, "ledger_dropped");
            for m in &mut self.queue {
                if m.n + 1 == n {
                    m.held = false;
                }
            }
            return;
        }
        let held = self.reorders.contains(&n)
            || (link.reorder && net.rng().gen_bool(REORDER_PROBABILITY));
        let deliver_at = net.now() + link.delay;
        drop(net);
        self.queue.push(LedgerMsg {
            n,
            from: from.to_string(),
            tx,
            deliver_at,
            held,
        });
    }

    fn deliver(&mut self, m: LedgerMsg) {
        let now = self.now();
        let bytes = m.tx.to_bytes();
        match self.ledger.submit(m.tx, now) {
            Ok(_) => self
                .net
                .borrow_mut()
                .record(EventKind::Submit, &m.from, "ledger", bytes),
            Err(e) => {
                let mut net = self.net.borrow_mut();
                net.record(EventKind::LedgerReject, "ledger", &m.from, bytes);
                net.note("ledger", &e.to_string());
                bump(&mut self.metrics, "ledger_rejected");
            }
        }
    }

    /// Delivers due submissions and processes confirmations.
    fn pump(&mut self) {
        let now = self.now();
        let (ready, rest): (Vec<_>, Vec<_>) = std::mem::take(&mut self.queue)
            .into_iter()
            .partition(|m| !m.held && m.deliver_at <= now);
        self.queue = rest;
        for m in ready {
            let mut n = m.n;
            self.deliver(m);
            while let Some(pos) = self.queue.iter().position(|h| h.held && h.n + 1 == n) {
                let held = self.queue.remove(pos);
                n = held.n;
                self.deliver(held);
            }
        }
        for digest in self.ledger.advance(now) {
            let confirmed = self
                .ledger
                .confirmed()
                .iter()
                .rev()
                .find(|c| c.digest == digest)
                .cloned()
                .expect("just confirmed");
            self.net.borrow_mut().record(
                EventKind::Confirm,
                "ledger",
                "*",
                confirmed.tx.to_bytes(),
            );
            self.on_confirm(&confirmed);
        }
    }

    fn on_confirm(&mut self, confirmed: &ConfirmedTx) {
        for v in 0..self.vasps.len() {
            let Some(record) = self.vasps[v].vasp.accept_direct_transfer(confirmed) else {
                continue;
            };
            if record.status == TravelRuleStatus::PreAuthorized {
                let own = self.vasps[v].vasp.code();
                if let WalletLocation::KnownAt(code) = self.locate(v, &record.beneficiary.public_key) {
                    if let Some(b) = self.vasp_by_code(code).filter(|_| code != own) {
                        match self.travel_rule(v, b, confirmed.digest) {
                            Ok(_) => bump(&mut self.metrics, "travel_verified"),
                            Err(e) => self.note(self.vasps[v].vasp.name(), &e.to_string()),
                        }
                    }
                }
            }
            return;
        }
    }

    /// Where `key` is held, as seen from VASP `v`: its own active accounts
    /// first, then a discovery round over the messaging plane.
    fn locate(&self, v: usize, key: &PublicKey) -> WalletLocation {
        let me = &self.vasps[v].vasp;
        let own = me.account_for_key(key).is_some_and(|a| {
            a.status == AccountStatus::Active && a.active_key().is_some_and(|k| k.public_key == *key)
        });
        if own {
            return WalletLocation::KnownAt(me.code());
        }
        let query = me.discovery_query(key);
        let mut net = self.net.borrow_mut();
        let mut replies = Vec::new();
        for (j, node) in self.vasps.iter().enumerate() {
            if j != v {
                net.send(me.name(), node.vasp.name(), &query);
                let reply = node.vasp.answer_discovery(&query);
                net.send(node.vasp.name(), me.name(), &reply);
                replies.push(reply);
            }
        }
        resolve_discovery(&replies)
    }

    /// Channel handshake and Travel Rule exchange between two VASPs.
    fn travel_rule(&mut self, a: usize, b: usize, digest: Digest) -> Result<TravelRuleRecord, VaspError> {
        let (x, y) = pair_mut(&mut self.vasps, a, b);
        let (orig, ben) = (&mut x.vasp, &mut y.vasp);
        let (an, bn) = (orig.name().to_string(), ben.name().to_string());
        let mut net = self.net.borrow_mut();
        let hello = orig.channel_hello(ben.code(), digest)?;
        net.send(&an, &bn, &hello);
        let accept = ben.accept_channel(&hello)?;
        net.send(&bn, &an, &accept);
        let (confirm, channel) = orig.confirm_channel(&accept)?;
        net.send(&an, &bn, &confirm);
        ben.finish_channel(&confirm)?;
        let ex = orig.travel_rule_request(&channel)?;
        net.send(&an, &bn, &ex);
        let reply = ben.handle_travel_rule(&ex)?;
        net.send(&bn, &an, &reply);
        orig.handle_travel_rule_reply(&reply)
    }

    fn perform(&mut self, action: &Action) -> ActionResult {
        match action {
            Action::Onboard(w) => self.onboard(self.wallet_index(w)?),
            Action::Attest(w) => self.attest(self.wallet_index(w)?),
            Action::Transfer { from, to, amount } => {
                self.transfer(self.wallet_index(from)?, self.wallet_index(to)?, *amount)
            }
            Action::Direct { from, to, amount } => {
                self.direct(self.wallet_index(from)?, self.wallet_index(to)?, *amount)
            }
            Action::Cross {
                from,
                to,
                amount,
                path,
            } => self.cross_transfer(self.wallet_index(from)?, self.wallet_index(to)?, *amount, *path),
            Action::Discover { vasp, wallet } => {
                let v = self.vasp_index(vasp)?;
                let key = self.wallet_key(self.wallet_index(wallet)?)?;
                let metric = match self.locate(v, &key) {
                    WalletLocation::KnownAt(_) => "discover_known",
                    WalletLocation::PrivacyWithheld => "discover_withheld",
                    WalletLocation::Unknown => "discover_unknown",
                };
                bump(&mut self.metrics, metric);
                Ok(())
            }
            Action::Recover { wallet, onto } => self.recover(self.wallet_index(wallet)?, onto.as_deref()),
            Action::Offboard {
                wallet,
                move_assets,
            } => self.offboard(self.wallet_index(wallet)?, *move_assets),
            Action::Reconcile(target) => {
                let targets = match target {
                    Some(v) => vec![self.vasp_index(v)?],
                    None => (0..self.vasps.len()).collect(),
                };
                for v in targets {
                    self.reconcile(v);
                }
                Ok(())
            }
        }
    }

    fn onboard(&mut self, w: usize) -> ActionResult {
        let World {
            net,
            vasps,
            wallets,
            verifiers,
            ledger,
            metrics,
            ..
        } = self;
        let wallet = &mut wallets[w];
        let v = wallet
            .vasp
            .ok_or_else(|| format!("wallet `{}` has no VASP", wallet.name))?;
        if wallet.vaan.is_some() {
            return Err(format!("wallet `{}` is already onboarded", wallet.name));
        }
        let node = &mut vasps[v];
        let caller = node.vasp.name().to_string();
        net.borrow_mut().send(
            &wallet.name,
            &caller,
            &AccountRequest {
                name: wallet.name.clone(),
                device_id: wallet.device.device_id(),
            },
        );
        let (vname, verifier) = &verifiers[node.verifier];
        let service = RemoteVerifier {
            net,
            verifier,
            name: vname,
            caller: &caller,
        };
        let request = OnboardRequest {
            name: &wallet.name,
            key: wallet.key,
            operator: Operator::Customer,
            backup_secret: &wallet.secret,
        };
        let mut device = RemoteDevice::new(net, &mut wallet.device, &wallet.name, &caller);
        match node.vasp.onboard_customer(&request, &mut device, &service) {
            Ok(o) => {
                net.borrow_mut().send(&caller, &wallet.name, &o.certificate);
                wallet.key = o.key;
                wallet.vaan = Some(o.vaan);
                if wallet.funds > 0 {
                    ledger.mint(o.certificate.subject_public_key, wallet.funds);
                }
                bump(metrics, "onboarded");
                if o.rekeyed {
                    bump(metrics, "rekeyed");
                }
                Ok(())
            }
            Err(VaspError::AttestationFailed(r)) => {
                bump(metrics, "onboard_failed");
                net.borrow_mut().note(
                    &caller,
                    &format!("onboarding refused: {}", r.failed_rules.join(", ")),
                );
                Ok(())
            }
            Err(e) => Err(e.to_string()),
        }
    }

    fn attest(&mut self, w: usize) -> ActionResult {
        let (v, vaan) = self.hosted(w)?;
        let World {
            net,
            vasps,
            wallets,
            verifiers,
            metrics,
            ..
        } = self;
        let node = &mut vasps[v];
        let wallet = &mut wallets[w];
        let caller = node.vasp.name().to_string();
        let (vname, verifier) = &verifiers[node.verifier];
        let service = RemoteVerifier {
            net,
            verifier,
            name: vname,
            caller: &caller,
        };
        let device = RemoteDevice::new(net, &mut wallet.device, &wallet.name, &caller);
        node.vasp.reattest(vaan, &device, &service).map_err(err)?;
        bump(metrics, "attested");
        Ok(())
    }

    /// The wallet signs `body` on request of VASP `v` and returns the transaction.
    fn sign_for(&mut self, w: usize, v: usize, body: TxBody) -> Result<Transaction, String> {
        let caller = self.vasps[v].vasp.name().to_string();
        let wallet = &mut self.wallets[w];
        let key = wallet.key;
        let mut device = RemoteDevice::new(&self.net, &mut wallet.device, &wallet.name, &caller);
        let signature = device
            .sign_transaction(key, &body.signing_bytes())
            .map_err(err)?;
        let tx = Transaction::owner_signed(body, signature);
        self.net.borrow_mut().send(&wallet.name, &caller, &tx);
        Ok(tx)
    }

    fn next_nonce(&mut self, w: usize) -> u64 {
        let wallet = &mut self.wallets[w];
        wallet.nonce += 1;
        wallet.nonce
    }

    /// VASP-mediated transfer: records the Travel Rule data before the
    /// customer signs, then submits.
    fn mediated(&mut self, w: usize, v: usize, vaan: u64, to: PublicKey, amount: u64, location: WalletLocation) -> ActionResult {
        let nonce = self.next_nonce(w);
        let body = self.vasps[v]
            .vasp
            .open_transfer(vaan, to, amount, nonce)
            .map_err(err)?;
        let digest = body.digest();
        let own = self.vasps[v].vasp.code();
        match location {
            WalletLocation::KnownAt(code) if code == own => {}
            WalletLocation::KnownAt(code) => {
                let b = self
                    .vasp_by_code(code)
                    .ok_or_else(|| format!("no VASP with code {code:08x}"))?;
                if let Err(e) = self.travel_rule(v, b, digest) {
                    bump(&mut self.metrics, "deferred");
                    self.note(self.vasps[v].vasp.name(), &format!("transfer deferred: {e}"));
                    return Ok(());
                }
                bump(&mut self.metrics, "travel_verified");
            }
            WalletLocation::PrivacyWithheld | WalletLocation::Unknown => {
                bump(&mut self.metrics, "deferred");
                self.note(self.vasps[v].vasp.name(), "transfer deferred: beneficiary not identified");
                return Ok(());
            }
        }
        let tx = self.sign_for(w, v, body)?;
        let from = self.vasps[v].vasp.name().to_string();
        self.submit_tx(&from, tx);
        Ok(())
    }

    fn request_transfer(&mut self, w: usize, v: usize, vaan: u64, to: PublicKey, amount: u64, direct: bool) {
        let req = TransferRequest {
            from_vaan: vaan,
            beneficiary: to,
            amount,
            direct,
        };
        self.net
            .borrow_mut()
            .send(&self.wallets[w].name, self.vasps[v].vasp.name(), &req);
    }

    fn transfer(&mut self, w: usize, to: usize, amount: u64) -> ActionResult {
        let (v, vaan) = self.hosted(w)?;
        let to_key = self.wallet_key(to)?;
        self.request_transfer(w, v, vaan, to_key, amount, false);
        let location = self.locate(v, &to_key);
        self.mediated(w, v, vaan, to_key, amount, location)
    }

    fn direct(&mut self, w: usize, to: usize, amount: u64) -> ActionResult {
        let (v, vaan) = self.hosted(w)?;
        let to_key = self.wallet_key(to)?;
        self.request_transfer(w, v, vaan, to_key, amount, true);
        let location = self.locate(v, &to_key);
        let now = self.now();
        let decision = self.vasps[v]
            .vasp
            .preauthorize_direct_transfer(vaan, &Beneficiary::Address(to_key), amount, now, &location)
            .map_err(err)?;
        let vname = self.vasps[v].vasp.name().to_string();
        match decision {
            Decision::Approved(approval) => {
                bump(&mut self.metrics, "preauth_approved");
                self.net
                    .borrow_mut()
                    .send(&vname, &self.wallets[w].name, &approval.notify);
                let nonce = self.next_nonce(w);
                let wallet = &mut self.wallets[w];
                let from = wallet.device.public_key(wallet.key).map_err(err)?;
                let body = TxBody::transfer(from, to_key, amount, nonce);
                let signature = wallet
                    .device
                    .sign_transaction(wallet.key, &body.signing_bytes())
                    .map_err(err)?;
                let name = wallet.name.clone();
                self.submit_tx(&name, Transaction::owner_signed(body, signature));
            }
            Decision::Deferred(reason) => {
                bump(&mut self.metrics, "preauth_deferred");
                self.note(&vname, &format!("pre-authorization deferred: {reason:?}"));
            }
            Decision::Rejected(reason) => {
                bump(&mut self.metrics, "preauth_rejected");
                self.note(&vname, &format!("pre-authorization rejected: {reason:?}"));
            }
        }
        Ok(())
    }

    /// Appraises both wallets at verifier `x` for VASP `a` and decides.
    fn cross_decision(&mut self, a: usize, b: usize, w: usize, to: usize, x: usize) -> Result<CrossVaspDecision, String> {
        let World {
            net,
            vasps,
            wallets,
            verifiers,
            ..
        } = self;
        let (xname, xv) = &verifiers[x];
        let an = vasps[a].vasp.name().to_string();
        let bn = vasps[b].vasp.name().to_string();
        let service = RemoteVerifier {
            net,
            verifier: xv,
            name: xname,
            caller: &an,
        };
        let challenge = service.request_challenge(&ChallengeRequest {
            requester_id: an.clone(),
        });
        let target = &mut wallets[to];
        let to_key = target.device.public_key(target.key).map_err(err)?;
        let request = vasps[a]
            .vasp
            .cross_vasp_request(to_key, xname, challenge.session_id, challenge.nonce);
        net.borrow_mut().send(&an, &bn, &request);
        let submission = {
            let device = RemoteDevice::new(net, &mut target.device, &target.name, &bn);
            vasps[b]
                .vasp
                .answer_cross_vasp_request(&request, &device)
                .map_err(err)?
        };
        let beneficiary = {
            let mut n = net.borrow_mut();
            n.send(&bn, xname, &submission);
            xv.set_time(n.now());
            let delivery = xv.handle_submission(&submission);
            n.send(xname, &an, &delivery);
            delivery.result
        };

        let origin = &mut wallets[w];
        let handle = origin.key;
        let selection = [
            ClaimRequest::KeyProvenance(handle),
            ClaimRequest::KeyType(handle),
            ClaimRequest::SystemConfig,
        ];
        let device = RemoteDevice::new(net, &mut origin.device, &origin.name, &an);
        let originator = vasps[a]
            .vasp
            .attest(&device, &selection, &service)
            .map_err(err)?;
        let mut decision = vasps[a]
            .vasp
            .authorize_cross_vasp(&originator, &beneficiary, &xv.public_key());
        if beneficiary.nonce != request.nonce {
            decision.authorized = false;
            decision.reasons.push("beneficiary:nonce".into());
        }
        Ok(decision)
    }

    fn cross_transfer(&mut self, w: usize, to: usize, amount: u64, path: CrossPath) -> ActionResult {
        let (a, vaan) = self.hosted(w)?;
        let (b, _) = self.hosted(to)?;
        if a == b {
            return Err("cross-VASP transfer between customers of one VASP".into());
        }
        let to_key = self.wallet_key(to)?;
        self.request_transfer(w, a, vaan, to_key, amount, false);
        let location = self.locate(a, &to_key);
        if location != WalletLocation::KnownAt(self.vasps[b].vasp.code()) {
            bump(&mut self.metrics, "denied");
            self.note(self.vasps[a].vasp.name(), "counterparty VASP not found");
            return Ok(());
        }
        let shared = || self.shared.ok_or_else(|| "no shared verifier declared".to_string());
        let own_verifier = self.vasps[a].verifier;
        let (own_x, shared_x) = match path {
            CrossPath::Own => (Some(own_verifier), None),
            CrossPath::Shared => (None, Some(shared()?)),
            CrossPath::Both => (Some(own_verifier), Some(shared()?)),
        };
        let own = own_x
            .map(|x| self.cross_decision(a, b, w, to, x))
            .transpose()?;
        let shared = shared_x
            .map(|x| self.cross_decision(a, b, w, to, x))
            .transpose()?;
        let outcome = CrossOutcome {
            from: self.wallets[w].name.clone(),
            to: self.wallets[to].name.clone(),
            own,
            shared,
        };
        if outcome.mismatch() {
            bump(&mut self.metrics, "path_mismatches");
        }
        let decision = outcome
            .own
            .clone()
            .or_else(|| outcome.shared.clone())
            .expect("at least one path");
        self.cross.push(outcome);
        if !decision.authorized {
            bump(&mut self.metrics, "denied");
            self.note(
                self.vasps[a].vasp.name(),
                &format!("cross-VASP transfer denied: {}", decision.reasons.join(", ")),
            );
            return Ok(());
        }
        bump(&mut self.metrics, "authorized");
        self.mediated(w, a, vaan, to_key, amount, location)
    }

    fn recover(&mut self, w: usize, onto: Option<&str>) -> ActionResult {
        let (v, vaan) = self.account(w)?;
        let now = self.now();
        self.wallets[w].lost = true;
        let replacement = match onto {
            Some(model) => {
                let wallet = &mut self.wallets[w];
                wallet.replacements += 1;
                let label = format!("replacement/{}/{}", wallet.name, wallet.replacements);
                let device = create_device(
                    derive(self.seed, &label),
                    &ManifestRef::new(model),
                    self.endorser.catalog(),
                )
                .map_err(err)?;
                endorse(&mut self.net.borrow_mut(), &self.endorser, &self.verifiers, &device);
                Some(device)
            }
            None => None,
        };
        let World {
            net,
            vasps,
            wallets,
            ledger,
            ..
        } = self;
        let wallet = &mut wallets[w];
        let vasp = &mut vasps[v].vasp;
        let caller = vasp.name().to_string();
        let (report, device) = match replacement {
            Some(mut device) => {
                let mut remote = RemoteDevice::new(net, &mut device, &wallet.name, &caller);
                let report = vasp
                    .recover_lost_device(vaan, Some((&mut remote, wallet.secret.as_slice())), ledger, now)
                    .map_err(err)?;
                (report, Some(device))
            }
            None => (
                vasp.recover_lost_device(vaan, None, ledger, now)
                    .map_err(err)?,
                None,
            ),
        };
        net.borrow_mut().send(&caller, &wallet.name, &report);
        for step in &report.steps {
            if let (RecoveryStep::RestoreBlob { handle, .. }, Some(_)) = (step, &device) {
                wallet.key = *handle;
            }
        }
        if let Some(device) = device {
            wallet.device = device;
            wallet.lost = false;
        }
        bump(&mut self.metrics, "recovered");
        if let Some(tx) = report.sweep().cloned() {
            bump(&mut self.metrics, "swept");
            self.submit_tx(&caller, tx);
        }
        Ok(())
    }

    fn offboard(&mut self, w: usize, move_assets: bool) -> ActionResult {
        let (v, vaan) = self.hosted(w)?;
        let now = self.now();
        let World {
            net,
            vasps,
            wallets,
            verifiers,
            ledger,
            ..
        } = self;
        let node = &mut vasps[v];
        let wallet = &mut wallets[w];
        let caller = node.vasp.name().to_string();
        let (vname, verifier) = &verifiers[node.verifier];
        let service = RemoteVerifier {
            net,
            verifier,
            name: vname,
            caller: &caller,
        };
        let mut device = RemoteDevice::new(net, &mut wallet.device, &wallet.name, &caller);
        let report = node
            .vasp
            .offboard_customer(vaan, &mut device, &service, move_assets.then_some(&*ledger), now)
            .map_err(err)?;
        net.borrow_mut().send(&caller, &wallet.name, &report);
        let audit = verify_offboard_report(&report, &node.vasp.signing_key(), &verifier.public_key());
        if let Err(e) = audit {
            return Err(format!("off-boarding report does not verify: {e}"));
        }
        for tx in report.asset_moves {
            self.submit_tx(&caller, tx);
        }
        bump(&mut self.metrics, "offboarded");
        Ok(())
    }

    /// Re-attests every active customer of VASP `v` with its usage log and
    /// reconciles against the ledger.
    fn reconcile(&mut self, v: usize) {
        let now = self.now();
        let World {
            net,
            vasps,
            wallets,
            verifiers,
            ledger,
            ..
        } = self;
        let node = &mut vasps[v];
        let caller = node.vasp.name().to_string();
        let (vname, verifier) = &verifiers[node.verifier];
        let service = RemoteVerifier {
            net,
            verifier,
            name: vname,
            caller: &caller,
        };
        let mut logs: Vec<Vec<UsageEntry>> = Vec::new();
        for wallet in wallets.iter_mut().filter(|w| w.vasp == Some(v) && !w.lost) {
            let Some(vaan) = wallet.vaan else { continue };
            let active = node
                .vasp
                .account(vaan)
                .is_some_and(|a| a.status == AccountStatus::Active && a.active_key().is_some());
            if !active {
                continue;
            }
            let device = RemoteDevice::new(net, &mut wallet.device, &wallet.name, &caller);
            match node.vasp.reattest(vaan, &device, &service) {
                Ok(result) => logs.extend(result.claims.iter().filter_map(|c| match &c.body {
                    ClaimBody::UsageLog { entries, .. } => Some(entries.clone()),
                    _ => None,
                })),
                Err(e) => net.borrow_mut().note(&caller, &format!("usage log unavailable: {e}")),
            }
        }
        let report = node.vasp.reconcile(ledger.confirmed(), &logs, now);
        let summary = ReconcileSummary {
            vasp: caller.clone(),
            unrecorded: report.unrecorded.clone(),
            lost: report.lost.clone(),
            divergences: report
                .divergences
                .iter()
                .map(|d| (d.signed_first, d.signed_second))
                .collect(),
            retroactive_rejections: report.retroactive_rejections.clone(),
        };
        net.borrow_mut().send(&caller, "auditor", &summary);
        self.lost.extend(report.lost.iter().copied());
        self.unrecorded.extend(report.unrecorded.iter().copied());
        self.divergences.extend(report.divergences.iter().copied());
        self.retroactive
            .extend(report.retroactive_rejections.iter().copied());
        self.reconciliations.push((caller, report));
    }

    /// Ledger payloads carrying any customer's identifying data.
    fn plane_violations(&self) -> u64 {
        let parties: Vec<Vec<u8>> = self
            .vasps
            .iter()
            .flat_map(|n| n.vasp.accounts())
            .map(|a| {
                let mut out = Vec::new();
                a.party.write_to(&mut out);
                out
            })
            .collect();
        self.ledger
            .payload_bytes()
            .iter()
            .filter(|p| parties.iter().any(|q| contains(p, q)))
            .count() as u64
    }

    /// Runs every action in tick order, drains the ledger plane and checks the
    /// scenario's expectations.
    pub fn run(mut self, actions: &[Scheduled], expectations: &[Expectation]) -> ScenarioReport {
        let mut actions = actions.to_vec();
        actions.sort_by_key(|a| a.tick);
        for a in &actions {
            self.advance_to(a.tick);
            if let Err(e) = self.perform(&a.action) {
                bump(&mut self.metrics, "action_errors");
                self.note("world", &format!("line {}: {e}", a.line));
            }
            self.pump();
        }
        for m in &mut self.queue {
            m.held = false;
        }
        let settle = self.ledger_link.delay + self.ledger.confirmation_delay() + 1;
        let mut horizon = self.now() + settle;
        while self.now() < horizon {
            self.advance_to(self.now() + 1);
            if self.queue.is_empty() && self.ledger.pending().next().is_none() {
                break;
            }
            if self.now() == horizon && !self.queue.is_empty() {
                horizon += settle;
            }
        }

        let violations = self.plane_violations();
        let confirmed = self.ledger.confirmed().len() as u64;
        let m = &mut self.metrics;
        m.insert("plane_violations".into(), violations);
        m.insert("confirmed".into(), confirmed);
        m.insert("lost".into(), self.lost.len() as u64);
        m.insert("unrecorded".into(), self.unrecorded.len() as u64);
        m.insert("divergences".into(), self.divergences.len() as u64);
        m.insert(
            "retroactive_rejections".into(),
            self.retroactive.len() as u64,
        );

        let mut failures = Vec::new();
        for e in expectations {
            let got = self.metrics.get(&e.metric).copied().unwrap_or(0);
            if got != e.value {
                failures.push(format!(
                    "line {}: expected {} = {}, got {got}",
                    e.line, e.metric, e.value
                ));
            }
        }
        for metric in ["action_errors", "plane_violations", "path_mismatches"] {
            let got = self.metrics[metric];
            if got > 0 && !expectations.iter().any(|e| e.metric == metric) {
                failures.push(format!("{metric} = {got}"));
            }
        }
        let now = self.now();
        if now > self.budget {
            failures.push(format!("budget exceeded: finished at tick {now}, budget {}", self.budget));
        }

        let outcome = ScenarioOutcome {
            name: self.name.clone(),
            seed: self.seed,
            passed: failures.is_empty(),
            metrics: self.metrics.clone(),
            failures: failures.clone(),
        };
        let mut net = self.net.into_inner();
        net.record(EventKind::Outcome, "world", "-", outcome.to_bytes());
        ScenarioReport {
            name: self.name,
            seed: self.seed,
            passed: outcome.passed,
            metrics: self.metrics,
            failures,
            cross: self.cross,
            reconciliations: self.reconciliations,
            trace: net.into_trace(),
        }
    }
}

/// The manufacturer publishes the device's endorsement to every verifier.
fn endorse(net: &mut Net, endorser: &Endorser, verifiers: &[(String, Verifier)], device: &DeviceState) {
    let endorsement = endorser
        .make_endorsement(&device.identity(), device.manifest_ref())
        .expect("scenario models are published");
    for (name, v) in verifiers {
        net.send(&endorser.id, name, &endorsement);
        v.register_endorsement(endorsement.clone())
            .expect("verifiers trust the scenario endorser");
    }
}

pub fn run_scenario(sc: &Scenario, seed: u64, policies: PolicyLoader<'_>) -> Result<ScenarioReport, SetupError> {
    Ok(World::new(sc, seed, policies)?.run(&sc.actions, &sc.expectations))
}

/// Runs every `(scenario, seed)` job on its own thread. Results are in job order.
pub fn run_matrix(
    jobs: &[(&Scenario, u64)],
    policies: PolicyLoader<'_>,
) -> Vec<Result<ScenarioReport, SetupError>> {
    std::thread::scope(|s| {
        let handles: Vec<_> = jobs
            .iter()
            .map(|(sc, seed)| s.spawn(move || run_scenario(sc, *seed, policies)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("scenario threads do not panic"))
            .collect()
    })
}
