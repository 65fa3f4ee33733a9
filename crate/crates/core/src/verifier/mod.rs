//! Attestation service: challenges, freshness, chain checks and policy appraisal.
//!
//! A [`Verifier`] can be shared between threads. Session consumption and the
//! result log are each guarded by their own lock, and policy evaluation runs
//! outside both, so appraisals of distinct sessions only contend briefly.

mod messages;

#[cfg(test)]
mod tests;

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Mutex, MutexGuard, RwLock, RwLockReadGuard, RwLockWriteGuard};

use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::Serialize;
use thiserror::Error;

use crate::claims::{
    verify_chain, AttestationResult, Endorsement, Evidence, LogicalTime, ManifestRef, Nonce,
    ReferenceManifest, Verdict,
};
use crate::crypto::{self, Digest, PublicKey, SecretKey};
use crate::policy::{evaluate, EvalInput, PolicyProgram};

pub use messages::{ChallengeRequest, ChallengeResponse, EvidenceSubmission, ResultDelivery};

pub const DEFAULT_NONCE_TTL: LogicalTime = 100;

pub type SessionId = u64;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ChallengeSession {
    pub session_id: SessionId,
    pub requester_id: String,
    #[serde(serialize_with = "crate::claims::render::hex_bytes")]
    pub nonce: Nonce,
    pub issued_at: LogicalTime,
    pub ttl: LogicalTime,
    pub consumed: bool,
}

/// Why a session could not be used. Each becomes a signed `Fail` result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionFailure {
    UnknownSession,
    Replay,
    Expired,
    NonceMismatch,
}

impl SessionFailure {
    pub fn code(self) -> &'static str {
        match self {
            SessionFailure::UnknownSession => "session.unknown",
            SessionFailure::Replay => "session.replay",
            SessionFailure::Expired => "session.expired",
            SessionFailure::NonceMismatch => "session.nonce_mismatch",
        }
    }
}

pub const UNKNOWN_POLICY: &str = "policy.unknown";
pub const ADVISORY_PREFIX: &str = "advisory:";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RegistrationError {
    #[error("endorser `{0}` is not a trusted root")]
    UnknownEndorser(String),
    #[error("signature does not verify under the endorser root")]
    BadSignature,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ack {
    Stored,
    AlreadyKnown,
}

#[derive(Debug, Clone)]
pub struct VerifierConfig {
    pub id: String,
    pub seed: [u8; 32],
    pub nonce_ttl: LogicalTime,
}

impl VerifierConfig {
    pub fn new(id: impl Into<String>, seed: [u8; 32]) -> Self {
        VerifierConfig {
            id: id.into(),
            seed,
            nonce_ttl: DEFAULT_NONCE_TTL,
        }
    }
}

struct SessionTable {
    rng: ChaCha20Rng,
    next_id: SessionId,
    sessions: BTreeMap<SessionId, ChallengeSession>,
}

#[derive(Default)]
struct Stores {
    roots: BTreeMap<String, PublicKey>,
    endorsements: Vec<Endorsement>,
    manifests: BTreeMap<ManifestRef, ReferenceManifest>,
    policies: BTreeMap<String, PolicyProgram>,
}

pub struct Verifier {
    id: String,
    key: SecretKey,
    ttl: LogicalTime,
    clock: AtomicU64,
    sessions: Mutex<SessionTable>,
    stores: RwLock<Stores>,
    results: Mutex<Vec<AttestationResult>>,
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|e| e.into_inner())
}

impl Verifier {
    pub fn new(config: VerifierConfig) -> Verifier {
        let rng_seed = Digest::of_parts(&[b"verifier-nonces", &config.seed]);
        Verifier {
            key: SecretKey::derive(&config.seed, "verifier", 0),
            id: config.id,
            ttl: config.nonce_ttl,
            clock: AtomicU64::new(0),
            sessions: Mutex::new(SessionTable {
                rng: ChaCha20Rng::from_seed(rng_seed.0),
                next_id: 1,
                sessions: BTreeMap::new(),
            }),
            stores: RwLock::new(Stores::default()),
            results: Mutex::new(Vec::new()),
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn public_key(&self) -> PublicKey {
        self.key.public()
    }

    pub fn now(&self) -> LogicalTime {
        self.clock.load(Ordering::SeqCst)
    }

    /// Advances the logical clock. Time never moves backwards.
    pub fn set_time(&self, now: LogicalTime) {
        self.clock.fetch_max(now, Ordering::SeqCst);
    }

    fn read(&self) -> RwLockReadGuard<'_, Stores> {
        self.stores.read().unwrap_or_else(|e| e.into_inner())
    }

    fn write(&self) -> RwLockWriteGuard<'_, Stores> {
        self.stores.write().unwrap_or_else(|e| e.into_inner())
    }

    pub fn trust_endorser(&self, endorser_id: impl Into<String>, root: PublicKey) {
        self.write().roots.insert(endorser_id.into(), root);
    }

    pub fn install_policy(&self, policy_id: impl Into<String>, program: PolicyProgram) {
        self.write().policies.insert(policy_id.into(), program);
    }

    pub fn policy(&self, policy_id: &str) -> Option<PolicyProgram> {
        self.read().policies.get(policy_id).cloned()
    }

    pub fn register_endorsement(&self, e: Endorsement) -> Result<Ack, RegistrationError> {
        let mut s = self.write();
        let root = s
            .roots
            .get(&e.endorser_id)
            .ok_or_else(|| RegistrationError::UnknownEndorser(e.endorser_id.clone()))?;
        if !crypto::verify(root, &e.signing_payload(), &e.signature) {
            return Err(RegistrationError::BadSignature);
        }
        if s.endorsements.contains(&e) {
            return Ok(Ack::AlreadyKnown);
        }
        s.endorsements.push(e);
        Ok(Ack::Stored)
    }

    pub fn register_manifest(&self, m: ReferenceManifest) -> Result<Ack, RegistrationError> {
        let mut s = self.write();
        let root = s
            .roots
            .get(&m.manufacturer_id)
            .ok_or_else(|| RegistrationError::UnknownEndorser(m.manufacturer_id.clone()))?;
        if !crypto::verify(root, &m.signing_payload(), &m.signature) {
            return Err(RegistrationError::BadSignature);
        }
        if s.manifests.get(&m.manifest_ref) == Some(&m) {
            return Ok(Ack::AlreadyKnown);
        }
        s.manifests.insert(m.manifest_ref.clone(), m);
        Ok(Ack::Stored)
    }

    pub fn new_challenge(&self, requester_id: &str) -> ChallengeResponse {
        let now = self.now();
        let mut t = lock(&self.sessions);
        let mut nonce = [0u8; 16];
        t.rng.fill_bytes(&mut nonce);
        let session_id = t.next_id;
        t.next_id += 1;
        t.sessions.insert(
            session_id,
            ChallengeSession {
                session_id,
                requester_id: requester_id.to_string(),
                nonce,
                issued_at: now,
                ttl: self.ttl,
                consumed: false,
            },
        );
        ChallengeResponse { session_id, nonce }
    }

    pub fn session(&self, session_id: SessionId) -> Option<ChallengeSession> {
        lock(&self.sessions).sessions.get(&session_id).cloned()
    }

    /// Consumes the session and returns its issue time, or the reason it is unusable.
    fn consume(
        &self,
        session_id: SessionId,
        nonce: &Nonce,
        now: LogicalTime,
    ) -> Result<LogicalTime, SessionFailure> {
        let mut t = lock(&self.sessions);
        let s = t
            .sessions
            .get_mut(&session_id)
            .ok_or(SessionFailure::UnknownSession)?;
        if s.consumed {
            return Err(SessionFailure::Replay);
        }
        s.consumed = true;
        if now.saturating_sub(s.issued_at) > s.ttl {
            return Err(SessionFailure::Expired);
        }
        if s.nonce != *nonce {
            return Err(SessionFailure::NonceMismatch);
        }
        Ok(s.issued_at)
    }

    /// Appraises `evidence` against the session it answers and the named policy.
    ///
    /// Always returns a signed result; every denial carries reason codes.
    pub fn appraise(
        &self,
        session_id: SessionId,
        evidence: &Evidence,
        policy_id: &str,
    ) -> AttestationResult {
        let now = self.now();
        let outcome = self
            .consume(session_id, &evidence.nonce, now)
            .map_err(|f| vec![f.code().to_string()])
            .and_then(|issued_at| self.appraise_fresh(evidence, policy_id, now, issued_at));
        let (verdict, failed_rules, loa) = match outcome {
            Ok((failed, loa)) => (Verdict::Pass, failed, loa),
            Err(failed) => (Verdict::Fail, failed, None),
        };
        let mut result = AttestationResult {
            verifier_id: self.id.clone(),
            device_id: evidence.device_id,
            policy_id: policy_id.to_string(),
            verdict,
            failed_rules,
            loa,
            evaluated_at: now,
            nonce: evidence.nonce,
            claims: evidence.claims.clone(),
            signature: Default::default(),
        };
        result.signature = self.key.sign(&result.signing_payload());
        lock(&self.results).push(result.clone());
        result
    }

    /// Chain check and policy evaluation. `Ok` carries advisory codes and the level.
    #[allow(clippy::type_complexity)]
    fn appraise_fresh(
        &self,
        evidence: &Evidence,
        policy_id: &str,
        now: LogicalTime,
        issued_at: LogicalTime,
    ) -> Result<(Vec<String>, Option<u8>), Vec<String>> {
        let s = self.read();
        let device_endorsement = s.endorsements.iter().find(|e| {
            e.device()
                .is_some_and(|id| id.device_id == evidence.device_id)
        });
        let root = device_endorsement
            .and_then(|e| s.roots.get(&e.endorser_id))
            .copied()
            .unwrap_or(PublicKey([0; 32]));
        if let Some(reason) = verify_chain(evidence, device_endorsement, &root).reason {
            return Err(vec![reason.code().to_string()]);
        }
        let program = s
            .policies
            .get(policy_id)
            .ok_or_else(|| vec![UNKNOWN_POLICY.to_string()])?;
        let manifests: Vec<ReferenceManifest> = s.manifests.values().cloned().collect();
        let verdict = evaluate(
            program,
            &EvalInput {
                evidence,
                endorsements: &s.endorsements,
                manifests: &manifests,
                now,
                challenge_issued_at: Some(issued_at),
            },
        );
        let advisory = verdict
            .advisory_failures
            .iter()
            .map(|f| format!("{ADVISORY_PREFIX}{}", f.code()));
        if verdict.pass {
            Ok((advisory.collect(), verdict.loa))
        } else {
            Err(verdict
                .failed_rules
                .iter()
                .map(|f| f.code())
                .chain(advisory)
                .collect())
        }
    }

    pub fn result_log(&self) -> Vec<AttestationResult> {
        lock(&self.results).clone()
    }

    pub fn handle(&self, request: &ChallengeRequest) -> ChallengeResponse {
        self.new_challenge(&request.requester_id)
    }

    pub fn handle_submission(&self, submission: &EvidenceSubmission) -> ResultDelivery {
        ResultDelivery {
            result: self.appraise(
                submission.session_id,
                &submission.evidence,
                &submission.policy_id,
            ),
        }
    }
}

/// The verifier operations a relying party needs. Implemented by [`Verifier`]
/// for in-process use; the simulator implements it over its transport.
pub trait AttestationService {
    fn verifier_key(&self) -> PublicKey;
    fn request_challenge(&self, request: &ChallengeRequest) -> ChallengeResponse;
    fn submit_evidence(&self, submission: &EvidenceSubmission) -> ResultDelivery;
}

impl AttestationService for Verifier {
    fn verifier_key(&self) -> PublicKey {
        self.public_key()
    }
    fn request_challenge(&self, request: &ChallengeRequest) -> ChallengeResponse {
        self.handle(request)
    }
    fn submit_evidence(&self, submission: &EvidenceSubmission) -> ResultDelivery {
        self.handle_submission(submission)
    }
}

/// Checks a result's signature against the verifier key that should have issued it.
pub fn verify_result(verifier_key: &PublicKey, result: &AttestationResult) -> bool {
    crypto::verify(verifier_key, &result.signing_payload(), &result.signature)
}
