//! Three-valued evaluation of policy programs over evidence.
//!
//! Atoms over a claim kind hold only if they hold for every claim of that
//! kind. An atom whose inputs are absent evaluates to "unknown"; `and`/`or`
//! short-circuit through unknowns the Kleene way, and a rule that ends up
//! unknown fails with the missing input as its reason.

use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

use crate::claims::{
    ChainLink, ClaimBody, ClaimKind, CreationOrigin, Endorsement, Evidence, HardwareClass, KeyKind,
    LogicalTime, ReferenceManifest,
};
use crate::crypto::{Digest, PublicKey};

use super::ast::{
    Atom, CmpOp, Expr, FieldPath, Literal, LoaTable, PolicyProgram, SetRef, Severity,
};
use super::schema::Source;

/// Everything an appraisal may read.
#[derive(Debug, Clone, Copy)]
pub struct EvalInput<'a> {
    pub evidence: &'a Evidence,
    pub endorsements: &'a [Endorsement],
    pub manifests: &'a [ReferenceManifest],
    pub now: LogicalTime,
    /// When the challenge answered by `evidence` was issued, if known.
    pub challenge_issued_at: Option<LogicalTime>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Missing {
    Claim(ClaimKind),
    Manifest,
    Endorsement,
    Challenge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    PredicateFalse,
    Missing(Missing),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct RuleFailure {
    pub rule_id: String,
    pub reason: FailureReason,
}

impl RuleFailure {
    /// Stable reason code: the rule id, suffixed with the missing input if any.
    pub fn code(&self) -> String {
        match self.reason {
            FailureReason::PredicateFalse => self.rule_id.clone(),
            FailureReason::Missing(Missing::Claim(k)) => {
                format!("{}:missing_claim:{}", self.rule_id, k.policy_name())
            }
            FailureReason::Missing(Missing::Manifest) => {
                format!("{}:missing_manifest", self.rule_id)
            }
            FailureReason::Missing(Missing::Endorsement) => {
                format!("{}:missing_endorsement", self.rule_id)
            }
            FailureReason::Missing(Missing::Challenge) => {
                format!("{}:missing_challenge", self.rule_id)
            }
        }
    }
}

impl fmt::Display for RuleFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.code())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PolicyVerdict {
    pub pass: bool,
    /// Failed mandatory rules, sorted by rule id.
    pub failed_rules: Vec<RuleFailure>,
    /// Failed advisory rules, sorted by rule id. These never affect `pass`.
    pub advisory_failures: Vec<RuleFailure>,
    pub satisfied_features: BTreeSet<String>,
    /// Assigned only when `pass` holds.
    pub loa: Option<u8>,
}

/// Highest level whose required features are all satisfied; 1 when none is.
pub fn assign_loa(features: &BTreeSet<String>, table: &LoaTable) -> u8 {
    table
        .levels
        .iter()
        .filter(|(_, required)| required.is_subset(features))
        .map(|(level, _)| *level)
        .max()
        .unwrap_or(1)
        .max(1)
}

pub fn evaluate(program: &PolicyProgram, input: &EvalInput<'_>) -> PolicyVerdict {
    let ctx = Context::new(input);
    let mut failed = Vec::new();
    let mut advisory = Vec::new();
    for rule in &program.rules {
        let reason = match ctx.eval(&rule.predicate) {
            Truth::True => continue,
            Truth::False => FailureReason::PredicateFalse,
            Truth::Unknown(m) => FailureReason::Missing(m),
        };
        let failure = RuleFailure {
            rule_id: rule.id.clone(),
            reason,
        };
        match rule.severity {
            Severity::Mandatory => failed.push(failure),
            Severity::Advisory => advisory.push(failure),
        }
    }
    failed.sort_by(|a, b| a.rule_id.cmp(&b.rule_id).then(a.code().cmp(&b.code())));
    advisory.sort_by(|a, b| a.rule_id.cmp(&b.rule_id).then(a.code().cmp(&b.code())));
    let satisfied_features: BTreeSet<String> = program
        .loa_table
        .features
        .iter()
        .filter(|(_, e)| ctx.eval(e) == Truth::True)
        .map(|(n, _)| n.clone())
        .collect();
    let pass = failed.is_empty();
    PolicyVerdict {
        pass,
        loa: pass.then(|| assign_loa(&satisfied_features, &program.loa_table)),
        failed_rules: failed,
        advisory_failures: advisory,
        satisfied_features,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Truth {
    True,
    False,
    Unknown(Missing),
}

impl Truth {
    fn from_bool(b: bool) -> Truth {
        if b {
            Truth::True
        } else {
            Truth::False
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Value<'a> {
    Bool(bool),
    Num(f64),
    Digest(Digest),
    Str(&'a str),
    Variant(&'static str),
    DigestSet(&'a BTreeSet<Digest>),
}

fn kind_name(k: KeyKind) -> &'static str {
    match k {
        KeyKind::EndorsementKey => "endorsement_key",
        KeyKind::DeviceIdentityKey => "device_identity_key",
        KeyKind::ApplicationKey => "application_key",
    }
}

fn origin_name(o: CreationOrigin) -> &'static str {
    match o {
        CreationOrigin::GeneratedOnboard => "generated_onboard",
        CreationOrigin::Injected => "injected",
    }
}

fn class_name(c: HardwareClass) -> &'static str {
    match c {
        HardwareClass::TrustedHardware => "trusted_hardware",
        HardwareClass::SoftwareOnly => "software_only",
    }
}

/// True when the entries count up from 1 without gaps and each PCR snapshot
/// is the running hash-extend of the signed digests, ending at `pcr7`.
fn usage_chain_valid(entries: &[crate::claims::UsageEntry], pcr7: &Digest) -> bool {
    let mut acc = Digest::ZERO;
    for (i, e) in entries.iter().enumerate() {
        if e.counter_value != i as u64 + 1 {
            return false;
        }
        acc = acc.extend(&e.signed_digest);
        if acc != e.pcr_snapshot {
            return false;
        }
    }
    acc == *pcr7
}

fn claim_field<'a>(body: &'a ClaimBody, field: &str) -> Option<Value<'a>> {
    let v = match (body, field) {
        (ClaimBody::KeyType { migratable, .. }, "migratable") => Value::Bool(*migratable),
        (ClaimBody::KeyType { kind, .. }, "kind") => Value::Variant(kind_name(*kind)),
        (
            ClaimBody::KeyType {
                creation_origin, ..
            }
            | ClaimBody::KeyProvenance {
                creation_origin, ..
            },
            "creation_origin",
        ) => Value::Variant(origin_name(*creation_origin)),
        (ClaimBody::KeyProvenance { chain, .. }, "chain_length") => Value::Num(chain.len() as f64),
        (
            ClaimBody::KeyProvenance {
                creation_origin,
                source_device,
                ..
            },
            "source_known",
        ) => Value::Bool(
            *creation_origin == CreationOrigin::GeneratedOnboard || source_device.is_some(),
        ),
        (ClaimBody::GeoLocation(p), "lat") => Value::Num(p.lat()),
        (ClaimBody::GeoLocation(p), "lon") => Value::Num(p.lon()),
        (ClaimBody::GeoLocation(p), "alt") => Value::Num(p.alt()),
        (ClaimBody::UsageLog { entries, .. }, "count") => Value::Num(entries.len() as f64),
        (ClaimBody::UsageLog { entries, .. }, "last_counter") => {
            Value::Num(entries.last().map_or(0, |e| e.counter_value) as f64)
        }
        (ClaimBody::UsageLog { entries, pcr7 }, "chain_valid") => {
            Value::Bool(usage_chain_valid(entries, pcr7))
        }
        (ClaimBody::SystemConfig { config_digest, .. }, "config_digest") => {
            Value::Digest(*config_digest)
        }
        (ClaimBody::SystemConfig { components, .. }, "component_count") => {
            Value::Num(components.len() as f64)
        }
        (ClaimBody::SignatureOrigin { counter_value, .. }, "counter") => {
            Value::Num(*counter_value as f64)
        }
        (ClaimBody::SignatureOrigin { tx_digest, .. }, "tx_digest") => Value::Digest(*tx_digest),
        (
            ClaimBody::Erasure {
                counter_at_erasure, ..
            },
            "counter",
        ) => Value::Num(*counter_at_erasure as f64),
        _ => return None,
    };
    Some(v)
}

fn literal_value(lit: &Literal) -> Value<'_> {
    match lit {
        Literal::Bool(b) => Value::Bool(*b),
        Literal::Num(n) => Value::Num(*n),
        Literal::Digest(d) => Value::Digest(*d),
        Literal::Str(s) => Value::Str(s),
        Literal::Variant(v) => match v.as_str() {
            "endorsement_key" => Value::Variant("endorsement_key"),
            "device_identity_key" => Value::Variant("device_identity_key"),
            "application_key" => Value::Variant("application_key"),
            "generated_onboard" => Value::Variant("generated_onboard"),
            "injected" => Value::Variant("injected"),
            "trusted_hardware" => Value::Variant("trusted_hardware"),
            "software_only" => Value::Variant("software_only"),
            _ => Value::Variant(""),
        },
    }
}

fn compare(lhs: &Value<'_>, op: CmpOp, rhs: &Value<'_>) -> bool {
    match (lhs, rhs) {
        (Value::Num(a), Value::Num(b)) => match op {
            CmpOp::Eq => a == b,
            CmpOp::Ne => a != b,
            CmpOp::Lt => a < b,
            CmpOp::Le => a <= b,
            CmpOp::Gt => a > b,
            CmpOp::Ge => a >= b,
        },
        _ => match op {
            CmpOp::Eq => same(lhs, rhs),
            CmpOp::Ne => !same(lhs, rhs),
            _ => false,
        },
    }
}

fn same(a: &Value<'_>, b: &Value<'_>) -> bool {
    match (a, b) {
        (Value::Bool(x), Value::Bool(y)) => x == y,
        (Value::Num(x), Value::Num(y)) => x == y,
        (Value::Digest(x), Value::Digest(y)) => x == y,
        (Value::Str(x), Value::Str(y)) => x == y,
        (Value::Variant(x), Value::Variant(y)) => !x.is_empty() && x == y,
        _ => false,
    }
}

/// Even-odd ray casting on (lat, lon); points on an edge may fall either way.
pub fn point_in_polygon(lat: f64, lon: f64, polygon: &[(f64, f64)]) -> bool {
    let n = polygon.len();
    let mut inside = false;
    for i in 0..n {
        let (yi, xi) = polygon[i];
        let (yj, xj) = polygon[(i + n - 1) % n];
        if (yi > lat) != (yj > lat) && lon < (xj - xi) * (lat - yi) / (yj - yi) + xi {
            inside = !inside;
        }
    }
    inside
}

struct Context<'a> {
    input: &'a EvalInput<'a>,
    manifest: Option<&'a ReferenceManifest>,
    endorsements: Vec<&'a Endorsement>,
    ek: Option<PublicKey>,
    age: Option<f64>,
}

impl<'a> Context<'a> {
    fn new(input: &'a EvalInput<'a>) -> Context<'a> {
        let ev = input.evidence;
        let manifest = input
            .manifests
            .iter()
            .find(|m| m.manifest_ref == ev.manifest_ref);
        let endorsements: Vec<&Endorsement> = input
            .endorsements
            .iter()
            .filter(|e| match e.device() {
                Some(id) => id.device_id == ev.device_id,
                None => e.manifest_ref == ev.manifest_ref,
            })
            .collect();
        let ek = endorsements
            .iter()
            .find_map(|e| e.device().map(|id| id.endorsement_key));
        Context {
            input,
            manifest,
            endorsements,
            ek,
            age: input
                .challenge_issued_at
                .map(|t| input.now.saturating_sub(t) as f64),
        }
    }

    fn eval(&self, e: &Expr) -> Truth {
        match e {
            Expr::Const(b) => Truth::from_bool(*b),
            Expr::Atom(a) => self.atom(a),
            Expr::Not(inner) => match self.eval(inner) {
                Truth::True => Truth::False,
                Truth::False => Truth::True,
                u => u,
            },
            Expr::And(a, b) => match (self.eval(a), self.eval(b)) {
                (Truth::False, _) | (_, Truth::False) => Truth::False,
                (Truth::Unknown(m), _) | (_, Truth::Unknown(m)) => Truth::Unknown(m),
                _ => Truth::True,
            },
            Expr::Or(a, b) => match (self.eval(a), self.eval(b)) {
                (Truth::True, _) | (_, Truth::True) => Truth::True,
                (Truth::Unknown(m), _) | (_, Truth::Unknown(m)) => Truth::Unknown(m),
                _ => Truth::False,
            },
        }
    }

    /// All values a path takes, or the input whose absence prevents reading it.
    fn values(&self, path: &FieldPath) -> Result<Vec<Value<'a>>, Missing> {
        match path.source {
            Source::Claim(kind) => {
                let vals: Vec<Value<'a>> = self
                    .input
                    .evidence
                    .claims_of(kind)
                    .filter_map(|c| claim_field(&c.body, &path.field))
                    .collect();
                if vals.is_empty() {
                    Err(Missing::Claim(kind))
                } else {
                    Ok(vals)
                }
            }
            Source::Manifest => {
                let m = self.manifest.ok_or(Missing::Manifest)?;
                let v = match path.field.as_str() {
                    "hardware_class" => Value::Variant(class_name(m.hardware_class)),
                    "approved_configs" => Value::DigestSet(&m.approved_config_digests),
                    "manufacturer" => Value::Str(&m.manufacturer_id),
                    _ => return Ok(Vec::new()),
                };
                Ok(vec![v])
            }
            Source::Freshness => match path.field.as_str() {
                "age" => self
                    .age
                    .map(|a| vec![Value::Num(a)])
                    .ok_or(Missing::Challenge),
                _ => Ok(Vec::new()),
            },
            Source::Evidence => match path.field.as_str() {
                "counter" => Ok(vec![Value::Num(self.input.evidence.counter as f64)]),
                _ => Ok(Vec::new()),
            },
        }
    }

    fn atom(&self, atom: &Atom) -> Truth {
        match self.atom_inner(atom) {
            Ok(b) => Truth::from_bool(b),
            Err(m) => Truth::Unknown(m),
        }
    }

    fn atom_inner(&self, atom: &Atom) -> Result<bool, Missing> {
        match atom {
            Atom::Compare { path, op, value } => {
                let rhs = literal_value(value);
                let vals = self.values(path)?;
                Ok(!vals.is_empty() && vals.iter().all(|v| compare(v, *op, &rhs)))
            }
            Atom::Member { path, set } => {
                let vals = self.values(path)?;
                let ok = match set {
                    SetRef::Literals(items) => vals
                        .iter()
                        .all(|v| items.iter().any(|l| same(v, &literal_value(l)))),
                    SetRef::Path(set_path) => {
                        let sets = self.values(set_path)?;
                        vals.iter().all(|v| {
                            sets.iter().any(|s| match (v, s) {
                                (Value::Digest(d), Value::DigestSet(set)) => set.contains(d),
                                _ => false,
                            })
                        })
                    }
                };
                Ok(!vals.is_empty() && ok)
            }
            Atom::Inside { polygon } => {
                let points: Vec<_> = self
                    .input
                    .evidence
                    .claims_of(ClaimKind::GeoLocation)
                    .filter_map(|c| match &c.body {
                        ClaimBody::GeoLocation(p) => Some(*p),
                        _ => None,
                    })
                    .collect();
                if points.is_empty() {
                    return Err(Missing::Claim(ClaimKind::GeoLocation));
                }
                Ok(points
                    .iter()
                    .all(|p| point_in_polygon(p.lat(), p.lon(), polygon)))
            }
            Atom::Endorsed(path) => {
                let vals = self.values(path)?;
                if self.endorsements.is_empty() {
                    return Err(Missing::Endorsement);
                }
                let Source::Claim(kind) = path.source else {
                    return Ok(false);
                };
                let refs: Vec<Value<'_>> = self
                    .endorsements
                    .iter()
                    .flat_map(|e| e.reference_claims.iter())
                    .filter(|c| c.kind() == kind)
                    .filter_map(|c| claim_field(&c.body, &path.field))
                    .collect();
                Ok(vals.iter().all(|v| refs.iter().any(|r| same(v, r))))
            }
            Atom::ReachesEk => {
                let claims: Vec<_> = self
                    .input
                    .evidence
                    .claims_of(ClaimKind::KeyProvenance)
                    .collect();
                if claims.is_empty() {
                    return Err(Missing::Claim(ClaimKind::KeyProvenance));
                }
                let ek = self.ek.ok_or(Missing::Endorsement)?;
                Ok(claims.iter().all(|c| match &c.body {
                    ClaimBody::KeyProvenance {
                        public_key, chain, ..
                    } => {
                        chain.first().is_some_and(|l| l.public_key == *public_key)
                            && ChainLink::chain_reaches(chain, &ek)
                    }
                    _ => false,
                }))
            }
        }
    }
}
