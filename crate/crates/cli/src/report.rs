//! Summaries recovered from a trace alone.

use std::collections::BTreeMap;
use std::fmt::Write;

use serde::Serialize;
use vasp_attest::claims::Verdict;
use vasp_attest::crypto;
use vasp_attest::netsim::{EventKind, ReconcileSummary, ScenarioOutcome, Trace, TraceEvent};
use vasp_attest::vasp::{OffboardReport, PeerInfo};
use vasp_attest::verifier::ResultDelivery;
use vasp_attest::wire::WireType;

#[derive(Debug, Serialize)]
pub struct AuditEntry {
    pub tick: u64,
    pub vasp: String,
    pub vaan: String,
    pub device: String,
    pub receipts: usize,
    pub receipts_valid: bool,
    pub asset_moves: usize,
    pub completed_at: u64,
    /// `None` when the VASP's signing key was never advertised in the trace.
    pub signature_valid: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Appraisal {
    verifier: String,
    policy: String,
    pass: bool,
    loa: Option<u8>,
}

fn decode<T: WireType>(e: &TraceEvent) -> Option<T> {
    if e.payload.first() != Some(&T::TAG) || e.kind == EventKind::Note {
        return None;
    }
    T::from_bytes(&e.payload).ok()
}

pub fn audit_bundle(trace: &Trace) -> Vec<AuditEntry> {
    let mut peers: BTreeMap<u32, PeerInfo> = BTreeMap::new();
    let mut entries = Vec::new();
    for e in trace.events() {
        if let Some(p) = decode::<PeerInfo>(e) {
            peers.insert(p.code, p);
        }
        if e.kind != EventKind::Send {
            continue;
        }
        let Some(r) = decode::<OffboardReport>(e) else {
            continue;
        };
        let signature_valid = peers
            .get(&r.vasp_code)
            .map(|p| crypto::verify(&p.signing_key, &r.signing_payload(), &r.signature));
        let receipts_valid = r
            .receipts
            .iter()
            .all(|rc| rc.device_id == r.identity.device_id && rc.verify(&r.identity.identity_key));
        entries.push(AuditEntry {
            tick: e.tick,
            vasp: e.from.clone(),
            vaan: format!("{:#018x}", r.vaan),
            device: r.identity.device_id.0.to_hex(),
            receipts: r.receipts.len(),
            receipts_valid,
            asset_moves: r.asset_moves.len(),
            completed_at: r.completed_at,
            signature_valid,
        });
    }
    entries
}

fn appraisals(trace: &Trace) -> BTreeMap<String, Appraisal> {
    let mut latest = BTreeMap::new();
    for e in trace.events().iter().filter(|e| e.kind == EventKind::Send) {
        if let Some(d) = decode::<ResultDelivery>(e) {
            let r = d.result;
            latest.insert(
                r.device_id.0.to_hex()[..16].to_string(),
                Appraisal {
                    verifier: e.from.clone(),
                    policy: r.policy_id,
                    pass: r.verdict == Verdict::Pass,
                    loa: r.loa,
                },
            );
        }
    }
    latest
}

pub fn render(trace: &Trace) -> String {
    let mut out = String::new();
    let outcome = trace.events().iter().rev().find_map(decode::<ScenarioOutcome>);
    if let Some(o) = &outcome {
        let status = if o.passed { "PASS" } else { "FAIL" };
        let _ = writeln!(out, "scenario {} seed {}: {status}", o.name, o.seed);
        for f in &o.failures {
            let _ = writeln!(out, "  {f}");
        }
    }
    let _ = writeln!(out, "events {}", trace.len());

    let _ = writeln!(out, "\nreconciliation");
    let summaries: Vec<(u64, ReconcileSummary)> = trace
        .events()
        .iter()
        .filter(|e| e.kind == EventKind::Send)
        .filter_map(|e| decode::<ReconcileSummary>(e).map(|s| (e.tick, s)))
        .collect();
    if summaries.is_empty() {
        let _ = writeln!(out, "  none");
    }
    for (tick, s) in &summaries {
        let _ = writeln!(
            out,
            "  t={tick} {}: unrecorded {}, lost {}, divergences {}, retroactive rejections {}",
            s.vasp,
            s.unrecorded.len(),
            s.lost.len(),
            s.divergences.len(),
            s.retroactive_rejections.len()
        );
        for d in &s.unrecorded {
            let _ = writeln!(out, "    unrecorded {d}");
        }
        for d in &s.lost {
            let _ = writeln!(out, "    lost {d}");
        }
        for (a, b) in &s.divergences {
            let _ = writeln!(out, "    signed {} before {}, confirmed after", &a.to_hex()[..16], &b.to_hex()[..16]);
        }
        for d in &s.retroactive_rejections {
            let _ = writeln!(out, "    rejected {d}");
        }
    }

    let _ = writeln!(out, "\nassurance levels");
    let latest = appraisals(trace);
    if latest.is_empty() {
        let _ = writeln!(out, "  none");
    }
    let mut histogram: BTreeMap<Option<u8>, usize> = BTreeMap::new();
    for (device, a) in &latest {
        let loa = a.loa.map_or("-".to_string(), |l| l.to_string());
        let verdict = if a.pass { "pass" } else { "fail" };
        let _ = writeln!(out, "  {device} {verdict} loa {loa} ({} via {})", a.policy, a.verifier);
        *histogram.entry(a.loa).or_default() += 1;
    }
    for (loa, n) in &histogram {
        let label = loa.map_or("none".to_string(), |l| l.to_string());
        let _ = writeln!(out, "  level {label}: {n} devices");
    }

    let _ = writeln!(out, "\naudit bundles");
    let audit = audit_bundle(trace);
    if audit.is_empty() {
        let _ = writeln!(out, "  none");
    }
    for a in &audit {
        let sig = match a.signature_valid {
            Some(true) => "signature ok",
            Some(false) => "signature INVALID",
            None => "signer not advertised",
        };
        let receipts = if a.receipts_valid { "ok" } else { "INVALID" };
        let _ = writeln!(
            out,
            "  {} account {}: {} receipts {receipts}, {} asset moves, {sig}",
            a.vasp, a.vaan, a.receipts, a.asset_moves
        );
    }
    out
}
