//! Field paths the policy language can address, and their types.

use crate::claims::ClaimKind;

/// Where a field path reads from: a claim kind in the evidence, or appraisal context.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Source {
    Claim(ClaimKind),
    /// The reference manifest named by the evidence.
    Manifest,
    /// Challenge timing as seen by the verifier.
    Freshness,
    /// The evidence envelope.
    Evidence,
}

impl Source {
    pub fn name(self) -> &'static str {
        match self {
            Source::Claim(k) => k.policy_name(),
            Source::Manifest => "manifest",
            Source::Freshness => "freshness",
            Source::Evidence => "evidence",
        }
    }

    pub fn from_name(s: &str) -> Option<Source> {
        match s {
            "manifest" => Some(Source::Manifest),
            "freshness" => Some(Source::Freshness),
            "evidence" => Some(Source::Evidence),
            _ => ClaimKind::from_policy_name(s).map(Source::Claim),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnumType {
    KeyKind,
    CreationOrigin,
    HardwareClass,
}

impl EnumType {
    pub fn variants(self) -> &'static [&'static str] {
        match self {
            EnumType::KeyKind => &["endorsement_key", "device_identity_key", "application_key"],
            EnumType::CreationOrigin => &["generated_onboard", "injected"],
            EnumType::HardwareClass => &["trusted_hardware", "software_only"],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldType {
    Bool,
    Num,
    Digest,
    Str,
    Enum(EnumType),
    DigestSet,
}

impl FieldType {
    pub fn describe(self) -> &'static str {
        match self {
            FieldType::Bool => "bool",
            FieldType::Num => "number",
            FieldType::Digest => "digest",
            FieldType::Str => "string",
            FieldType::Enum(EnumType::KeyKind) => "key kind",
            FieldType::Enum(EnumType::CreationOrigin) => "creation origin",
            FieldType::Enum(EnumType::HardwareClass) => "hardware class",
            FieldType::DigestSet => "digest set",
        }
    }
}

pub fn field_type(source: Source, field: &str) -> Option<FieldType> {
    use FieldType::*;
    let t = match (source, field) {
        (Source::Claim(ClaimKind::KeyType), "migratable") => Bool,
        (Source::Claim(ClaimKind::KeyType), "kind") => Enum(EnumType::KeyKind),
        (Source::Claim(ClaimKind::KeyType), "creation_origin") => Enum(EnumType::CreationOrigin),
        (Source::Claim(ClaimKind::KeyProvenance), "creation_origin") => {
            Enum(EnumType::CreationOrigin)
        }
        (Source::Claim(ClaimKind::KeyProvenance), "chain_length") => Num,
        (Source::Claim(ClaimKind::KeyProvenance), "source_known") => Bool,
        (Source::Claim(ClaimKind::GeoLocation), "lat" | "lon" | "alt") => Num,
        (Source::Claim(ClaimKind::UsageLog), "count" | "last_counter") => Num,
        (Source::Claim(ClaimKind::UsageLog), "chain_valid") => Bool,
        (Source::Claim(ClaimKind::SystemConfig), "config_digest") => Digest,
        (Source::Claim(ClaimKind::SystemConfig), "component_count") => Num,
        (Source::Claim(ClaimKind::SignatureOrigin), "counter") => Num,
        (Source::Claim(ClaimKind::SignatureOrigin), "tx_digest") => Digest,
        (Source::Claim(ClaimKind::Erasure), "counter") => Num,
        (Source::Manifest, "hardware_class") => Enum(EnumType::HardwareClass),
        (Source::Manifest, "approved_configs") => DigestSet,
        (Source::Manifest, "manufacturer") => Str,
        (Source::Freshness, "age") => Num,
        (Source::Evidence, "counter") => Num,
        _ => return None,
    };
    Some(t)
}

/// Every addressable `(source, field)` pair, for diagnostics and generators.
pub fn all_fields() -> Vec<(Source, &'static str)> {
    const CANDIDATES: &[&str] = &[
        "migratable",
        "kind",
        "creation_origin",
        "chain_length",
        "source_known",
        "lat",
        "lon",
        "alt",
        "count",
        "last_counter",
        "chain_valid",
        "config_digest",
        "component_count",
        "counter",
        "tx_digest",
        "hardware_class",
        "approved_configs",
        "manufacturer",
        "age",
    ];
    let mut sources: Vec<Source> = ClaimKind::ALL.iter().map(|k| Source::Claim(*k)).collect();
    sources.extend([Source::Manifest, Source::Freshness, Source::Evidence]);
    let mut out = Vec::new();
    for s in sources {
        for f in CANDIDATES {
            if field_type(s, f).is_some() {
                out.push((s, *f));
            }
        }
    }
    out
}

/// Claim kinds an endorsement carries reference values for.
pub fn endorsable(source: Source) -> bool {
    matches!(
        source,
        Source::Claim(ClaimKind::KeyType) | Source::Claim(ClaimKind::SystemConfig)
    )
}
