//! Wallet attestation for networks of virtual asset service providers.
//!
//! Emulated trusted-hardware wallets ([`hwemu`]) produce signed evidence
//! ([`claims`]); verifier services ([`verifier`]) appraise it under an
//! appraisal-policy language ([`policy`]); VASP relying parties ([`vasp`])
//! gate onboarding, transfers, recovery and offboarding on the results. The
//! [`netsim`] module runs all roles in a deterministic simulated network.

pub mod claims;
pub mod crypto;
pub mod fixtures;
pub mod hwemu;
pub mod ledger;
pub mod netsim;
pub mod policy;
pub mod vasp;
pub mod vectors;
pub mod verifier;
pub mod wire;
