//! Appraisal-policy language: parser, type checker, printer and evaluator.
//!
//! A policy source is a sequence of lines:
//!
//! ```text
//! policy baseline
//! rule chain mandatory: reaches_ek(key_provenance)
//! rule geo advisory: inside(geo_location, [(46, 6), (46, 10), (48, 10), (48, 6)])
//! loa:
//!   feature trusted_hardware: manifest.hardware_class == trusted_hardware
//!   level 2: trusted_hardware
//! ```
//!
//! See `docs/policy-language.md` for the full grammar and field reference.

mod ast;
mod eval;
mod parse;
mod print;
pub mod schema;

#[cfg(test)]
mod tests;

use thiserror::Error;

pub use ast::{
    Atom, CmpOp, Expr, FieldPath, Literal, LoaTable, PolicyProgram, Rule, SetRef, Severity,
};
pub use eval::{
    assign_loa, evaluate, point_in_polygon, EvalInput, FailureReason, Missing, PolicyVerdict,
    RuleFailure,
};
pub use parse::parse_policy;
pub use schema::Source;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PolicyError {
    #[error("{line}:{col}: syntax error: {message}")]
    Syntax {
        line: usize,
        col: usize,
        message: String,
    },
    #[error("{line}:{col}: type error: {message}")]
    Type {
        line: usize,
        col: usize,
        message: String,
    },
    #[error("{line}:{col}: duplicate rule id `{id}` (first defined on line {first_line})")]
    DuplicateRuleId {
        id: String,
        line: usize,
        col: usize,
        first_line: usize,
    },
}

impl PolicyError {
    pub fn line(&self) -> usize {
        match self {
            PolicyError::Syntax { line, .. }
            | PolicyError::Type { line, .. }
            | PolicyError::DuplicateRuleId { line, .. } => *line,
        }
    }

    pub fn col(&self) -> usize {
        match self {
            PolicyError::Syntax { col, .. }
            | PolicyError::Type { col, .. }
            | PolicyError::DuplicateRuleId { col, .. } => *col,
        }
    }
}

/// The consortium baseline policy shipped with the crate.
pub const BASELINE_SOURCE: &str = include_str!("../../policies/baseline.apl");

pub fn baseline() -> PolicyProgram {
    parse_policy(BASELINE_SOURCE).expect("shipped baseline policy parses")
}
