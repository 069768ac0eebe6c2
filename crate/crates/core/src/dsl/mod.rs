//! A small, total expression language for mediation, actuation and
//! request-validation policies.
//!
//! ```text
//! mediation east
//! if property_type == "temp" then
//!   if season == "winter" or season == "autumn" then
//!     clamp(candidate, 18, 22)
//!   else
//!     clamp(candidate, 24, 28)
//! elif property_type == "light" then
//!   clamp(candidate, 100, 255)
//! else
//!   fail("no east rule for this property type")
//! ```
//!
//! Every conditional ends in `else`, there is no recursion, and every
//! failure (division by zero, a missing sensor reading, a type mismatch)
//! is reported as an [`EvalError`] instead of aborting. The normative
//! grammar lives in `docs/policy-dsl.md`.

pub mod ast;
mod eval;
mod lexer;
mod parser;
mod printer;

use thiserror::Error;

pub use ast::{PolicyBody, PolicyKind, PolicyProgram, Pos};
pub use eval::{eval_actuation, eval_mediation, eval_validation, EvalError};
pub use parser::{parse_policy, parse_policy_as};
pub use printer::{print_expr, print_policy};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DslError {
    #[error("syntax error at {pos}: expected {}, found {found}", expected.join(" or "))]
    Syntax {
        pos: Pos,
        expected: Vec<String>,
        found: String,
    },
    #[error("unbound reference `{name}` at {pos} in a {kind} policy")]
    UnboundReference {
        pos: Pos,
        name: String,
        kind: PolicyKind,
    },
    #[error("conditional at {pos} has no `else` branch")]
    NonExhaustive { pos: Pos },
    #[error("program declares a {declared} policy where a {expected} policy is required")]
    KindMismatch {
        declared: PolicyKind,
        expected: PolicyKind,
    },
}

impl DslError {
    pub fn code(&self) -> &'static str {
        match self {
            DslError::Syntax { .. } => "syntax-error",
            DslError::UnboundReference { .. } => "unbound-reference",
            DslError::NonExhaustive { .. } => "non-exhaustive-conditional",
            DslError::KindMismatch { .. } => "kind-mismatch",
        }
    }

    pub fn pos(&self) -> Option<Pos> {
        match self {
            DslError::Syntax { pos, .. }
            | DslError::UnboundReference { pos, .. }
            | DslError::NonExhaustive { pos } => Some(*pos),
            DslError::KindMismatch { .. } => None,
        }
    }
}
