//! Exact oracle for the hidden-hallucination mechanism on micro instances.
//!
//! [`game`] enumerates the full game measure phase by phase and answers
//! hygiene, distribution-equality and one-step-guarantee queries against it;
//! it also serves as the mechanism-posterior source for fully rational
//! agents. [`counterexamples`] holds non-hygienic mechanisms that the
//! hygiene check must reject.

pub mod counterexamples;
pub mod game;

pub use game::{
    enumerate_game, AuditReport, AuditRow, HygieneKind, HygieneReport, JointTable, Layer, OracleConfig,
    Variant, LEAF_CAP,
};
