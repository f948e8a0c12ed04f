//! Core of the hidden-hallucination exploration laboratory.
//!
//! Tabular episodic MDPs with finite priors, censored ledgers, canonical
//! posteriors, the phase-based principal and the agents facing it. All
//! probability code is generic over [`num::Prob`], so the same routines run
//! in exact rational arithmetic or in `f64`.

pub mod agent;
pub mod analysis;
pub mod error;
pub mod instances;
pub mod json;
pub mod ledger;
pub mod mdp;
pub mod mechanism;
pub mod num;
pub mod prior;
pub mod rng;

pub use error::{HhError, Result};
pub use num::{Prob, Rational};
