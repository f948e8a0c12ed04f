//! Experiment harness for the hidden-hallucination mechanism.
//!
//! [`config`] validates experiment documents, [`experiments`] holds the
//! suites behind each command and [`cli`] wires them to the command line
//! and writes run artifacts (manifest JSON, game-log JSONL, CSV summaries
//! and JSON reports).

pub mod cli;
pub mod config;
pub mod experiments;
