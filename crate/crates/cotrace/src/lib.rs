//! Sound concurrent traces for online monitoring.
//!
//! This crate reconstructs partially-ordered traces from the event
//! streams of concurrent programs with a non-blocking vector clock
//! algorithm, decides whether a DFA property can be soundly monitored
//! over such a trace, and monitors it — with a built-in execution
//! simulator and a brute-force happens-before oracle to validate
//! everything at desk scale.
//!
//! The pipeline, end to end:
//!
//! 1. [`sim`] generates (or [`sim::replay`] ingests) an action stream
//!    plus ground-truth ordering;
//! 2. [`engine`] timestamps it into a [`order::ConcurrentTrace`] whose
//!    clock order never invents an ordering the execution did not have;
//! 3. [`order`] compares trace against ground truth: soundness,
//!    faithfulness, and the faithfulness ratio;
//! 4. [`dfa`] holds the property automata and extracts which symbol
//!    pairs the monitor actually needs ordered;
//! 5. [`monitor`] checks that necessary order, gates monitorability, and
//!    runs the automaton over a linearization, warning when the verdict
//!    may be a linearization artifact.

pub mod dfa;
pub mod engine;
pub mod event;
pub mod monitor;
pub mod order;
pub mod sim;
