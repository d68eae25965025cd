//! Deterministic simulator for long-term collaborative data sharing under
//! exclusivity attacks.
//!
//! The crate runs the continuous and periodic ledger protocols with exact
//! rational arithmetic, provides the aggregation algorithms and attack
//! strategies, and checks vulnerability conditions by paired simulation.

pub mod algorithms;
pub mod harness;
pub mod numerics;
pub mod protocol;
pub mod scenario;
pub mod strategies;
