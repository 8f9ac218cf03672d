//! Fault-attack hardening for conditional branches.
//!
//! A conditional branch is a single point of failure: one flipped bit in an
//! operand, in the comparison result, or in the branch unit itself silently
//! redirects control flow. This crate hardens branches end to end by
//! combining three mechanisms and a toolchain to apply and evaluate them:
//!
//! - [`ancode`]: AN arithmetic error-detecting codes: data lives as
//!   multiples of a constant `A`, addition/subtraction stay closed, and any
//!   corruption below the code distance breaks the congruence.
//! - [`enccmp`]: encoded comparisons that never collapse to a 1-bit flag:
//!   every predicate evaluates to one of two 32-bit condition symbols a
//!   large Hamming distance apart.
//! - [`cfi`]: a running control-flow signature updated per instruction,
//!   with per-edge corrections; the condition symbol is merged into the
//!   signature so a wrong branch direction corrupts the signature itself.
//! - [`mir`]: a small register-machine IR with a parser, printer,
//!   validator, deterministic interpreter, fault-injection hooks, and an
//!   abstract cost model.
//! - [`instrument`]: the pass pipeline: select/switch lowering, AN coding
//!   of comparison slices, CFI instrumentation, and a branch-duplication
//!   baseline for comparison.
//! - [`faultsim`]: fault models, exhaustive and Monte-Carlo campaigns over
//!   whole programs and over standalone comparison traces, and outcome
//!   classification (detected / masked / silent data corruption).
//!
//! Everything is deterministic: campaigns are seeded and produce identical
//! results regardless of worker count.

pub mod ancode;
pub mod cfi;
pub mod container;
pub mod enccmp;
pub mod faultsim;
pub mod instrument;
pub mod mir;
pub mod rng;

pub use ancode::{AnParams, AnWord};
pub use enccmp::{ConditionSymbol, Predicate};
