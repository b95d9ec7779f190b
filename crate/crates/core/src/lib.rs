//! Numerical laboratory for recurrence on finite von Neumann algebras.
//!
//! Quantum systems live on direct sums of matrix blocks with a weighted
//! normalized trace; classical systems are finite weighted point sets with a
//! self-map, embedded as the commutative special case. On top of both sit
//! correlation sequences, first-recurrence searches, relative-density scans,
//! and a GNS / mean-ergodic engine that certifies recurrence windows.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod algebra;
pub mod classical;
pub mod dynamics;
pub mod error;
pub mod gns;
pub mod matrix;
pub mod random;
pub mod recurrence;
pub mod runner;
pub mod scenario;

pub use error::{Error, Result};
