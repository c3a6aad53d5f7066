//! Simulation and verification of NOON-state preparation in a two-qubit,
//! three-resonator superconducting circuit.
//!
//! The crate is `no_std` with `alloc`. Everything that needs a filesystem or
//! a clock lives in the `noon` command-line crate.

#![no_std]
// `Float` supplies math methods without std; when a dependency links std
// (including through dev-dependencies) they resolve to inherent methods
#![allow(unused_imports)]

extern crate alloc;
#[cfg(feature = "std")]
extern crate std;

pub mod error;
pub mod estimation;
pub mod expm;
pub mod linalg;
pub mod measurement;
pub mod model;
pub mod noise;
pub mod protocol;
pub mod quantum;
pub mod sdp;

pub use error::{Error, Result};
pub use linalg::{CMatrix, RMatrix, C64};
pub use quantum::{FactorLabel, HermitianOperator, HilbertLayout, QuantumState};
