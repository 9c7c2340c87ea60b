//! Simulation toolkit for quantum key distribution from private states.
//!
//! The crate covers the full path from states to keys: dense linear algebra
//! ([`qmath`]), the concrete states of the bound-entangled worked example
//! ([`states`]), twisting operators and twisted observables ([`twist`]),
//! Pauli and binding channels ([`channels`]), LOCC parameter estimation
//! ([`estimation`]), finite-size security bounds ([`bounds`]) and end-to-end
//! protocol runs with a toy reconciliation layer ([`protocol`]).

pub mod bounds;
pub mod channels;
pub mod error;
pub mod estimation;
pub mod protocol;
pub mod qmath;
pub mod states;
pub mod twist;

pub use error::{Error, Result};
pub use qmath::{ComplexMatrix, TensorLayout, C64};
pub use states::{DensityState, PauliPattern};
pub use twist::{ProductDecomposition, TwistingOp};
