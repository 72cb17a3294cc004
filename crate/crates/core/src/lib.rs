//! Crosstalk-aware pulse compiler and simulator for pairwise-addressed
//! trapped-ion chains.

pub mod bell;
pub mod chain;
pub mod clifford;
pub mod compiler;
pub mod decompose;
pub mod error;
pub mod fit;
pub mod fock;
pub mod gates;
pub mod ir;
pub mod linalg;
pub mod ms;
pub mod pauli;
pub mod program;
pub mod pulses;
pub mod qpt;
pub mod rb;
pub mod readout;
pub mod sim;
pub mod state;

pub use error::{Error, Result};
pub use linalg::{Unitary, C64};
pub use state::QuantumState;
