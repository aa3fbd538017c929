//! Simulation and exact verification of teleportation-based gate constructions.
//!
//! The crate is organised bottom-up:
//!
//! * [`pauli`]: phased, bit-packed Pauli strings (the Pauli group and error propagation).
//! * [`clifford`]: Clifford conjugation maps, dense gate unitaries, the named gate
//!   library, and Clifford-hierarchy classification.
//! * [`statevector`]: dense state vectors, Bell/computational measurement with exact
//!   branch enumeration, and a small circuit IR with classical control.
//! * [`teleport`]: resource states, teleportation through gates, correction tables and
//!   ancilla preparation by stabilizer measurement.
//! * [`ftmeasure`]: operator measurement with cat-state control, trial majority voting,
//!   nested inner/outer measurement, and single-fault sweeps.
//!
//! Qubit ordering is fixed throughout: qubit `q` is bit `q` of an amplitude index, so
//! qubit 0 is the least significant bit. Ket strings and Pauli strings are written with
//! qubit 0 leftmost.

pub mod clifford;
pub mod error;
pub mod ftmeasure;
pub mod linalg;
pub mod pauli;
pub mod statevector;
pub mod teleport;

pub use clifford::{CliffordMap, GateUnitary, HierarchyLevel};
pub use error::{Error, Result};
pub use pauli::{Pauli, PauliString};
pub use statevector::{Branch, BranchSet, Circuit, StateVector};
