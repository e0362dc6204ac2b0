//! Simulation, training and controllability analysis of Hamming-weight
//! preserving circuits built from RBS and FBS gates, carried out entirely in
//! the `C(n, k)`-dimensional weight-k subspace.

pub mod ansatz;
pub mod basis;
pub mod circuit;
pub mod compound;
pub mod control;
pub mod design;
pub mod error;
pub mod gradients;
pub mod sim;
pub mod state;
pub mod variance;

pub use basis::{binomial, enumerate_basis, BasisIndexer};
pub use circuit::{Circuit, Gate, GateKind, Graph, SCHEMA};
pub use compound::compound_matrix;
pub use error::{HwError, Result};
pub use sim::{
    apply_circuit, apply_fbs, apply_rbs, circuit_unitary, circuit_unitary_capped, CompiledCircuit,
    PairTable, SubspaceUnitary, DEFAULT_DK_CAP,
};
pub use state::SubspaceState;
