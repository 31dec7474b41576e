//! Exact classical simulation of quantum generative models (QGMs).
//!
//! A QGM is the state |Q⟩ = (M₁⊗…⊗M_m)|G⟩ for a graph state |G⟩ and invertible
//! single-qubit matrices M_i; measuring its visible qubits defines a distribution.
//! The crate covers compilation of factor graphs into QGMs, inference and
//! gradient training, parent Hamiltonians, and a simulated phase-estimation
//! preparation protocol including the history-state construction.

pub mod error;
pub mod tensor;
pub mod model;
pub mod factor_graph;
pub mod compiler;
pub mod inference;
pub mod hamiltonian;
pub mod preparation;
pub mod history;
pub mod cli;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
