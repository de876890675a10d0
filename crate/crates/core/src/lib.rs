//! Simulation and parameter estimation for optically controlled donor spin qubits.

pub mod bath;
pub mod error;
pub mod estimators;
pub mod fit;
pub mod io;
pub mod hamiltonian;
pub mod lattice;
pub mod lindblad;
pub mod ode;
pub mod registry;
pub mod sequences;
pub mod units;

pub use error::{Error, Result};
