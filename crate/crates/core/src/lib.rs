//! Simulation of two continuously monitored qubits.
//!
//! The crate integrates linear stochastic Schrödinger and master equations
//! (diffusive and counting unravelings) for a pair of qubits, solves the
//! averaged master equation, and tracks a priori, a posteriori and mean
//! a posteriori concurrence. Closed-form reference curves for the bundled
//! models live in [`analytics`].
//!
//! Layout:
//! - [`linalg`]: two-qubit complex linear algebra, bases, T-conjugation.
//! - [`entanglement`]: concurrence for pure, X and general mixed states.
//! - [`model`]: monitored-system description, detection operators,
//!   Liouvillian, interaction classification, local coefficients.
//! - [`engine`]: trajectory integration under the reference and physical
//!   measures, master-equation solver, ensembles.
//! - [`analytics`]: concurrence along trajectories and oracle curves.
//! - [`presets`]: the concrete models with their oracle bindings.
//! - [`io`]: model files, matrix literals and CSV output.

pub mod analytics;
pub mod engine;
pub mod entanglement;
mod error;
pub mod io;
pub mod linalg;
pub mod model;
pub mod presets;

pub use error::{Error, Result};
pub use linalg::{DensityOperator, Factor, Ket, Op2, Op4, StateVector, C64};
