//! Conditional Gaussian steady states of continuously measured linear
//! quantum systems.
//!
//! The crate derives the drift and measurement matrices from a physical
//! description, solves the steady-state Riccati equation through the stable
//! invariant subspace of its Hamiltonian, certifies detectability and purity,
//! designs couplings that prepare a requested pure state, and simulates the
//! conditional and unconditional moment dynamics.

// `!(x > tol)` is used on purpose so that NaN falls on the rejecting side.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acceptance;
pub mod analysis;
pub mod designer;
pub mod error;
pub mod linalg;
pub mod ode;
pub mod riccati;
pub mod sampling;
pub mod simulator;
pub mod system;

pub use analysis::{steady_state_verdict, Certificate, SteadyStateReport, Witness};
pub use designer::{synthesize, DesignRequest, DesignResult};
pub use error::{Error, Result};
pub use linalg::{CMat, CVec, RMat, RVec};
pub use num_complex::Complex64;
pub use riccati::{solve_are, RiccatiProblem, RiccatiSolution, SolveOptions};
pub use simulator::{ConditionalRun, EnsembleStats, Feedback, SimConfig};
pub use system::{DerivedMatrices, GaussianMoments, SystemSpec};
