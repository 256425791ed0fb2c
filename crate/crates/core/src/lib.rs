//! Matrix-free data-enabled predictive control.
//!
//! A recorded state/input trajectory of a linear plant spans, through its
//! block Hankel matrix, every trajectory of length `L`. Optimal control then
//! becomes an equality-constrained quadratic program in the Hankel column
//! weights `z`. This crate applies the Hankel matrix via FFTs
//! ([`spectral`]), assembles the program without forming it ([`problem`]),
//! and solves it with an augmented Lagrangian method whose subproblems are
//! handled by L-BFGS ([`solvers`]).

pub mod dft;
pub mod error;
pub mod io;
pub mod linalg;
pub mod lti;
pub mod problem;
pub mod solvers;
pub mod spectral;

pub use error::{Error, Result};
pub use lti::{LtiSystem, Setpoint, Trajectory};
pub use problem::{min_data_length, AlState, DeepcProblem};
pub use spectral::{dense_hankel, next_smooth_length, SpectralHankelOperator};
