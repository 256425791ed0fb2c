//! Solvers for the data-driven quadratic program and the dense references
//! used to check them.

pub mod al;
pub mod dense;
pub mod lbfgs;
pub mod minres;
pub mod report;

pub use al::{solve_al_gd, solve_al_lbfgs, AlConfig};
pub use dense::{solve_dense_kkt, solve_model_ocp};
pub use lbfgs::{exact_line_search, lbfgs_minimize, two_loop_apply, LbfgsConfig, LbfgsMemory};
pub use minres::solve_minres_kkt;
pub use report::{IterationRecord, OuterRecord, SolveReport, SolveStatus};
