//! Experiment harness for the fastdeepc solver: random instance generation,
//! memory planning, and the drivers behind the `fastdeepc` command line.

pub mod config;
pub mod error;
pub mod experiments;
pub mod instance;
pub mod planning;

pub use config::SolverKind;
pub use error::{BenchError, Result};
