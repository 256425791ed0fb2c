//! Data-length planning and memory arithmetic.

use serde::Serialize;

pub use fastdeepc::min_data_length;
use fastdeepc::next_smooth_length;

/// Bytes per stored scalar.
pub const BYTES_PER_ENTRY: u64 = 8;

/// Least 7-smooth length not shorter than `min_data_length(n, m, L)`.
pub fn plan_signal_length(n: usize, m: usize, horizon: usize) -> usize {
    next_smooth_length(min_data_length(n, m, horizon), 7).expect("7-smooth numbers are unbounded")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct MemoryEstimate {
    /// Dense `S`, `(N - L + 1)^2` entries.
    pub dense_s_bytes: u64,
    /// The data trajectory, `N (n + m)` entries.
    pub trajectory_bytes: u64,
}

impl MemoryEstimate {
    pub fn dense_s_gb(&self) -> f64 {
        self.dense_s_bytes as f64 / 1e9
    }

    pub fn trajectory_mb(&self) -> f64 {
        self.trajectory_bytes as f64 / 1e6
    }
}

pub fn memory_estimate(n: usize, m: usize, horizon: usize, data_len: usize) -> MemoryEstimate {
    let cols = (data_len + 1).saturating_sub(horizon) as u64;
    MemoryEstimate {
        dense_s_bytes: BYTES_PER_ENTRY * cols * cols,
        trajectory_bytes: BYTES_PER_ENTRY * data_len as u64 * (n + m) as u64,
    }
}
