use std::io::Write;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Converged,
    MaxIterations,
    DegenerateCurvature,
    Breakdown,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Converged => "converged",
            SolveStatus::MaxIterations => "max-iterations",
            SolveStatus::DegenerateCurvature => "degenerate-curvature",
            SolveStatus::Breakdown => "breakdown",
        }
    }
}

/// One row of the iteration log.
///
/// For the augmented Lagrangian solvers `residual_norm` is the KKT residual of
/// `(z_j, lam_k - mu_k (P z_j - x0))`, i.e. of the multiplier the outer loop
/// would produce if it stopped at this inner iterate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub outer_k: usize,
    pub inner_j: usize,
    pub residual_norm: f64,
    pub grad_norm: f64,
    pub alpha: f64,
    pub elapsed_s: f64,
}

/// Per outer iteration of the augmented Lagrangian loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OuterRecord {
    pub k: usize,
    pub penalty: f64,
    /// `lam_k`, the multiplier used by this subproblem.
    pub multiplier: Vec<f64>,
    /// `P z_k - x0` at the subproblem's solution.
    pub feasibility: Vec<f64>,
    pub inner_iterations: usize,
    pub inner_status: SolveStatus,
    /// KKT residual of `(z_k, lam_{k+1})`.
    pub residual_norm: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub method: String,
    pub status: SolveStatus,
    pub records: Vec<IterationRecord>,
    pub outer: Vec<OuterRecord>,
    pub total_inner: usize,
    /// Products with `S` (each is one forward and one transpose Hankel product).
    pub matvec_count: usize,
    pub elapsed_s: f64,
    #[serde(skip)]
    pub z: DVector<f64>,
    #[serde(skip)]
    pub lambda: DVector<f64>,
    pub final_residual: f64,
    pub config: serde_json::Value,
}

#[derive(Serialize)]
struct Summary<'a> {
    method: &'a str,
    status: &'a str,
    total_inner: usize,
    outer_iterations: usize,
    matvec_count: usize,
    elapsed_s: f64,
    mean_s_per_iteration: f64,
    initial_residual: f64,
    final_residual: f64,
    config: &'a serde_json::Value,
}

impl SolveReport {
    pub const CSV_HEADER: [&'static str; 6] = ["outer_k", "inner_j", "residual_norm", "grad_norm", "alpha", "elapsed_s"];

    pub fn initial_residual(&self) -> f64 {
        self.records.first().map_or(self.final_residual, |r| r.residual_norm)
    }

    pub fn converged(&self) -> bool {
        self.status == SolveStatus::Converged
    }

    /// Residual norm after `iteration` iterations summed over all subproblems.
    /// Records are indexed by that global count; past the end the last record
    /// is returned.
    pub fn residual_at(&self, iteration: usize) -> f64 {
        let idx = iteration.min(self.records.len().saturating_sub(1));
        self.records.get(idx).map_or(self.final_residual, |r| r.residual_norm)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(Self::CSV_HEADER)?;
        for r in &self.records {
            wtr.write_record(&[
                r.outer_k.to_string(),
                r.inner_j.to_string(),
                format!("{:.16e}", r.residual_norm),
                format!("{:.16e}", r.grad_norm),
                format!("{:.16e}", r.alpha),
                format!("{:.9}", r.elapsed_s),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn summary_json(&self) -> serde_json::Value {
        let mean = if self.total_inner > 0 {
            self.elapsed_s / self.total_inner as f64
        } else {
            0.0
        };
        serde_json::to_value(Summary {
            method: &self.method,
            status: self.status.as_str(),
            total_inner: self.total_inner,
            outer_iterations: self.outer.len(),
            matvec_count: self.matvec_count,
            elapsed_s: self.elapsed_s,
            mean_s_per_iteration: mean,
            initial_residual: self.initial_residual(),
            final_residual: self.final_residual,
            config: &self.config,
        })
        .expect("summary is plain data")
    }
}
