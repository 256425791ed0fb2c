//! Augmented Lagrangian outer loop.
//!
//! Each outer iteration approximately minimizes `L(., lam_k; mu_k)` warm
//! started at the previous iterate, then updates
//! `lam_{k+1} = lam_k - mu_k (P z_k - x0)` and `mu_{k+1} = mu_k + mu_delta`.

use std::time::Instant;

use nalgebra::DVector;
use serde::Serialize;

use super::lbfgs::{minimize_quadratic, Direction, LbfgsConfig, LbfgsMemory};
use super::report::{IterationRecord, OuterRecord, SolveReport, SolveStatus};
use crate::error::{check_len, Error, Result};
use crate::linalg::{dot, norm};
use crate::problem::DeepcProblem;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlConfig {
    pub mu0: f64,
    pub mu_delta: f64,
    /// Gradient tolerance `delta` of every subproblem.
    pub inner_tol: f64,
    /// Stop when the KKT residual norm drops to this value; `None` means
    /// `1e-6 (1 + |x0|)`.
    pub outer_tol: Option<f64>,
    pub max_outer: usize,
    /// Cap on the inner iterations summed over all subproblems.
    pub max_total_inner: Option<usize>,
    #[serde(skip)]
    pub lambda0: Option<DVector<f64>>,
    #[serde(skip)]
    pub z0: Option<DVector<f64>>,
}

impl Default for AlConfig {
    fn default() -> Self {
        Self {
            mu0: 1.0,
            mu_delta: 10.0,
            inner_tol: 1e-7,
            outer_tol: None,
            max_outer: 200,
            max_total_inner: None,
            lambda0: None,
            z0: None,
        }
    }
}

impl AlConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu0 > 0.0) || !(self.mu_delta > 0.0) {
            return Err(Error::InvalidArgument("penalty parameters must be positive".into()));
        }
        if !(self.inner_tol > 0.0) || self.outer_tol.is_some_and(|t| !(t > 0.0)) {
            return Err(Error::InvalidArgument("tolerances must be positive".into()));
        }
        if self.max_outer == 0 {
            return Err(Error::InvalidArgument("max_outer must be at least 1".into()));
        }
        Ok(())
    }

    pub fn resolved_outer_tol(&self, problem: &DeepcProblem) -> f64 {
        self.outer_tol
            .unwrap_or_else(|| 1e-6 * (1.0 + problem.initial_state().norm()))
    }
}

#[derive(Debug, Clone, Copy)]
enum InnerMethod {
    Lbfgs { window: usize, max_inner: usize },
    GradientDescent { max_inner: usize },
}

/// Augmented Lagrangian with L-BFGS subproblem solves.
pub fn solve_al_lbfgs(problem: &DeepcProblem, al: &AlConfig, lb: &LbfgsConfig) -> Result<SolveReport> {
    lb.validate()?;
    // the subproblem tolerance is owned by the outer configuration
    let inner = InnerMethod::Lbfgs {
        window: lb.window,
        max_inner: lb.max_inner,
    };
    let config = serde_json::json!({ "al": al, "lbfgs": lb });
    run(problem, al, inner, "al-lbfgs", config)
}

/// Same outer loop with steepest descent (and exact line search) inside.
pub fn solve_al_gd(problem: &DeepcProblem, al: &AlConfig, max_inner: usize) -> Result<SolveReport> {
    let config = serde_json::json!({ "al": al, "max_inner": max_inner });
    run(problem, al, InnerMethod::GradientDescent { max_inner }, "al-gd", config)
}

fn run(
    problem: &DeepcProblem,
    al: &AlConfig,
    inner: InnerMethod,
    method: &str,
    config: serde_json::Value,
) -> Result<SolveReport> {
    al.validate()?;
    let (n, k_dim) = (problem.n(), problem.col_dim());
    let mut z = match &al.z0 {
        Some(z0) => {
            check_len("z0", k_dim, z0.len())?;
            z0.as_slice().to_vec()
        }
        None => vec![0.0; k_dim],
    };
    let mut lam = match &al.lambda0 {
        Some(l0) => {
            check_len("lambda0", n, l0.len())?;
            l0.as_slice().to_vec()
        }
        None => vec![0.0; n],
    };
    let outer_tol = al.resolved_outer_tol(problem);
    let x0 = problem.initial_state().as_slice();
    let budget = al.max_total_inner.unwrap_or(usize::MAX);

    let start = Instant::now();
    let mut records = Vec::new();
    let mut outer = Vec::new();
    let mut total_inner = 0usize;
    let mut matvecs = 0usize;
    let mut status = SolveStatus::MaxIterations;
    let mut final_residual = f64::INFINITY;

    let feasibility = |z: &[f64]| -> Vec<f64> { problem.p_apply(z).iter().zip(x0).map(|(p, x)| p - x).collect() };

    for k in 0..al.max_outer {
        let mu = al.mu0 + k as f64 * al.mu_delta;
        let remaining = budget.saturating_sub(total_inner);
        let (window, cap, direction) = match inner {
            InnerMethod::Lbfgs { window, max_inner } => (window, max_inner.min(remaining), Direction::QuasiNewton),
            InnerMethod::GradientDescent { max_inner } => (1, max_inner.min(remaining), Direction::SteepestDescent),
        };
        let mut memory = LbfgsMemory::new(window);
        let lam_k = lam.clone();
        let mut grad_evals = 0usize;
        let mut hess_evals = 0usize;
        let (z_next, inner_report) = minimize_quadratic(
            |v| {
                grad_evals += 1;
                problem.al_gradient_raw(v, &lam_k, mu)
            },
            |v| {
                hess_evals += 1;
                problem.al_hessian_raw(v, mu)
            },
            &z,
            al.inner_tol,
            cap,
            direction,
            &mut memory,
            |step| {
                // after the first subproblem the starting point repeats the
                // previous subproblem's last record
                if k > 0 && step.j == 0 {
                    return;
                }
                let feas = feasibility(step.z);
                records.push(IterationRecord {
                    outer_k: k,
                    inner_j: step.j,
                    residual_norm: (step.grad_norm.powi(2) + dot(&feas, &feas)).sqrt(),
                    grad_norm: step.grad_norm,
                    alpha: step.alpha,
                    elapsed_s: start.elapsed().as_secs_f64(),
                });
            },
        );
        matvecs += grad_evals + hess_evals;
        total_inner += inner_report.iterations;
        z = z_next;

        let feas = feasibility(&z);
        for (l, f) in lam.iter_mut().zip(&feas) {
            *l -= mu * f;
        }
        // with lam_{k+1}, S z + q - P' lam_{k+1} is exactly the subproblem gradient
        let stationarity = problem.al_gradient_raw(&z, &lam_k, mu);
        matvecs += 1;
        final_residual = (dot(&stationarity, &stationarity) + dot(&feas, &feas)).sqrt();
        outer.push(OuterRecord {
            k,
            penalty: mu,
            multiplier: lam_k,
            feasibility: feas,
            inner_iterations: inner_report.iterations,
            inner_status: inner_report.status,
            residual_norm: final_residual,
        });

        if final_residual <= outer_tol {
            status = SolveStatus::Converged;
            break;
        }
        if inner_report.status == SolveStatus::DegenerateCurvature {
            status = SolveStatus::DegenerateCurvature;
            break;
        }
        if total_inner >= budget {
            break;
        }
    }
    debug_assert!(norm(&z).is_finite());

    Ok(SolveReport {
        method: method.to_string(),
        status,
        records,
        outer,
        total_inner,
        matvec_count: matvecs,
        elapsed_s: start.elapsed().as_secs_f64(),
        z: DVector::from_vec(z),
        lambda: DVector::from_vec(lam),
        final_residual,
        config,
    })
}
