//! MINRES on the symmetric indefinite KKT system
//!
//! ```text
//! [ S  P' ] [ z ]   [ -q ]
//! [ P  0  ] [ v ] = [ x0 ]
//! ```
//!
//! with `lam = -v`. The block operator is applied matrix-free.

use std::time::Instant;

use nalgebra::DVector;

use super::report::{IterationRecord, SolveReport, SolveStatus};
use crate::error::{Error, Result};
use crate::linalg::{dot, norm};
use crate::problem::DeepcProblem;

fn kkt_apply(problem: &DeepcProblem, x: &[f64]) -> Vec<f64> {
    let k = problem.col_dim();
    let (z, v) = x.split_at(k);
    let mut out = problem.s_apply(z);
    for (o, p) in out.iter_mut().zip(problem.pt_apply(v)) {
        *o += p;
    }
    out.extend(problem.p_apply(z));
    out
}

/// Unpreconditioned MINRES. `residual_norm` in the records is the recurrence
/// estimate of `|b - K x|`, which equals the KKT residual norm of `(z, -v)`
/// in exact arithmetic. `final_residual` is recomputed from the returned
/// iterate, since the estimate drifts below the true value in long runs.
pub fn solve_minres_kkt(problem: &DeepcProblem, tol: f64, max_iter: usize) -> Result<SolveReport> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    let (k, n) = (problem.col_dim(), problem.n());
    let dim = k + n;
    let mut b: Vec<f64> = problem.linear_term().iter().map(|v| -v).collect();
    b.extend(problem.initial_state().iter());

    let start = Instant::now();
    let mut x = vec![0.0; dim];
    let mut records = Vec::new();
    let beta1 = norm(&b);
    let config = serde_json::json!({ "tol": tol, "max_iter": max_iter });
    records.push(IterationRecord {
        outer_k: 0,
        inner_j: 0,
        residual_norm: beta1,
        grad_norm: beta1,
        alpha: 0.0,
        elapsed_s: 0.0,
    });

    let mut status = SolveStatus::MaxIterations;
    let mut matvecs = 0;
    let mut iterations = 0;
    if beta1 <= tol {
        status = SolveStatus::Converged;
    } else {
        let mut r1 = b.clone();
        let mut r2 = b.clone();
        let mut y = b.clone();
        let mut w = vec![0.0; dim];
        let mut w1 = vec![0.0; dim];
        let mut w2 = vec![0.0; dim];
        let (mut oldb, mut beta) = (0.0_f64, beta1);
        let (mut dbar, mut epsln) = (0.0_f64, 0.0_f64);
        let mut phibar = beta1;
        let (mut cs, mut sn) = (-1.0_f64, 0.0_f64);

        for itn in 1..=max_iter {
            let s = 1.0 / beta;
            let v: Vec<f64> = y.iter().map(|yi| s * yi).collect();
            y = kkt_apply(problem, &v);
            matvecs += 1;
            if itn >= 2 {
                let f = beta / oldb;
                for (yi, ri) in y.iter_mut().zip(&r1) {
                    *yi -= f * ri;
                }
            }
            let alfa = dot(&v, &y);
            let f = alfa / beta;
            for (yi, ri) in y.iter_mut().zip(&r2) {
                *yi -= f * ri;
            }
            std::mem::swap(&mut r1, &mut r2);
            r2.copy_from_slice(&y);
            oldb = beta;
            beta = norm(&y);

            let oldeps = epsln;
            let delta = cs * dbar + sn * alfa;
            let gbar = sn * dbar - cs * alfa;
            epsln = sn * beta;
            dbar = -cs * beta;
            let gamma = gbar.hypot(beta);
            iterations = itn;
            if gamma == 0.0 || !gamma.is_finite() {
                status = SolveStatus::Breakdown;
                break;
            }
            cs = gbar / gamma;
            sn = beta / gamma;
            let phi = cs * phibar;
            phibar *= sn;

            std::mem::swap(&mut w1, &mut w2);
            std::mem::swap(&mut w2, &mut w);
            let denom = 1.0 / gamma;
            for i in 0..dim {
                w[i] = (v[i] - oldeps * w1[i] - delta * w2[i]) * denom;
                x[i] += phi * w[i];
            }
            let rnorm = phibar;
            records.push(IterationRecord {
                outer_k: 0,
                inner_j: itn,
                residual_norm: rnorm,
                grad_norm: rnorm,
                alpha: phi,
                elapsed_s: start.elapsed().as_secs_f64(),
            });
            if rnorm <= tol {
                status = SolveStatus::Converged;
                break;
            }
            if beta == 0.0 {
                // invariant Krylov subspace reached without meeting the tolerance
                status = SolveStatus::Breakdown;
                break;
            }
        }
    }

    let z = DVector::from_column_slice(&x[..k]);
    let lambda = DVector::from_iterator(n, x[k..].iter().map(|v| -v));
    let (_, true_residual) = problem.kkt_residual(&z, &lambda)?;
    Ok(SolveReport {
        method: "minres".to_string(),
        status,
        records,
        outer: Vec::new(),
        total_inner: iterations,
        matvec_count: matvecs,
        elapsed_s: start.elapsed().as_secs_f64(),
        z,
        lambda,
        final_residual: true_residual,
        config,
    })
}
