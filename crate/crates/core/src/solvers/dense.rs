//! Dense reference solutions for verification at desk scale.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_len, Error, Result};
use crate::linalg::pinv_solve;
use crate::lti::{LtiSystem, Setpoint};
use crate::problem::DeepcProblem;
use crate::spectral::dense_hankel;

/// Largest decision dimension the dense oracle accepts.
pub const DENSE_COL_LIMIT: usize = 2000;

fn guard(problem: &DeepcProblem) -> Result<()> {
    let k = problem.col_dim();
    if k > DENSE_COL_LIMIT {
        return Err(Error::TooLarge {
            entries: k * k,
            limit: DENSE_COL_LIMIT * DENSE_COL_LIMIT,
        });
    }
    Ok(())
}

/// `I_L ⊗ diag(Q, R)`.
pub fn stage_weights(problem: &DeepcProblem) -> DMatrix<f64> {
    let (n, m, l) = (problem.n(), problem.m(), problem.horizon());
    let d = n + m;
    let mut w = DMatrix::zeros(d * l, d * l);
    for i in 0..l {
        w.view_mut((i * d, i * d), (n, n)).copy_from(problem.q_weight());
        w.view_mut((i * d + n, i * d + n), (m, m)).copy_from(problem.r_weight());
    }
    w
}

/// Dense Hankel matrix of the combined signal.
pub fn dense_h(problem: &DeepcProblem) -> Result<DMatrix<f64>> {
    guard(problem)?;
    dense_hankel(problem.operator().signal(), problem.horizon())
}

pub fn dense_s(problem: &DeepcProblem) -> Result<DMatrix<f64>> {
    let h = dense_h(problem)?;
    Ok(h.transpose() * stage_weights(problem) * h)
}

pub fn dense_p(problem: &DeepcProblem) -> Result<DMatrix<f64>> {
    guard(problem)?;
    let signal = problem.operator().signal();
    Ok(signal.view((0, 0), (problem.n(), problem.col_dim())).into_owned())
}

/// Solves the KKT system by an SVD pseudo-inverse and returns the
/// minimum-norm primal together with the (unique) multiplier.
pub fn solve_dense_kkt(problem: &DeepcProblem) -> Result<(DVector<f64>, DVector<f64>)> {
    let s = dense_s(problem)?;
    let p = dense_p(problem)?;
    let (k, n) = (problem.col_dim(), problem.n());
    let mut kkt = DMatrix::zeros(k + n, k + n);
    kkt.view_mut((0, 0), (k, k)).copy_from(&s);
    kkt.view_mut((0, k), (k, n)).copy_from(&p.transpose());
    kkt.view_mut((k, 0), (n, k)).copy_from(&p);
    let mut rhs = DVector::zeros(k + n);
    rhs.rows_mut(0, k).copy_from(&(-problem.linear_term()));
    rhs.rows_mut(k, n).copy_from(problem.initial_state());
    if rhs.iter().all(|&v| v == 0.0) {
        return Ok((DVector::zeros(k), DVector::zeros(n)));
    }
    let sol = pinv_solve(&kkt, &rhs);
    let z = sol.rows(0, k).into_owned();
    let lambda = -sol.rows(k, n).into_owned();
    Ok((z, lambda))
}

/// Model-based form of the same control problem, solved directly on the
/// trajectory variables:
///
/// ```text
/// minimize 1/2 sum_k |x_k - x_s|_Q^2 + |u_k - u_s|_R^2
/// s.t.     x_0 = x0,  x_{k+1} = A x_k + B u_k,  k = 0..L-2
/// ```
///
/// Returns the optimal trajectory as a `(n + m) x L` matrix.
pub fn solve_model_ocp(
    system: &LtiSystem,
    horizon: usize,
    q_weight: &DMatrix<f64>,
    r_weight: &DMatrix<f64>,
    x0: &DVector<f64>,
    setpoint: Option<&Setpoint>,
) -> Result<DMatrix<f64>> {
    let (n, m) = (system.n(), system.m());
    check_len("initial state", n, x0.len())?;
    if horizon == 0 {
        return Err(Error::InvalidArgument("horizon must be positive".into()));
    }
    let nx = n * horizon;
    let nv = nx + m * horizon;
    let nc = n * horizon;
    let mut hess = DMatrix::zeros(nv, nv);
    let mut lin = DVector::zeros(nv);
    let zero_sp = Setpoint::zero(n, m);
    let sp = setpoint.unwrap_or(&zero_sp);
    let qx = q_weight * &sp.x_s;
    let ru = r_weight * &sp.u_s;
    for k in 0..horizon {
        hess.view_mut((k * n, k * n), (n, n)).copy_from(q_weight);
        hess.view_mut((nx + k * m, nx + k * m), (m, m)).copy_from(r_weight);
        lin.rows_mut(k * n, n).copy_from(&(-&qx));
        lin.rows_mut(nx + k * m, m).copy_from(&(-&ru));
    }
    let mut eq = DMatrix::zeros(nc, nv);
    let mut eq_rhs = DVector::zeros(nc);
    eq.view_mut((0, 0), (n, n)).fill_with_identity();
    eq_rhs.rows_mut(0, n).copy_from(x0);
    for k in 0..horizon - 1 {
        let row = (k + 1) * n;
        eq.view_mut((row, (k + 1) * n), (n, n)).fill_with_identity();
        eq.view_mut((row, k * n), (n, n)).copy_from(&(-&system.a_matrix));
        eq.view_mut((row, nx + k * m), (n, m)).copy_from(&(-&system.b_matrix));
    }
    let mut kkt = DMatrix::zeros(nv + nc, nv + nc);
    kkt.view_mut((0, 0), (nv, nv)).copy_from(&hess);
    kkt.view_mut((0, nv), (nv, nc)).copy_from(&eq.transpose());
    kkt.view_mut((nv, 0), (nc, nv)).copy_from(&eq);
    let mut rhs = DVector::zeros(nv + nc);
    rhs.rows_mut(0, nv).copy_from(&(-lin));
    rhs.rows_mut(nv, nc).copy_from(&eq_rhs);
    let sol = kkt
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::InvalidArgument("model KKT matrix is singular".into()))?;
    let mut traj = DMatrix::zeros(n + m, horizon);
    for k in 0..horizon {
        traj.view_mut((0, k), (n, 1)).copy_from(&sol.rows(k * n, n));
        traj.view_mut((n, k), (m, 1)).copy_from(&sol.rows(nx + k * m, m));
    }
    Ok(traj)
}
