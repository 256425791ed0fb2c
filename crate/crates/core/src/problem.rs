//! The data-driven optimal control problem
//!
//! ```text
//! minimize  1/2 z' S z + q' z   subject to  P z = x0
//! ```
//!
//! with `S = H' (I_L ⊗ diag(Q, R)) H`, `H = H_L(w)` the Hankel matrix of the
//! combined signal `w_k = (x_k, u_k)` and `P` the state rows of its first
//! block row. None of `S`, `P` or `H` is formed; every product goes through
//! [`SpectralHankelOperator`].

use nalgebra::{DMatrix, DVector};

use crate::error::{check_len, Error, Result};
use crate::linalg::{dot, norm};
use crate::lti::{Setpoint, Trajectory};
use crate::spectral::SpectralHankelOperator;

/// Shortest data length `(m + 1)(L + n) - 1` admitting an input that is
/// persistently exciting of order `L + n`.
pub fn min_data_length(n: usize, m: usize, horizon: usize) -> usize {
    (m + 1) * (horizon + n) - 1
}

/// Multiplier and penalty of one augmented Lagrangian subproblem.
#[derive(Debug, Clone, PartialEq)]
pub struct AlState {
    pub multiplier: DVector<f64>,
    pub penalty: f64,
}

impl AlState {
    pub fn new(multiplier: DVector<f64>, penalty: f64) -> Result<Self> {
        if !(penalty > 0.0) {
            return Err(Error::InvalidArgument(format!("penalty must be positive, got {penalty}")));
        }
        Ok(Self { multiplier, penalty })
    }
}

#[derive(Debug, Clone)]
pub struct DeepcProblem {
    op: SpectralHankelOperator,
    n: usize,
    m: usize,
    horizon: usize,
    q_weight: DMatrix<f64>,
    r_weight: DMatrix<f64>,
    identity_weights: bool,
    initial_state: DVector<f64>,
    linear_term: DVector<f64>,
    setpoint: Option<Setpoint>,
}

fn check_spd(name: &str, mat: &DMatrix<f64>, dim: usize) -> Result<()> {
    if mat.shape() != (dim, dim) {
        return Err(Error::InvalidArgument(format!(
            "{name} must be {dim}x{dim}, got {}x{}",
            mat.nrows(),
            mat.ncols()
        )));
    }
    let asym = (mat - mat.transpose()).amax();
    if asym > 1e-12 * mat.amax().max(1.0) {
        return Err(Error::InvalidArgument(format!("{name} is not symmetric")));
    }
    if mat.clone().cholesky().is_none() {
        return Err(Error::InvalidArgument(format!("{name} is not positive definite")));
    }
    Ok(())
}

impl DeepcProblem {
    /// Builds the problem from a data trajectory. Persistency of excitation of
    /// the inputs is the caller's responsibility; only the length is checked.
    pub fn assemble(
        traj: &Trajectory,
        horizon: usize,
        q_weight: DMatrix<f64>,
        r_weight: DMatrix<f64>,
        initial_state: DVector<f64>,
        setpoint: Option<Setpoint>,
    ) -> Result<Self> {
        let (n, m) = (traj.n(), traj.m());
        if horizon == 0 {
            return Err(Error::InvalidArgument("horizon must be positive".into()));
        }
        let required = min_data_length(n, m, horizon);
        if traj.len() < required {
            return Err(Error::InsufficientData {
                actual: traj.len(),
                required,
                n,
                m,
                horizon,
            });
        }
        check_spd("Q", &q_weight, n)?;
        check_spd("R", &r_weight, m)?;
        check_len("initial state", n, initial_state.len())?;
        if let Some(sp) = &setpoint {
            check_len("setpoint state", n, sp.x_s.len())?;
            check_len("setpoint input", m, sp.u_s.len())?;
        }

        let op = SpectralHankelOperator::new(&traj.combined(), horizon)?;
        let identity_weights = q_weight == DMatrix::identity(n, n) && r_weight == DMatrix::identity(m, m);
        let col_dim = op.col_dim();
        let mut problem = Self {
            op,
            n,
            m,
            horizon,
            q_weight,
            r_weight,
            identity_weights,
            initial_state,
            linear_term: DVector::zeros(col_dim),
            setpoint: None,
        };
        if let Some(sp) = setpoint {
            problem.linear_term = problem.tracking_linear_term(&sp)?;
            problem.setpoint = Some(sp);
        }
        Ok(problem)
    }

    pub fn operator(&self) -> &SpectralHankelOperator {
        &self.op
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Data length `N`.
    pub fn data_len(&self) -> usize {
        self.op.signal_len()
    }

    /// Dimension of the decision variable, `N - L + 1`.
    pub fn col_dim(&self) -> usize {
        self.op.col_dim()
    }

    pub fn q_weight(&self) -> &DMatrix<f64> {
        &self.q_weight
    }

    pub fn r_weight(&self) -> &DMatrix<f64> {
        &self.r_weight
    }

    pub fn initial_state(&self) -> &DVector<f64> {
        &self.initial_state
    }

    pub fn linear_term(&self) -> &DVector<f64> {
        &self.linear_term
    }

    pub fn setpoint(&self) -> Option<&Setpoint> {
        self.setpoint.as_ref()
    }

    /// Same data and weights, different initial state. Reuses the operator.
    pub fn with_initial_state(&self, x0: DVector<f64>) -> Result<Self> {
        check_len("initial state", self.n, x0.len())?;
        let mut out = self.clone();
        out.initial_state = x0;
        Ok(out)
    }

    /// Applies `I_L ⊗ diag(Q, R)` to a Hankel-ordered vector in place.
    fn apply_weights(&self, y: &mut [f64]) {
        if self.identity_weights {
            return;
        }
        let d = self.n + self.m;
        for block in y.chunks_exact_mut(d) {
            let x = DVector::from_column_slice(&block[..self.n]);
            let u = DVector::from_column_slice(&block[self.n..]);
            block[..self.n].copy_from_slice((&self.q_weight * x).as_slice());
            block[self.n..].copy_from_slice((&self.r_weight * u).as_slice());
        }
    }

    pub(crate) fn s_apply(&self, z: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.op.row_dim()];
        self.op.matvec_into(z, &mut y);
        self.apply_weights(&mut y);
        let mut out = vec![0.0; self.op.col_dim()];
        self.op.rmatvec_into(&y, &mut out);
        out
    }

    pub(crate) fn p_apply(&self, z: &[f64]) -> Vec<f64> {
        self.op
            .first_block_row_matvec(z, 0..self.n)
            .expect("length checked by caller")
    }

    pub(crate) fn pt_apply(&self, lam: &[f64]) -> Vec<f64> {
        self.op
            .first_block_row_rmatvec(lam, 0..self.n)
            .expect("length checked by caller")
    }

    /// `S z` as `H' W (H z)`.
    pub fn s_matvec(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        check_len("s_matvec", self.col_dim(), z.len())?;
        Ok(DVector::from_vec(self.s_apply(z.as_slice())))
    }

    /// `P z`, the first data state weighted by `z`: `sum_j x~_j z_j`.
    pub fn p_matvec(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        check_len("p_matvec", self.col_dim(), z.len())?;
        Ok(DVector::from_vec(self.p_apply(z.as_slice())))
    }

    /// `P' lam`.
    pub fn pt_matvec(&self, lam: &DVector<f64>) -> Result<DVector<f64>> {
        check_len("pt_matvec", self.n, lam.len())?;
        Ok(DVector::from_vec(self.pt_apply(lam.as_slice())))
    }

    /// `q = -H' W (w_s, ..., w_s)`; with it the objective equals the tracking
    /// cost `1/2 |H z - w_s|_W^2` up to a constant.
    pub fn tracking_linear_term(&self, sp: &Setpoint) -> Result<DVector<f64>> {
        check_len("setpoint state", self.n, sp.x_s.len())?;
        check_len("setpoint input", self.m, sp.u_s.len())?;
        if sp.is_zero() {
            return Ok(DVector::zeros(self.col_dim()));
        }
        let w_s = sp.stacked();
        let mut target: Vec<f64> = (0..self.horizon).flat_map(|_| w_s.iter().copied()).collect();
        self.apply_weights(&mut target);
        let mut q = vec![0.0; self.col_dim()];
        self.op.rmatvec_into(&target, &mut q);
        q.iter_mut().for_each(|v| *v = -*v);
        Ok(DVector::from_vec(q))
    }

    /// `1/2 z'Sz + q'z + mu/2 |Pz - x0|^2 - lam'(Pz - x0)`.
    pub fn al_value(&self, z: &DVector<f64>, state: &AlState) -> Result<f64> {
        check_len("al_value", self.col_dim(), z.len())?;
        check_len("multiplier", self.n, state.multiplier.len())?;
        let sz = self.s_apply(z.as_slice());
        let mut feas = self.p_apply(z.as_slice());
        for (f, x) in feas.iter_mut().zip(self.initial_state.iter()) {
            *f -= x;
        }
        Ok(0.5 * dot(z.as_slice(), &sz)
            + dot(self.linear_term.as_slice(), z.as_slice())
            + 0.5 * state.penalty * dot(&feas, &feas)
            - dot(state.multiplier.as_slice(), &feas))
    }

    /// `(S + mu P'P) z + q - P'(mu x0 + lam)`.
    pub fn al_gradient(&self, z: &DVector<f64>, state: &AlState) -> Result<DVector<f64>> {
        check_len("al_gradient", self.col_dim(), z.len())?;
        check_len("multiplier", self.n, state.multiplier.len())?;
        Ok(DVector::from_vec(self.al_gradient_raw(
            z.as_slice(),
            state.multiplier.as_slice(),
            state.penalty,
        )))
    }

    pub(crate) fn al_gradient_raw(&self, z: &[f64], lam: &[f64], mu: f64) -> Vec<f64> {
        let mut grad = self.s_apply(z);
        // P'(mu (Pz - x0) - lam) covers both constraint terms with one adjoint
        let pz = self.p_apply(z);
        let weights: Vec<f64> = pz
            .iter()
            .zip(self.initial_state.iter())
            .zip(lam)
            .map(|((p, x), l)| mu * (p - x) - l)
            .collect();
        let pt = self.pt_apply(&weights);
        for ((g, p), q) in grad.iter_mut().zip(&pt).zip(self.linear_term.iter()) {
            *g += p + q;
        }
        grad
    }

    /// `(S + mu P'P) v`.
    pub fn al_hessian_matvec(&self, v: &DVector<f64>, mu: f64) -> Result<DVector<f64>> {
        check_len("al_hessian_matvec", self.col_dim(), v.len())?;
        if !(mu >= 0.0) {
            return Err(Error::InvalidArgument(format!("penalty must be non-negative, got {mu}")));
        }
        Ok(DVector::from_vec(self.al_hessian_raw(v.as_slice(), mu)))
    }

    pub(crate) fn al_hessian_raw(&self, v: &[f64], mu: f64) -> Vec<f64> {
        let mut out = self.s_apply(v);
        if mu != 0.0 {
            let pv: Vec<f64> = self.p_apply(v).into_iter().map(|x| mu * x).collect();
            for (o, p) in out.iter_mut().zip(self.pt_apply(&pv)) {
                *o += p;
            }
        }
        out
    }

    /// Stacked residual `(S z + q - P' lam ; P z - x0)` and its Euclidean norm.
    pub fn kkt_residual(&self, z: &DVector<f64>, lam: &DVector<f64>) -> Result<(DVector<f64>, f64)> {
        check_len("kkt_residual", self.col_dim(), z.len())?;
        check_len("multiplier", self.n, lam.len())?;
        let k = self.col_dim();
        let mut r = DVector::zeros(k + self.n);
        let sz = self.s_apply(z.as_slice());
        let ptl = self.pt_apply(lam.as_slice());
        for i in 0..k {
            r[i] = sz[i] + self.linear_term[i] - ptl[i];
        }
        let pz = self.p_apply(z.as_slice());
        for i in 0..self.n {
            r[k + i] = pz[i] - self.initial_state[i];
        }
        let nrm = norm(r.as_slice());
        Ok((r, nrm))
    }

    /// The length-`L` trajectory `H z` as a `(n + m) x L` matrix (column `k` is `(x_k, u_k)`).
    pub fn trajectory(&self, z: &DVector<f64>) -> Result<DMatrix<f64>> {
        let hz = self.op.matvec(z.as_slice())?;
        Ok(DMatrix::from_vec(self.n + self.m, self.horizon, hz))
    }
}
