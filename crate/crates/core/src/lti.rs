//! Random test plants, simulation and excitation data.
//!
//! Everything here produces the raw material of an experiment: a discrete-time
//! plant `x_{k+1} = A x_k + B u_k`, an input signal rich enough to excite it,
//! and the recorded state/input trajectory.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{check_len, Error, Result};
use crate::linalg;
use crate::spectral::dense_hankel_with_limit;

/// Number of redraws tolerated when the random `A` has zero spectral radius.
const MAX_GENERATION_ATTEMPTS: usize = 32;

/// Guard for the dense persistency-of-excitation check.
const PE_DENSE_LIMIT: usize = 10_000_000;

/// A discrete-time linear time-invariant plant.
#[derive(Debug, Clone, PartialEq)]
pub struct LtiSystem {
    pub a_matrix: DMatrix<f64>,
    pub b_matrix: DMatrix<f64>,
}

impl LtiSystem {
    pub fn new(a_matrix: DMatrix<f64>, b_matrix: DMatrix<f64>) -> Result<Self> {
        if !a_matrix.is_square() {
            return Err(Error::InvalidArgument(format!(
                "A must be square, got {}x{}",
                a_matrix.nrows(),
                a_matrix.ncols()
            )));
        }
        check_len("B rows", a_matrix.nrows(), b_matrix.nrows())?;
        Ok(Self { a_matrix, b_matrix })
    }

    /// State dimension.
    pub fn n(&self) -> usize {
        self.a_matrix.nrows()
    }

    /// Input dimension.
    pub fn m(&self) -> usize {
        self.b_matrix.ncols()
    }

    pub fn spectral_radius(&self) -> f64 {
        spectral_radius(&self.a_matrix)
    }

    /// Kalman matrix `[B, AB, ..., A^{n-1}B]`.
    pub fn controllability_matrix(&self) -> DMatrix<f64> {
        let (n, m) = (self.n(), self.m());
        let mut kalman = DMatrix::zeros(n, n * m);
        let mut block = self.b_matrix.clone();
        for i in 0..n {
            kalman.columns_mut(i * m, m).copy_from(&block);
            block = &self.a_matrix * block;
        }
        kalman
    }

    /// Dense rank test of the Kalman matrix. Only meaningful for small `n`:
    /// powers of a stable `A` underflow the rank tolerance quickly.
    pub fn is_controllable(&self) -> bool {
        linalg::numerical_rank(&self.controllability_matrix()) == self.n()
    }

    pub fn step(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        &self.a_matrix * x + &self.b_matrix * u
    }
}

/// Paired state and input sequences of equal length, stored column-wise.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    states: DMatrix<f64>,
    inputs: DMatrix<f64>,
}

impl Trajectory {
    pub fn new(states: DMatrix<f64>, inputs: DMatrix<f64>) -> Result<Self> {
        check_len("trajectory length", states.ncols(), inputs.ncols())?;
        if states.ncols() == 0 {
            return Err(Error::InvalidArgument("empty trajectory".into()));
        }
        Ok(Self { states, inputs })
    }

    /// `n x N`, column `k` is `x_k`.
    pub fn states(&self) -> &DMatrix<f64> {
        &self.states
    }

    /// `m x N`, column `k` is `u_k`.
    pub fn inputs(&self) -> &DMatrix<f64> {
        &self.inputs
    }

    pub fn len(&self) -> usize {
        self.states.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n(&self) -> usize {
        self.states.nrows()
    }

    pub fn m(&self) -> usize {
        self.inputs.nrows()
    }

    /// The combined signal `w_k = (x_k, u_k)` as a `(n+m) x N` matrix.
    pub fn combined(&self) -> DMatrix<f64> {
        let (n, m) = (self.n(), self.m());
        let mut w = DMatrix::zeros(n + m, self.len());
        w.rows_mut(0, n).copy_from(&self.states);
        w.rows_mut(n, m).copy_from(&self.inputs);
        w
    }

    /// Largest one-step residual `|x_{k+1} - A x_k - B u_k|_inf` relative to
    /// the largest state magnitude.
    pub fn dynamics_residual(&self, system: &LtiSystem) -> f64 {
        let scale = self.states.amax().max(self.inputs.amax()).max(1.0);
        let mut worst = 0.0_f64;
        for k in 0..self.len().saturating_sub(1) {
            let pred = &system.a_matrix * self.states.column(k) + &system.b_matrix * self.inputs.column(k);
            worst = worst.max((self.states.column(k + 1) - pred).amax());
        }
        worst / scale
    }
}

/// An equilibrium `x_s = A x_s + B u_s`.
#[derive(Debug, Clone, PartialEq)]
pub struct Setpoint {
    pub x_s: DVector<f64>,
    pub u_s: DVector<f64>,
}

impl Setpoint {
    pub fn zero(n: usize, m: usize) -> Self {
        Self {
            x_s: DVector::zeros(n),
            u_s: DVector::zeros(m),
        }
    }

    /// Stacked `w_s = (x_s, u_s)`.
    pub fn stacked(&self) -> DVector<f64> {
        let mut w = DVector::zeros(self.x_s.len() + self.u_s.len());
        w.rows_mut(0, self.x_s.len()).copy_from(&self.x_s);
        w.rows_mut(self.x_s.len(), self.u_s.len()).copy_from(&self.u_s);
        w
    }

    pub fn is_zero(&self) -> bool {
        self.x_s.iter().chain(self.u_s.iter()).all(|&v| v == 0.0)
    }
}

pub fn spectral_radius(a: &DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.complex_eigenvalues().iter().map(|l| l.norm()).fold(0.0, f64::max)
}

fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn sparse_normal(rng: &mut ChaCha8Rng, rows: usize, cols: usize, density: f64) -> DMatrix<f64> {
    // column-major draw order keeps the stream layout independent of nalgebra internals
    let mut out = DMatrix::zeros(rows, cols);
    for j in 0..cols {
        for i in 0..rows {
            let value: f64 = rng.sample(StandardNormal);
            let keep = density >= 1.0 || rng.gen::<f64>() < density;
            if keep {
                out[(i, j)] = value;
            }
        }
    }
    out
}

/// Draws a random plant with standard-normal entries, Bernoulli(`density`)
/// sparsity, and `A` rescaled to the requested spectral radius.
pub fn generate_system(
    n: usize,
    m: usize,
    spectral_radius_target: f64,
    density: f64,
    seed: u64,
) -> Result<LtiSystem> {
    if n == 0 || m == 0 {
        return Err(Error::InvalidArgument("n and m must be positive".into()));
    }
    if !(spectral_radius_target > 0.0) || !spectral_radius_target.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "spectral radius must be positive, got {spectral_radius_target}"
        )));
    }
    if !(density > 0.0 && density <= 1.0) {
        return Err(Error::InvalidArgument(format!("density must lie in (0, 1], got {density}")));
    }

    let mut rng = rng_for(seed);
    for _ in 0..MAX_GENERATION_ATTEMPTS {
        let a = sparse_normal(&mut rng, n, n, density);
        let b = sparse_normal(&mut rng, n, m, density);
        let rho = spectral_radius(&a);
        if rho <= 1e-12 * a.amax().max(f64::MIN_POSITIVE) || rho == 0.0 {
            continue;
        }
        let a = a * (spectral_radius_target / rho);
        return LtiSystem::new(a, b);
    }
    Err(Error::DegenerateSystem {
        attempts: MAX_GENERATION_ATTEMPTS,
    })
}

/// Runs the recursion `x_{k+1} = A x_k + B u_k` for `N = inputs.ncols()` steps.
pub fn simulate(system: &LtiSystem, x0: &DVector<f64>, inputs: &DMatrix<f64>) -> Result<Trajectory> {
    check_len("initial state", system.n(), x0.len())?;
    check_len("input width", system.m(), inputs.nrows())?;
    let len = inputs.ncols();
    if len == 0 {
        return Err(Error::InvalidArgument("empty input sequence".into()));
    }
    let mut states = DMatrix::zeros(system.n(), len);
    states.set_column(0, x0);
    for k in 0..len - 1 {
        let next = &system.a_matrix * states.column(k) + &system.b_matrix * inputs.column(k);
        states.set_column(k + 1, &next);
    }
    Trajectory::new(states, inputs.clone())
}

/// I.i.d. standard-normal inputs, `m x length`.
pub fn generate_excitation(m: usize, length: usize, seed: u64) -> Result<DMatrix<f64>> {
    if m == 0 || length == 0 {
        return Err(Error::InvalidArgument("m and length must be positive".into()));
    }
    let mut rng = rng_for(seed);
    Ok(DMatrix::from_fn(m, length, |_, _| rng.sample(StandardNormal)))
}

/// Whether `H_order(inputs)` has numerical row rank `m * order`.
pub fn is_persistently_exciting(inputs: &DMatrix<f64>, order: usize) -> bool {
    let (m, len) = inputs.shape();
    if order == 0 || len < order || m == 0 {
        return false;
    }
    let cols = len - order + 1;
    if cols < m * order {
        return false;
    }
    let Ok(hankel) = dense_hankel_with_limit(inputs, order, PE_DENSE_LIMIT) else {
        return false;
    };
    // rank of the wide Hankel equals the rank of its Gram matrix, but computing
    // on H directly keeps the tolerance rule meaningful
    linalg::numerical_rank(&hankel) == m * order
}

/// Equilibrium `x_s = (I - A)^{-1} B u_s`.
pub fn equilibrium_setpoint(system: &LtiSystem, u_s: &DVector<f64>) -> Result<Setpoint> {
    check_len("setpoint input", system.m(), u_s.len())?;
    let n = system.n();
    let lhs = DMatrix::identity(n, n) - &system.a_matrix;
    let rhs = &system.b_matrix * u_s;
    let lu = lhs.clone().lu();
    let x_s = lu.solve(&rhs).ok_or(Error::SingularEquilibrium)?;
    if !x_s.iter().all(|v| v.is_finite()) {
        return Err(Error::SingularEquilibrium);
    }
    // a near-singular I - A produces a huge but finite solution; reject it
    let residual = (&lhs * &x_s - &rhs).norm();
    if residual > 1e-8 * (1.0 + rhs.norm() + lhs.norm() * x_s.norm()) {
        return Err(Error::SingularEquilibrium);
    }
    Ok(Setpoint {
        x_s,
        u_s: u_s.clone(),
    })
}
