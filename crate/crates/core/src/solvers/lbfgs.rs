//! Quasi-Newton minimization of convex quadratics.
//!
//! The inverse Hessian approximation is never stored: directions come from
//! the two-loop recursion over a bounded window of curvature pairs, and step
//! lengths from the closed-form minimizer along the search direction.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::report::SolveStatus;
use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, norm};

/// Every this many steps the recurrence `g += alpha H p` is replaced by a fresh
/// gradient evaluation.
const GRADIENT_REFRESH: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LbfgsConfig {
    /// Number of stored curvature pairs; `usize::MAX` keeps the full history.
    pub window: usize,
    pub grad_tol: f64,
    pub max_inner: usize,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        Self {
            window: 30,
            grad_tol: 1e-7,
            max_inner: 100_000,
        }
    }
}

impl LbfgsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window == 0 {
            return Err(Error::InvalidArgument("L-BFGS window must be at least 1".into()));
        }
        if !(self.grad_tol > 0.0) {
            return Err(Error::InvalidArgument("gradient tolerance must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvaturePair {
    pub s: Vec<f64>,
    pub y: Vec<f64>,
    /// `1 / (s'y)`
    pub rho: f64,
}

/// Ring buffer of the most recent curvature pairs.
#[derive(Debug, Clone)]
pub struct LbfgsMemory {
    window: usize,
    pairs: VecDeque<CurvaturePair>,
}

impl LbfgsMemory {
    pub fn new(window: usize) -> Self {
        assert!(window >= 1);
        Self {
            window,
            pairs: VecDeque::new(),
        }
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn clear(&mut self) {
        self.pairs.clear();
    }

    /// Oldest first.
    pub fn pairs(&self) -> impl Iterator<Item = &CurvaturePair> {
        self.pairs.iter()
    }

    /// Stores `(s, y)` unless `s'y` is not positive beyond round-off. Returns
    /// whether the pair was kept.
    pub fn push(&mut self, s: Vec<f64>, y: Vec<f64>) -> bool {
        let sy = dot(&s, &y);
        if !(sy > f64::EPSILON * norm(&s) * norm(&y)) {
            return false;
        }
        if self.pairs.len() == self.window {
            self.pairs.pop_front();
        }
        self.pairs.push_back(CurvaturePair { s, y, rho: 1.0 / sy });
        true
    }

    /// Initial scaling `s'y / y'y` of the newest pair, 1 when empty.
    pub fn initial_scaling(&self) -> f64 {
        self.pairs.back().map_or(1.0, |p| 1.0 / (p.rho * dot(&p.y, &p.y)))
    }
}

/// Search direction `-H g` from the two-loop recursion.
pub fn two_loop_apply(memory: &LbfgsMemory, g: &[f64]) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(memory.len());
    for pair in memory.pairs.iter().rev() {
        let a = pair.rho * dot(&pair.s, &q);
        axpy(-a, &pair.y, &mut q);
        alphas.push(a);
    }
    let gamma = memory.initial_scaling();
    q.iter_mut().for_each(|v| *v *= gamma);
    for (pair, a) in memory.pairs.iter().zip(alphas.iter().rev()) {
        let b = pair.rho * dot(&pair.y, &q);
        axpy(a - b, &pair.s, &mut q);
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

#[derive(Debug, Clone)]
pub struct LineStep {
    pub alpha: f64,
    /// The Hessian product along the direction, reused for the gradient update.
    pub hess_p: Vec<f64>,
}

/// Minimizer `alpha = -g'p / p'Hp` of the quadratic along `p`.
pub fn exact_line_search<H>(g: &[f64], p: &[f64], mut hess_matvec: H) -> Result<LineStep>
where
    H: FnMut(&[f64]) -> Vec<f64>,
{
    let slope = dot(g, p);
    let hess_p = hess_matvec(p);
    let curvature = dot(p, &hess_p);
    let tol = 1e-14 * norm(p) * norm(&hess_p);
    if curvature <= tol {
        if slope == 0.0 {
            return Ok(LineStep { alpha: 0.0, hess_p });
        }
        return Err(Error::DegenerateCurvature { curvature, slope });
    }
    Ok(LineStep {
        alpha: -slope / curvature,
        hess_p,
    })
}

/// Per-step information handed to observers.
#[derive(Debug, Clone, Copy)]
pub struct InnerStep<'a> {
    pub j: usize,
    pub z: &'a [f64],
    pub grad: &'a [f64],
    pub grad_norm: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerReport {
    pub iterations: usize,
    pub status: SolveStatus,
    pub grad_norm: f64,
    pub gradient_evals: usize,
    pub hessian_matvecs: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Two-loop recursion over the memory.
    QuasiNewton,
    /// `p = -g`.
    SteepestDescent,
}

/// `lbfgs_minimize` with an externally owned memory, which is left holding the
/// pairs of the run (used to materialize the learned preconditioner).
#[allow(clippy::too_many_arguments)]
pub fn minimize_quadratic<G, H, O>(
    mut gradient: G,
    mut hess_matvec: H,
    z0: &[f64],
    tol: f64,
    max_iter: usize,
    direction: Direction,
    memory: &mut LbfgsMemory,
    mut observer: O,
) -> (Vec<f64>, InnerReport)
where
    G: FnMut(&[f64]) -> Vec<f64>,
    H: FnMut(&[f64]) -> Vec<f64>,
    O: FnMut(InnerStep<'_>),
{
    let mut z = z0.to_vec();
    let mut g = gradient(&z);
    let mut report = InnerReport {
        iterations: 0,
        status: SolveStatus::MaxIterations,
        grad_norm: norm(&g),
        gradient_evals: 1,
        hessian_matvecs: 0,
    };
    observer(InnerStep {
        j: 0,
        z: &z,
        grad: &g,
        grad_norm: report.grad_norm,
        alpha: 0.0,
    });
    // whether g came from the recurrence rather than a fresh evaluation
    let mut stale = false;
    loop {
        if report.grad_norm <= tol {
            if stale {
                g = gradient(&z);
                report.gradient_evals += 1;
                report.grad_norm = norm(&g);
                stale = false;
                continue;
            }
            report.status = SolveStatus::Converged;
            break;
        }
        if report.iterations >= max_iter {
            break;
        }

        let mut p = match direction {
            Direction::QuasiNewton => two_loop_apply(memory, &g),
            Direction::SteepestDescent => g.iter().map(|v| -v).collect(),
        };
        if direction == Direction::QuasiNewton && dot(&g, &p) >= 0.0 {
            // round-off destroyed the positive definiteness of the implicit H
            memory.clear();
            p = g.iter().map(|v| -v).collect();
        }

        let step = match exact_line_search(&g, &p, &mut hess_matvec) {
            Ok(step) => step,
            Err(_) => {
                report.hessian_matvecs += 1;
                report.status = SolveStatus::DegenerateCurvature;
                break;
            }
        };
        report.hessian_matvecs += 1;
        if step.alpha == 0.0 {
            report.status = SolveStatus::DegenerateCurvature;
            break;
        }

        let s: Vec<f64> = p.iter().map(|v| step.alpha * v).collect();
        let y: Vec<f64> = step.hess_p.iter().map(|v| step.alpha * v).collect();
        axpy(1.0, &s, &mut z);
        report.iterations += 1;
        if report.iterations.is_multiple_of(GRADIENT_REFRESH) {
            g = gradient(&z);
            report.gradient_evals += 1;
            stale = false;
        } else {
            axpy(1.0, &y, &mut g);
            stale = true;
        }
        report.grad_norm = norm(&g);
        if direction == Direction::QuasiNewton {
            memory.push(s, y);
        }
        observer(InnerStep {
            j: report.iterations,
            z: &z,
            grad: &g,
            grad_norm: report.grad_norm,
            alpha: step.alpha,
        });
    }
    (z, report)
}

/// Minimizes a convex quadratic given its gradient and Hessian-vector oracles.
pub fn lbfgs_minimize<G, H>(gradient: G, hess_matvec: H, z0: &[f64], config: &LbfgsConfig) -> Result<(Vec<f64>, InnerReport)>
where
    G: FnMut(&[f64]) -> Vec<f64>,
    H: FnMut(&[f64]) -> Vec<f64>,
{
    config.validate()?;
    let mut memory = LbfgsMemory::new(config.window);
    let (z, report) = minimize_quadratic(
        gradient,
        hess_matvec,
        z0,
        config.grad_tol,
        config.max_inner,
        Direction::QuasiNewton,
        &mut memory,
        |_| {},
    );
    if report.status == SolveStatus::DegenerateCurvature {
        return Err(Error::DegenerateCurvature {
            curvature: 0.0,
            slope: report.grad_norm,
        });
    }
    Ok((z, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    fn quad<'a>(h: &'a DMatrix<f64>, b: &'a DVector<f64>) -> (impl Fn(&[f64]) -> Vec<f64> + 'a, impl Fn(&[f64]) -> Vec<f64> + 'a) {
        let grad = move |z: &[f64]| (h * DVector::from_column_slice(z) - b).as_slice().to_vec();
        let hess = move |v: &[f64]| (h * DVector::from_column_slice(v)).as_slice().to_vec();
        (grad, hess)
    }

    #[test]
    fn identity_hessian_converges_in_one_step() {
        let h = DMatrix::identity(4, 4);
        let b = DVector::zeros(4);
        let (grad, hess) = quad(&h, &b);
        let (z, report) = lbfgs_minimize(grad, hess, &[1.0, -2.0, 3.0, 0.5], &LbfgsConfig::default()).unwrap();
        assert_eq!(report.iterations, 1);
        assert!(norm(&z) < 1e-15);
    }

    #[test]
    fn diagonal_quadratic_terminates_within_dimension() {
        let h = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 3.0, 10.0, 30.0, 100.0]));
        let b = DVector::from_vec(vec![1.0, -1.0, 2.0, 0.5, 3.0]);
        let (grad, hess) = quad(&h, &b);
        let cfg = LbfgsConfig {
            window: 5,
            grad_tol: 1e-10,
            max_inner: 100,
        };
        let (z, report) = lbfgs_minimize(grad, hess, &[0.0; 5], &cfg).unwrap();
        assert!(report.iterations <= 6, "{report:?}");
        let exact = h.clone().lu().solve(&b).unwrap();
        assert!((DVector::from_vec(z) - exact).norm() < 1e-10);
    }

    #[test]
    fn line_search_closed_forms() {
        let g = [1.0, -2.0];
        let p = [-1.0, 2.0];
        let step = exact_line_search(&g, &p, |v| v.to_vec()).unwrap();
        assert!((step.alpha - 1.0).abs() < 1e-15);
        // f = a z^2 / 2 at z = 3
        let a = 4.0;
        let g = [a * 3.0];
        let step = exact_line_search(&g, &[-g[0]], |v| vec![a * v[0]]).unwrap();
        assert!((step.alpha - 1.0 / a).abs() < 1e-15);
    }

    #[test]
    fn line_search_flags_flat_descent_direction() {
        let err = exact_line_search(&[1.0, 0.0], &[-1.0, 0.0], |_| vec![0.0, 0.0]).unwrap_err();
        assert!(matches!(err, Error::DegenerateCurvature { .. }));
        let step = exact_line_search(&[0.0, 0.0], &[-1.0, 0.0], |_| vec![0.0, 0.0]).unwrap();
        assert_eq!(step.alpha, 0.0);
    }

    #[test]
    fn empty_memory_returns_negative_gradient() {
        let mem = LbfgsMemory::new(3);
        assert_eq!(two_loop_apply(&mem, &[1.0, -2.0]), vec![-1.0, 2.0]);
    }

    #[test]
    fn memory_rejects_nonpositive_curvature_and_respects_window() {
        let mut mem = LbfgsMemory::new(2);
        assert!(!mem.push(vec![1.0, 0.0], vec![-1.0, 0.0]));
        assert!(!mem.push(vec![1.0, 0.0], vec![0.0, 1.0]));
        assert!(mem.push(vec![1.0, 0.0], vec![1.0, 0.0]));
        assert!(mem.push(vec![0.0, 1.0], vec![0.0, 2.0]));
        assert!(mem.push(vec![1.0, 1.0], vec![1.0, 3.0]));
        assert_eq!(mem.len(), 2);
        assert_eq!(mem.pairs().next().unwrap().s, vec![0.0, 1.0]);
    }

    #[test]
    fn single_pair_matches_hand_computed_update() {
        // s = (1, 0), y = (2, 1): rho = 1/2, gamma = s'y / y'y = 2/5,
        // H = (I - rho s y') gamma I (I - rho y s') + rho s s'
        let mut mem = LbfgsMemory::new(1);
        assert!(mem.push(vec![1.0, 0.0], vec![2.0, 1.0]));
        // V = I - rho y s' = [[0, 0], [-0.5, 1]], V'V = [[0.25, -0.5], [-0.5, 1]]
        // H = 0.4 V'V + 0.5 e1 e1' = [[0.6, -0.2], [-0.2, 0.4]], H y = s
        let d = two_loop_apply(&mem, &[2.0, -4.0]);
        assert!((d[0] + 2.0).abs() < 1e-15 && (d[1] - 2.0).abs() < 1e-15, "{d:?}");
    }
}
