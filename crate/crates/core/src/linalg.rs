//! Small dense helpers shared by the oracles and diagnostics.

use nalgebra::{DMatrix, DVector};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Singular values in descending order.
pub fn singular_values(mat: &DMatrix<f64>) -> Vec<f64> {
    if mat.nrows() == 0 || mat.ncols() == 0 {
        return Vec::new();
    }
    let mut sv: Vec<f64> = mat.clone().svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Rank threshold `max(rows, cols) * eps * sigma_max`.
pub fn rank_tolerance(rows: usize, cols: usize, sigma_max: f64) -> f64 {
    rows.max(cols) as f64 * f64::EPSILON * sigma_max
}

/// Numerical rank with the tolerance of [`rank_tolerance`].
pub fn numerical_rank(mat: &DMatrix<f64>) -> usize {
    let sv = singular_values(mat);
    let Some(&smax) = sv.first() else {
        return 0;
    };
    if smax == 0.0 {
        return 0;
    }
    let tol = rank_tolerance(mat.nrows(), mat.ncols(), smax);
    sv.iter().filter(|&&s| s > tol).count()
}

/// Ratio of the largest to the smallest singular value above the rank tolerance.
pub fn condition_number(mat: &DMatrix<f64>) -> f64 {
    let sv = singular_values(mat);
    let Some(&smax) = sv.first() else {
        return f64::NAN;
    };
    let tol = rank_tolerance(mat.nrows(), mat.ncols(), smax);
    let smin = sv.iter().copied().rfind(|&s| s > tol).unwrap_or(smax);
    smax / smin
}

/// Minimum-norm least-squares solution `pinv(mat) * rhs` with the rank tolerance above,
/// followed by one step of iterative refinement.
pub fn pinv_solve(mat: &DMatrix<f64>, rhs: &DVector<f64>) -> DVector<f64> {
    let svd = mat.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let tol = rank_tolerance(mat.nrows(), mat.ncols(), smax);
    let mut x = svd.solve(rhs, tol).expect("svd computed with both factors");
    let r = rhs - mat * &x;
    let dx = svd.solve(&r, tol).expect("svd computed with both factors");
    x += dx;
    x
}
