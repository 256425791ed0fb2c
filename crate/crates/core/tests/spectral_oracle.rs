mod common;

use common::{hankel_by_definition, normal_mat, normal_vec, rel_err, rng};
use fastdeepc::solvers::dense::{dense_p, dense_s};
use fastdeepc::{min_data_length, next_smooth_length, DeepcProblem, SpectralHankelOperator, Trajectory};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn check_operator(signal: &DMatrix<f64>, depth: usize, seed: u64) {
    let op = SpectralHankelOperator::new(signal, depth).unwrap();
    let dense = hankel_by_definition(signal, depth);
    let mut r = rng(seed);
    let z = normal_vec(&mut r, op.col_dim());
    let y = normal_vec(&mut r, op.row_dim());
    let hz = op.matvec(z.as_slice()).unwrap();
    let hty = op.rmatvec(y.as_slice()).unwrap();
    let err_fwd = rel_err(&hz, (&dense * &z).as_slice());
    let err_adj = rel_err(&hty, (dense.transpose() * &y).as_slice());
    assert!(err_fwd <= 1e-9, "forward error {err_fwd:e} at depth {depth}");
    assert!(err_adj <= 1e-9, "adjoint error {err_adj:e} at depth {depth}");
}

#[test]
fn random_signals_all_depths_match_definition() {
    let mut r = rng(11);
    for case in 0..200u64 {
        let d = 1 + (case as usize % 4);
        let len = 1 + (case as usize * 37 % 64);
        let signal = normal_mat(&mut r, d, len);
        for depth in 1..=len {
            check_operator(&signal, depth, case * 1000 + depth as u64);
        }
    }
}

#[test]
fn weighted_problem_products_match_dense_assembly() {
    let mut r = rng(12);
    for case in 0..40u64 {
        let n = 1 + (case as usize % 3);
        let m = 1 + (case as usize / 3 % 2);
        let horizon = 1 + (case as usize % 4);
        let len = min_data_length(n, m, horizon) + (case as usize % 5);
        if len > 64 {
            continue;
        }
        let states = normal_mat(&mut r, n, len);
        let inputs = normal_mat(&mut r, m, len);
        let traj = Trajectory::new(states.clone(), inputs.clone()).unwrap();
        let q = common::random_spd(&mut r, n);
        let rw = common::random_spd(&mut r, m);
        let p = DeepcProblem::assemble(&traj, horizon, q.clone(), rw.clone(), DVector::zeros(n), None).unwrap();

        // S from the separate state and input Hankel matrices
        let hx = hankel_by_definition(&states, horizon);
        let hu = hankel_by_definition(&inputs, horizon);
        let qb = DMatrix::from_fn(n * horizon, n * horizon, |i, j| if i / n == j / n { q[(i % n, j % n)] } else { 0.0 });
        let rb = DMatrix::from_fn(m * horizon, m * horizon, |i, j| if i / m == j / m { rw[(i % m, j % m)] } else { 0.0 });
        let s_ref = hx.transpose() * qb * &hx + hu.transpose() * rb * &hu;
        let p_ref = states.columns(0, len - horizon + 1).into_owned();

        assert!((dense_s(&p).unwrap() - &s_ref).norm() <= 1e-9 * s_ref.norm());
        assert!((dense_p(&p).unwrap() - &p_ref).norm() <= 1e-12 * p_ref.norm());

        let z = normal_vec(&mut r, p.col_dim());
        let lam = normal_vec(&mut r, n);
        assert!(rel_err(p.s_matvec(&z).unwrap().as_slice(), (&s_ref * &z).as_slice()) <= 1e-9);
        assert!(rel_err(p.p_matvec(&z).unwrap().as_slice(), (&p_ref * &z).as_slice()) <= 1e-9);
        assert!(rel_err(p.pt_matvec(&lam).unwrap().as_slice(), (p_ref.transpose() * &lam).as_slice()) <= 1e-9);
    }
}

#[test]
fn smooth_lengths_by_exhaustive_search() {
    fn smooth(mut v: usize) -> bool {
        for p in [2, 3, 5, 7] {
            while v.is_multiple_of(p) {
                v /= p;
            }
        }
        v == 1
    }
    for min in 1..3000 {
        let expected = (min..).find(|&v| smooth(v)).unwrap();
        assert_eq!(next_smooth_length(min, 7).unwrap(), expected, "minimum {min}");
    }
    assert_eq!(next_smooth_length(7649, 7).unwrap(), 7680);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn adjoint_identity(d in 1usize..5, len in 1usize..48, depth_frac in 0.0f64..1.0, seed in any::<u64>()) {
        let depth = 1 + ((len - 1) as f64 * depth_frac) as usize;
        let mut r = rng(seed);
        let signal = normal_mat(&mut r, d, len);
        let op = SpectralHankelOperator::new(&signal, depth).unwrap();
        let z = normal_vec(&mut r, op.col_dim());
        let y = normal_vec(&mut r, op.row_dim());
        let lhs: f64 = op.matvec(z.as_slice()).unwrap().iter().zip(y.iter()).map(|(a, b)| a * b).sum();
        let rhs: f64 = op.rmatvec(y.as_slice()).unwrap().iter().zip(z.iter()).map(|(a, b)| a * b).sum();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + z.norm() * y.norm() * signal.norm()));
    }

    #[test]
    fn complex_route_is_real_and_agrees(d in 1usize..4, len in 2usize..40, seed in any::<u64>()) {
        let depth = 1 + len / 3;
        let mut r = rng(seed);
        let signal = normal_mat(&mut r, d, len);
        let op = SpectralHankelOperator::new(&signal, depth).unwrap();
        let z = normal_vec(&mut r, op.col_dim());
        let (hz, imag) = op.matvec_complex(z.as_slice()).unwrap();
        let scale = 1.0 + signal.norm() * z.norm();
        prop_assert!(imag <= 1e-11 * scale);
        prop_assert!(rel_err(&hz, &op.matvec(z.as_slice()).unwrap()) <= 1e-10);
    }

    #[test]
    fn matvec_is_linear(len in 4usize..40, seed in any::<u64>(), a in -3.0f64..3.0) {
        let mut r = rng(seed);
        let signal = normal_mat(&mut r, 2, len);
        let op = SpectralHankelOperator::new(&signal, len / 2).unwrap();
        let z1 = normal_vec(&mut r, op.col_dim());
        let z2 = normal_vec(&mut r, op.col_dim());
        let combo = &z1 * a + &z2;
        let lhs = op.matvec(combo.as_slice()).unwrap();
        let h1 = DVector::from_vec(op.matvec(z1.as_slice()).unwrap());
        let h2 = DVector::from_vec(op.matvec(z2.as_slice()).unwrap());
        let rhs = h1 * a + h2;
        prop_assert!(rel_err(&lhs, rhs.as_slice()) <= 1e-10 || rhs.norm() < 1e-12);
    }
}
