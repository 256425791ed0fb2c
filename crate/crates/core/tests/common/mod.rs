#![allow(dead_code)]

use fastdeepc::lti::{equilibrium_setpoint, generate_excitation, generate_system, simulate};
use fastdeepc::{min_data_length, DeepcProblem, LtiSystem, Setpoint, Trajectory};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub struct Instance {
    pub system: LtiSystem,
    pub data: Trajectory,
    pub problem: DeepcProblem,
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal_vec(rng: &mut ChaCha8Rng, len: usize) -> DVector<f64> {
    DVector::from_fn(len, |_, _| rng.sample(StandardNormal))
}

pub fn normal_mat(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// `M M' + I`, well conditioned and symmetric positive definite.
pub fn random_spd(rng: &mut ChaCha8Rng, dim: usize) -> DMatrix<f64> {
    let m = normal_mat(rng, dim, dim) * (0.5 / (dim as f64).sqrt());
    &m * m.transpose() + DMatrix::identity(dim, dim)
}

/// Data from the first controllable plant drawn from `seed, seed + 1000, ...`;
/// an uncontrollable plant makes `P z = x0` infeasible for generic `x0`.
pub fn data(n: usize, m: usize, horizon: usize, seed: u64) -> (LtiSystem, Trajectory) {
    let system = (0..50)
        .map(|i| generate_system(n, m, 0.9, 0.5, seed + 1000 * i).expect("system"))
        .find(|s| s.is_controllable())
        .expect("no controllable plant");
    let len = min_data_length(n, m, horizon) + (seed as usize % 3);
    let inputs = generate_excitation(m, len, seed.wrapping_add(7919)).expect("inputs");
    let data = simulate(&system, &DVector::zeros(n), &inputs).expect("simulate");
    (system, data)
}

/// Random regulation or tracking instance with optional random weights.
pub fn instance(n: usize, m: usize, horizon: usize, seed: u64, tracking: bool, weighted: bool) -> Instance {
    let (system, data) = data(n, m, horizon, seed);
    let mut r = rng(seed ^ 0x5eed);
    let (q, rw) = if weighted {
        (random_spd(&mut r, n), random_spd(&mut r, m))
    } else {
        (DMatrix::identity(n, n), DMatrix::identity(m, m))
    };
    let x0 = normal_vec(&mut r, n);
    let setpoint: Option<Setpoint> = tracking.then(|| {
        let u_s = normal_vec(&mut r, m) * 0.5;
        equilibrium_setpoint(&system, &u_s).expect("setpoint")
    });
    let problem = DeepcProblem::assemble(&data, horizon, q, rw, x0, setpoint).expect("assemble");
    Instance { system, data, problem }
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    diff / scale.max(f64::MIN_POSITIVE)
}

/// Dense Hankel matrix built entry by entry from its definition.
pub fn hankel_by_definition(signal: &DMatrix<f64>, depth: usize) -> DMatrix<f64> {
    let (d, len) = signal.shape();
    let cols = len - depth + 1;
    DMatrix::from_fn(d * depth, cols, |row, col| signal[(row % d, row / d + col)])
}
