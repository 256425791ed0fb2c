mod common;

use common::rel_err;
use fastdeepc::solvers::{
    solve_al_gd, solve_al_lbfgs, solve_dense_kkt, solve_minres_kkt, solve_model_ocp, AlConfig, LbfgsConfig, SolveStatus,
};
use fastdeepc::{AlState, DeepcProblem};
use nalgebra::DVector;

fn trajectory_error(p: &DeepcProblem, z: &DVector<f64>, reference: &nalgebra::DMatrix<f64>) -> f64 {
    rel_err(p.trajectory(z).unwrap().as_slice(), reference.as_slice())
}

#[test]
fn dense_oracle_satisfies_kkt_and_matches_model_form() {
    for seed in 0..12u64 {
        let (n, m, horizon) = (1 + seed as usize % 4, 1 + seed as usize % 2, 2 + seed as usize % 5);
        let inst = common::instance(n, m, horizon, seed, seed % 2 == 0, seed % 3 == 0);
        if !inst.system.is_controllable() {
            continue;
        }
        let p = &inst.problem;
        let (z, lam) = solve_dense_kkt(p).unwrap();
        let (_, res) = p.kkt_residual(&z, &lam).unwrap();
        let scale = 1.0 + p.initial_state().norm() + p.linear_term().norm();
        assert!(res <= 1e-9 * scale, "seed {seed}: dense KKT residual {res:e}");
        let model = solve_model_ocp(&inst.system, horizon, p.q_weight(), p.r_weight(), p.initial_state(), p.setpoint()).unwrap();
        let err = trajectory_error(p, &z, &model);
        assert!(err <= 1e-8, "seed {seed}: trajectory mismatch {err:e}");
    }
}

#[test]
fn trivially_feasible_problem_stops_at_origin() {
    let inst = common::instance(3, 1, 4, 1, false, false);
    let p = inst.problem.with_initial_state(DVector::zeros(3)).unwrap();
    for report in [
        solve_al_lbfgs(&p, &AlConfig::default(), &LbfgsConfig::default()).unwrap(),
        solve_al_gd(&p, &AlConfig::default(), 1000).unwrap(),
    ] {
        assert_eq!(report.status, SolveStatus::Converged);
        assert_eq!(report.outer.len(), 1);
        assert!(report.z.iter().all(|&v| v == 0.0));
        assert!(report.lambda.iter().all(|&v| v == 0.0));
    }
    let mr = solve_minres_kkt(&p, 1e-10, 100).unwrap();
    assert_eq!(mr.total_inner, 0);
    assert_eq!(mr.status, SolveStatus::Converged);
    let (z, lam) = solve_dense_kkt(&p).unwrap();
    assert!(z.iter().chain(lam.iter()).all(|&v| v == 0.0));
}

#[test]
fn tiny_instance_matches_dense_oracle() {
    let inst = common::instance(3, 1, 4, 2, true, false);
    let p = &inst.problem;
    let al = AlConfig::default();
    let report = solve_al_lbfgs(p, &al, &LbfgsConfig::default()).unwrap();
    assert_eq!(report.status, SolveStatus::Converged);
    assert!(report.final_residual <= 1e-6 * (1.0 + p.initial_state().norm()));
    let (_, direct) = p.kkt_residual(&report.z, &report.lambda).unwrap();
    assert!((direct - report.final_residual).abs() <= 1e-9 * (1.0 + direct));
    let (z, _) = solve_dense_kkt(p).unwrap();
    let reference = p.trajectory(&z).unwrap();
    assert!(trajectory_error(p, &report.z, &reference) <= 1e-5);
}

#[test]
fn outer_loop_invariants() {
    for seed in 0..6u64 {
        let inst = common::instance(2 + seed as usize % 3, 1 + seed as usize % 2, 3 + seed as usize % 3, seed + 20, true, seed % 2 == 1);
        let p = &inst.problem;
        let al = AlConfig {
            mu0: 0.5,
            mu_delta: 3.0,
            ..AlConfig::default()
        };
        let report = solve_al_lbfgs(p, &al, &LbfgsConfig::default()).unwrap();
        assert_eq!(report.status, SolveStatus::Converged, "seed {seed}");
        let x0 = p.initial_state();
        let mut prev_feas = f64::INFINITY;
        for (k, rec) in report.outer.iter().enumerate() {
            assert_eq!(rec.penalty, 0.5 + k as f64 * 3.0);
            let next = report.outer.get(k + 1).map_or(report.lambda.as_slice(), |r| r.multiplier.as_slice());
            let expected: Vec<f64> = rec.multiplier.iter().zip(&rec.feasibility).map(|(l, f)| l - rec.penalty * f).collect();
            assert_eq!(next, expected.as_slice(), "multiplier update at outer step {k}");
            let feas = DVector::from_column_slice(&rec.feasibility).norm();
            assert!(feas <= prev_feas * (1.0 + 1e-9), "seed {seed}: feasibility grew at outer step {k}");
            prev_feas = feas;
        }
        let zk = &report.z;
        let pz = p.p_matvec(zk).unwrap() - x0;
        assert!((pz.norm() - prev_feas).abs() <= 1e-12 * (1.0 + prev_feas));
    }
}

#[test]
fn inner_descent_is_monotone() {
    let inst = common::instance(3, 2, 4, 33, true, true);
    let p = &inst.problem;
    let state = AlState::new(DVector::from_element(3, 0.3), 4.0).unwrap();
    let mut values = Vec::new();
    let mut z = DVector::zeros(p.col_dim());
    for budget in 1..40 {
        let (z_next, _) = fastdeepc::solvers::lbfgs_minimize(
            |v| p.al_gradient(&DVector::from_column_slice(v), &state).unwrap().as_slice().to_vec(),
            |v| p.al_hessian_matvec(&DVector::from_column_slice(v), 4.0).unwrap().as_slice().to_vec(),
            DVector::<f64>::zeros(p.col_dim()).as_slice(),
            &LbfgsConfig {
                max_inner: budget,
                ..LbfgsConfig::default()
            },
        )
        .unwrap();
        z = DVector::from_vec(z_next);
        values.push(p.al_value(&z, &state).unwrap());
    }
    for pair in values.windows(2) {
        assert!(pair[1] <= pair[0] + 1e-10 * pair[0].abs().max(1.0));
    }
    assert!(z.norm() > 0.0);
}

#[test]
fn moderate_tracking_instance_gains_six_orders() {
    let inst = common::instance(20, 5, 10, 2, true, false);
    let report = solve_al_lbfgs(&inst.problem, &AlConfig::default(), &LbfgsConfig::default()).unwrap();
    assert_eq!(report.status, SolveStatus::Converged);
    let gain = report.initial_residual() / report.final_residual;
    assert!(gain >= 1e6, "gain {gain:e}");
    // frozen from the measured run, about 1.2e3 inner iterations
    assert!(report.total_inner <= 2000, "{} inner iterations", report.total_inner);
}

#[test]
fn gradient_descent_lags_far_behind() {
    let inst = common::instance(6, 2, 6, 8, true, false);
    let p = &inst.problem;
    let lb = solve_al_lbfgs(p, &AlConfig::default(), &LbfgsConfig::default()).unwrap();
    assert!(lb.converged());
    let gd = solve_al_gd(
        p,
        &AlConfig {
            max_total_inner: Some(lb.total_inner),
            ..AlConfig::default()
        },
        100_000,
    )
    .unwrap();
    assert!(gd.total_inner <= lb.total_inner);
    assert!(gd.final_residual >= 1e3 * lb.final_residual, "GD {:e} vs lBFGS {:e}", gd.final_residual, lb.final_residual);
}

#[test]
fn minres_reaches_the_dense_kkt_point() {
    let inst = common::instance(3, 1, 4, 2, true, true);
    let p = &inst.problem;
    let report = solve_minres_kkt(p, 1e-11, 500).unwrap();
    assert_eq!(report.status, SolveStatus::Converged);
    let (_, res) = p.kkt_residual(&report.z, &report.lambda).unwrap();
    assert!(res <= 1e-8, "true residual {res:e}");
    assert_eq!(res, report.final_residual);
    let (z, lam) = solve_dense_kkt(p).unwrap();
    assert!(trajectory_error(p, &report.z, &p.trajectory(&z).unwrap()) <= 1e-8);
    assert!(rel_err(report.lambda.as_slice(), lam.as_slice()) <= 1e-6);
}

#[test]
fn invalid_configurations_are_rejected() {
    let inst = common::instance(2, 1, 3, 3, false, false);
    let p = &inst.problem;
    let bad_al = AlConfig {
        mu0: 0.0,
        ..AlConfig::default()
    };
    assert!(solve_al_lbfgs(p, &bad_al, &LbfgsConfig::default()).is_err());
    let bad_lb = LbfgsConfig {
        window: 0,
        ..LbfgsConfig::default()
    };
    assert!(solve_al_lbfgs(p, &AlConfig::default(), &bad_lb).is_err());
    assert!(solve_minres_kkt(p, 0.0, 10).is_err());
    let wrong_start = AlConfig {
        z0: Some(DVector::zeros(1)),
        ..AlConfig::default()
    };
    assert!(solve_al_gd(p, &wrong_start, 10).is_err());
}

#[test]
fn report_csv_has_one_row_per_record() {
    let inst = common::instance(2, 1, 3, 4, true, false);
    let report = solve_al_lbfgs(&inst.problem, &AlConfig::default(), &LbfgsConfig::default()).unwrap();
    let mut buf = Vec::new();
    report.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "outer_k,inner_j,residual_norm,grad_norm,alpha,elapsed_s");
    assert_eq!(lines.count(), report.records.len());
    let summary = report.summary_json();
    assert_eq!(summary["status"], "converged");
    assert_eq!(summary["total_inner"], report.total_inner);
}
