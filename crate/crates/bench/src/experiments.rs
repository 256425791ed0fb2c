//! The experiment drivers behind each CLI command.
//!
//! Output files (all under the output directory):
//!
//! | command            | files                                                        |
//! |--------------------|--------------------------------------------------------------|
//! | `gen-data`         | `<name>.csv` (trajectory), `<name>.json` (instance)          |
//! | `solve`            | `solve_<method>.csv` (iteration log), `solve_<method>.json`  |
//! | `residual-study`   | `residuals.csv`, `residual_summary.json`                     |
//! | `scaling-study`    | `scaling.csv`, `scaling_summary.json`                        |
//! | `condition-study`  | `condition.csv`                                              |
//! | `closed-loop`      | `closed_loop.csv`, `closed_loop_summary.json`                |
//!
//! CSV headers:
//!
//! * `residuals.csv`: `method,iteration,residual_norm`
//! * `scaling.csv`: the fields of [`BenchRecord`] in declaration order
//! * `condition.csv`: the fields of [`ConditionRecord`] in declaration order
//! * `closed_loop.csv`: `step,x_0..x_{n-1},u_0..u_{m-1},tracking_error,iterations,oracle_input_error`

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use fastdeepc::io::{save_trajectory, InstanceFile};
use fastdeepc::linalg::{numerical_rank, singular_values};
use fastdeepc::solvers::dense::{dense_s, DENSE_COL_LIMIT};
use fastdeepc::solvers::lbfgs::{minimize_quadratic, Direction};
use fastdeepc::solvers::{
    solve_al_gd, solve_al_lbfgs, solve_dense_kkt, solve_minres_kkt, two_loop_apply, LbfgsMemory, SolveReport, SolveStatus,
};
use fastdeepc::{AlState, DeepcProblem};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use serde_json::json;

use crate::config::{
    ClosedLoopConfig, ConditionStudyConfig, GenDataConfig, ResidualStudyConfig, ScalingStudyConfig, SolveConfig, SolverKind,
    SolverSettings,
};
use crate::error::{BenchError, Result};
use crate::instance::{generate_instance, GeneratedInstance};
use crate::planning::memory_estimate;

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(BufWriter::new(File::create(path)?), value)?;
    Ok(())
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::Writer::from_writer(BufWriter::new(File::create(path)?)))
}

/// Runs one solver with the shared settings.
pub fn run_solver(problem: &DeepcProblem, kind: SolverKind, settings: &SolverSettings) -> Result<SolveReport> {
    settings.validate()?;
    let al = settings.al_config();
    let report = match kind {
        SolverKind::AlLbfgs => solve_al_lbfgs(problem, &al, &settings.lbfgs_config())?,
        SolverKind::AlGd => solve_al_gd(problem, &al, settings.max_inner)?,
        SolverKind::Minres => {
            let tol = settings.minres_tol.unwrap_or_else(|| al.resolved_outer_tol(problem));
            let cap = settings
                .max_iterations
                .unwrap_or(10 * (problem.col_dim() + problem.n()));
            solve_minres_kkt(problem, tol, cap)?
        }
    };
    Ok(report)
}

pub struct GenDataOutput {
    pub instance: GeneratedInstance,
    pub json_path: PathBuf,
    pub csv_path: PathBuf,
}

pub fn cmd_gen_data(cfg: &GenDataConfig, out: &Path) -> Result<GenDataOutput> {
    let mut instance = generate_instance(&cfg.instance)?;
    let spec = &cfg.instance;
    let stem = cfg
        .name
        .clone()
        .unwrap_or_else(|| format!("instance_n{}_m{}_L{}_s{}", spec.n, spec.m, spec.horizon, spec.seed));
    let csv_path = out.join(format!("{stem}.csv"));
    let json_path = out.join(format!("{stem}.json"));
    save_trajectory(&instance.data, &csv_path)?;
    instance.file.trajectory_csv = format!("{stem}.csv");
    instance.file.save(&json_path)?;
    Ok(GenDataOutput {
        instance,
        json_path,
        csv_path,
    })
}

pub fn cmd_solve(cfg: &SolveConfig, out: &Path) -> Result<SolveReport> {
    let path = cfg
        .instance_path
        .as_deref()
        .ok_or_else(|| BenchError::Config("no instance file given".into()))?;
    let file = InstanceFile::load(path).map_err(|e| BenchError::Config(format!("cannot load {}: {e}", path.display())))?;
    let (problem, _) = file.assemble(path)?;
    let report = run_solver(&problem, cfg.solver, &cfg.settings)?;
    let name = cfg.solver.name();
    report.write_csv(BufWriter::new(File::create(out.join(format!("solve_{name}.csv")))?))?;
    let mut summary = report.summary_json();
    summary["instance"] = json!(path.display().to_string());
    write_json(&out.join(format!("solve_{name}.json")), &summary)?;
    Ok(report)
}

pub struct ResidualStudy {
    pub budget: usize,
    pub data_len: usize,
    pub runs: Vec<(SolverKind, SolveReport)>,
}

impl ResidualStudy {
    pub fn report(&self, kind: SolverKind) -> Option<&SolveReport> {
        self.runs.iter().find(|(k, _)| *k == kind).map(|(_, r)| r)
    }
}

/// Residual histories of the selected methods on one instance. The baselines
/// get the iteration budget aL-lBFGS needed unless `budget` is configured.
pub fn cmd_residual_study(cfg: &ResidualStudyConfig, out: &Path) -> Result<ResidualStudy> {
    if cfg.methods.is_empty() {
        return Err(BenchError::Config("residual study needs at least one method".into()));
    }
    let has_lbfgs = cfg.methods.contains(&SolverKind::AlLbfgs);
    if cfg.budget.is_none() && !has_lbfgs {
        return Err(BenchError::Config("a budget is required when aL-lBFGS is not among the methods".into()));
    }
    cfg.settings.validate()?;
    let instance = generate_instance(&cfg.instance)?;
    let problem = &instance.problem;

    let mut runs = Vec::new();
    let mut budget = cfg.budget;
    if has_lbfgs {
        let settings = SolverSettings {
            max_iterations: cfg.settings.max_iterations.or(budget),
            ..cfg.settings.clone()
        };
        let report = run_solver(problem, SolverKind::AlLbfgs, &settings)?;
        budget.get_or_insert(report.total_inner);
        runs.push((SolverKind::AlLbfgs, report));
    }
    let budget = budget.expect("set above");
    let baseline = SolverSettings {
        max_iterations: Some(budget),
        ..cfg.settings.clone()
    };
    for &kind in cfg.methods.iter().filter(|k| **k != SolverKind::AlLbfgs) {
        if runs.iter().any(|(k, _)| *k == kind) {
            continue;
        }
        runs.push((kind, run_solver(problem, kind, &baseline)?));
    }

    let mut wtr = csv_writer(&out.join("residuals.csv"))?;
    wtr.write_record(["method", "iteration", "residual_norm"])?;
    for (kind, report) in &runs {
        for (i, rec) in report.records.iter().enumerate() {
            wtr.write_record([kind.name().to_string(), i.to_string(), format!("{:.16e}", rec.residual_norm)])?;
        }
    }
    wtr.flush()?;

    let summary = json!({
        "instance": {
            "n": cfg.instance.n, "m": cfg.instance.m, "horizon": cfg.instance.horizon,
            "data_len": problem.data_len(), "seed": cfg.instance.seed,
            "metadata": instance.file.metadata,
        },
        "budget": budget,
        "methods": runs.iter().map(|(kind, r)| json!({
            "method": kind.name(),
            "status": r.status.as_str(),
            "iterations": r.total_inner,
            "initial_residual": r.initial_residual(),
            "final_residual": r.final_residual,
            "elapsed_s": r.elapsed_s,
        })).collect::<Vec<_>>(),
    });
    write_json(&out.join("residual_summary.json"), &summary)?;
    Ok(ResidualStudy {
        budget,
        data_len: problem.data_len(),
        runs,
    })
}

/// One measured point of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRecord {
    pub n: usize,
    pub m: usize,
    pub horizon: usize,
    pub data_len: usize,
    pub total_iterations: usize,
    pub total_s: f64,
    pub mean_s_per_iteration: f64,
    pub operator_bytes: u64,
    pub dense_s_bytes: u64,
    pub trajectory_bytes: u64,
    pub status: String,
    pub kappa_s: Option<f64>,
    pub kappa_bs: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingSeries {
    pub m: usize,
    pub horizon: usize,
    /// Least-squares slope of `log(mean time per iteration)` against `log n`.
    pub slope: Option<f64>,
    /// Slope between the two largest `n`.
    pub tail_slope: Option<f64>,
    pub note: Option<String>,
}

/// Least-squares slope of `log y` against `log x`; `None` with fewer than two
/// distinct abscissae.
pub fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let count = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / count;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / count;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if logs.len() < 2 || sxx <= 0.0 {
        return None;
    }
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    values[values.len() / 2]
}

pub struct ScalingStudy {
    pub records: Vec<BenchRecord>,
    pub series: Vec<ScalingSeries>,
}

/// Iterations, time and memory over an `n` sweep for each `(m, L)` pair.
/// Points run one after another so that timings do not compete for cores.
pub fn cmd_scaling_study(cfg: &ScalingStudyConfig, out: &Path) -> Result<ScalingStudy> {
    if cfg.ns.is_empty() || cfg.pairs.is_empty() {
        return Err(BenchError::Config("scaling sweeps must be non-empty".into()));
    }
    if cfg.repeats == 0 {
        return Err(BenchError::Config("repeats must be at least 1".into()));
    }
    cfg.settings.validate()?;
    let mut records = Vec::new();
    let mut series = Vec::new();
    for pair in &cfg.pairs {
        let mut points = Vec::new();
        for &n in &cfg.ns {
            let spec = crate::config::InstanceSpec::sized(n, pair.m, pair.horizon, cfg.seed);
            let instance = generate_instance(&spec)?;
            let problem = &instance.problem;
            let mut times = Vec::with_capacity(cfg.repeats);
            let mut last = None;
            for _ in 0..cfg.repeats {
                let report = run_solver(problem, SolverKind::AlLbfgs, &cfg.settings)?;
                times.push(report.elapsed_s);
                last = Some(report);
            }
            let report = last.expect("repeats >= 1");
            let total_s = median(&mut times);
            let iterations = report.total_inner.max(1);
            let mem = memory_estimate(n, pair.m, pair.horizon, problem.data_len());
            let record = BenchRecord {
                n,
                m: pair.m,
                horizon: pair.horizon,
                data_len: problem.data_len(),
                total_iterations: report.total_inner,
                total_s,
                mean_s_per_iteration: total_s / iterations as f64,
                operator_bytes: problem.operator().memory_bytes() as u64,
                dense_s_bytes: mem.dense_s_bytes,
                trajectory_bytes: mem.trajectory_bytes,
                status: report.status.as_str().to_string(),
                kappa_s: None,
                kappa_bs: None,
            };
            points.push((n as f64, record.mean_s_per_iteration));
            records.push(record);
        }
        let slope = loglog_slope(&points);
        let tail_slope = (points.len() >= 2).then(|| loglog_slope(&points[points.len() - 2..])).flatten();
        series.push(ScalingSeries {
            m: pair.m,
            horizon: pair.horizon,
            slope,
            tail_slope,
            note: slope.is_none().then(|| "fewer than two sweep points: slope undefined".to_string()),
        });
    }

    let mut wtr = csv_writer(&out.join("scaling.csv"))?;
    for r in &records {
        wtr.serialize(r)?;
    }
    wtr.flush()?;
    write_json(
        &out.join("scaling_summary.json"),
        &json!({ "series": series, "repeats": cfg.repeats, "timing": "median of repeats, monotonic wall clock" }),
    )?;
    Ok(ScalingStudy { records, series })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionRecord {
    pub n: usize,
    pub m: usize,
    pub horizon: usize,
    pub data_len: usize,
    pub col_dim: usize,
    pub rank_s: usize,
    pub kappa_s: f64,
    pub kappa_bs: f64,
    pub bfgs_iterations: usize,
    pub stored_pairs: usize,
}

/// The implicit inverse Hessian approximation as a dense matrix, one two-loop
/// application per canonical basis vector.
pub fn materialize_inverse_hessian(memory: &LbfgsMemory, dim: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(dim, dim);
    let mut e = vec![0.0; dim];
    for j in 0..dim {
        e[j] = 1.0;
        let col = two_loop_apply(memory, &e);
        for (i, v) in col.iter().enumerate() {
            out[(i, j)] = -v;
        }
        e[j] = 0.0;
    }
    out
}

/// `sigma_1 / sigma_rank`: the ratio of the extreme nonzero singular values
/// when `rank` is the rank of the matrix.
pub fn condition_on_rank(mat: &DMatrix<f64>, rank: usize) -> f64 {
    let sv = singular_values(mat);
    if rank == 0 || rank > sv.len() {
        return f64::INFINITY;
    }
    sv[0] / sv[rank - 1]
}

/// Full-memory BFGS on the first augmented Lagrangian subproblem, then the
/// condition numbers of `S` and `B S`.
pub fn condition_instance(problem: &DeepcProblem, settings: &SolverSettings) -> Result<(ConditionRecord, LbfgsMemory)> {
    let k = problem.col_dim();
    if k > DENSE_COL_LIMIT {
        return Err(BenchError::Config(format!(
            "condition study needs dense S; {k} columns exceed the limit of {DENSE_COL_LIMIT}"
        )));
    }
    let s = dense_s(problem)?;
    let rank = numerical_rank(&s);
    let mu = settings.mu0;
    let state = AlState::new(DVector::zeros(problem.n()), mu)?;
    let mut memory = LbfgsMemory::new(usize::MAX);
    let (_, inner) = minimize_quadratic(
        |z| {
            let z = DVector::from_column_slice(z);
            problem.al_gradient(&z, &state).expect("dimensions fixed").as_slice().to_vec()
        },
        |v| {
            let v = DVector::from_column_slice(v);
            problem.al_hessian_matvec(&v, mu).expect("dimensions fixed").as_slice().to_vec()
        },
        &vec![0.0; k],
        settings.inner_tol,
        settings.max_inner,
        Direction::QuasiNewton,
        &mut memory,
        |_| {},
    );
    let b = materialize_inverse_hessian(&memory, k);
    let record = ConditionRecord {
        n: problem.n(),
        m: problem.m(),
        horizon: problem.horizon(),
        data_len: problem.data_len(),
        col_dim: k,
        rank_s: rank,
        kappa_s: condition_on_rank(&s, rank),
        kappa_bs: condition_on_rank(&(b * &s), rank),
        bfgs_iterations: inner.iterations,
        stored_pairs: memory.len(),
    };
    Ok((record, memory))
}

pub fn cmd_condition_study(cfg: &ConditionStudyConfig, out: &Path) -> Result<Vec<ConditionRecord>> {
    if cfg.ns.is_empty() {
        return Err(BenchError::Config("condition sweep must be non-empty".into()));
    }
    cfg.settings.validate()?;
    let mut records = Vec::new();
    for &n in &cfg.ns {
        let spec = crate::config::InstanceSpec::sized(n, cfg.m, cfg.horizon, cfg.seed);
        let cols = crate::planning::plan_signal_length(n, cfg.m, cfg.horizon) + 1 - cfg.horizon;
        if cols > DENSE_COL_LIMIT {
            return Err(BenchError::Config(format!(
                "n={n}: {cols} columns exceed the dense limit of {DENSE_COL_LIMIT}"
            )));
        }
        let instance = generate_instance(&spec)?;
        records.push(condition_instance(&instance.problem, &cfg.settings)?.0);
    }
    let mut wtr = csv_writer(&out.join("condition.csv"))?;
    for r in &records {
        wtr.serialize(r)?;
    }
    wtr.flush()?;
    Ok(records)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoopStep {
    pub step: usize,
    pub state: DVector<f64>,
    pub input: DVector<f64>,
    pub tracking_error: f64,
    pub iterations: usize,
    pub status: SolveStatus,
    /// Distance to the dense oracle's first input, when checked.
    pub oracle_input_error: Option<f64>,
}

pub struct ClosedLoop {
    pub steps: Vec<ClosedLoopStep>,
    pub final_state: DVector<f64>,
    pub final_error: f64,
}

impl ClosedLoop {
    pub fn all_converged(&self) -> bool {
        self.steps.iter().all(|s| s.status == SolveStatus::Converged)
    }
}

/// Receding-horizon control of the true plant: solve from the measured state,
/// apply the first input, repeat. Each solve starts from the previous primal
/// and dual iterates.
pub fn cmd_closed_loop_demo(cfg: &ClosedLoopConfig, out: &Path) -> Result<ClosedLoop> {
    cfg.settings.validate()?;
    let instance = generate_instance(&cfg.instance)?;
    let (n, m) = (instance.spec.n, instance.spec.m);
    let system = &instance.system;
    let target = instance
        .problem
        .setpoint()
        .map_or_else(|| DVector::zeros(n), |sp| sp.x_s.clone());
    let dense_check = cfg.dense_check && instance.problem.col_dim() <= DENSE_COL_LIMIT;

    let mut x = instance.problem.initial_state().clone();
    let mut warm: Option<(DVector<f64>, DVector<f64>)> = None;
    let mut steps = Vec::with_capacity(cfg.steps);
    for step in 0..cfg.steps {
        let problem = instance.problem.with_initial_state(x.clone())?;
        let mut al = cfg.settings.al_config();
        if let Some((z, lam)) = &warm {
            al.z0 = Some(z.clone());
            al.lambda0 = Some(lam.clone());
        }
        let report = solve_al_lbfgs(&problem, &al, &cfg.settings.lbfgs_config())?;
        let plan = problem.trajectory(&report.z)?;
        let u = plan.column(0).rows(n, m).into_owned();
        let oracle_input_error = if dense_check {
            let (zd, _) = solve_dense_kkt(&problem)?;
            let ud = problem.trajectory(&zd)?.column(0).rows(n, m).into_owned();
            Some((&u - &ud).norm() / (1.0 + ud.norm()))
        } else {
            None
        };
        steps.push(ClosedLoopStep {
            step,
            state: x.clone(),
            input: u.clone(),
            tracking_error: (&x - &target).norm(),
            iterations: report.total_inner,
            status: report.status,
            oracle_input_error,
        });
        x = system.step(&x, &u);
        warm = Some((report.z, report.lambda));
    }
    let final_error = (&x - &target).norm();

    let mut wtr = csv_writer(&out.join("closed_loop.csv"))?;
    let mut header = vec!["step".to_string()];
    header.extend((0..n).map(|i| format!("x_{i}")));
    header.extend((0..m).map(|i| format!("u_{i}")));
    header.extend(["tracking_error", "iterations", "oracle_input_error"].map(String::from));
    wtr.write_record(&header)?;
    for s in &steps {
        let mut row = vec![s.step.to_string()];
        row.extend(s.state.iter().map(|v| format!("{v:.16e}")));
        row.extend(s.input.iter().map(|v| format!("{v:.16e}")));
        row.push(format!("{:.16e}", s.tracking_error));
        row.push(s.iterations.to_string());
        row.push(s.oracle_input_error.map_or_else(String::new, |e| format!("{e:.3e}")));
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    write_json(
        &out.join("closed_loop_summary.json"),
        &json!({
            "steps": cfg.steps,
            "final_state": x.iter().copied().collect::<Vec<_>>(),
            "final_error": final_error,
            "all_converged": steps.iter().all(|s| s.status == SolveStatus::Converged),
            "max_oracle_input_error": steps.iter().filter_map(|s| s.oracle_input_error).reduce(f64::max),
        }),
    )?;
    Ok(ClosedLoop {
        steps,
        final_state: x,
        final_error,
    })
}
