use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fastdeepc_bench::config::{
    load_config, prepare_output_dir, ClosedLoopConfig, ConditionStudyConfig, GenDataConfig, ResidualStudyConfig,
    ScalingStudyConfig, SolveConfig,
};
use fastdeepc_bench::experiments::{
    cmd_closed_loop_demo, cmd_condition_study, cmd_gen_data, cmd_residual_study, cmd_scaling_study, cmd_solve,
};
use fastdeepc_bench::{BenchError, Result, SolverKind};

/// Matrix-free data-driven predictive control: data generation, solves and
/// the benchmark studies.
#[derive(Debug, Parser)]
#[command(name = "fastdeepc", version)]
struct Cli {
    /// JSON file with command parameters; missing fields take defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Overrides the seed of the configured instance or sweep.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[arg(long, global = true, value_enum)]
    solver: Option<SolverKind>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw a random plant, simulate data and write the instance files.
    GenData,
    /// Solve an instance written by gen-data.
    Solve {
        /// Instance JSON; overrides `instance_path` in the config.
        instance: Option<PathBuf>,
    },
    /// Residual histories of aL-lBFGS, aL-GD and MINRES on one instance.
    ResidualStudy,
    /// Iterations and time per iteration over a state-dimension sweep.
    ScalingStudy,
    /// Condition numbers of S and of the BFGS-preconditioned S.
    ConditionStudy,
    /// Receding-horizon control of a small plant.
    ClosedLoop,
}

fn not_converged(method: &str, detail: String) -> BenchError {
    BenchError::NotConverged {
        method: method.to_string(),
        detail,
    }
}

fn reject_solver(cli: &Cli, command: &str) -> Result<()> {
    match cli.solver {
        Some(kind) if kind != SolverKind::AlLbfgs => Err(BenchError::Config(format!(
            "{command} only supports --solver al-lbfgs"
        ))),
        _ => Ok(()),
    }
}

fn run(cli: &Cli) -> Result<()> {
    let config = cli.config.as_deref();
    let out = cli.out.as_path();
    prepare_output_dir(out)?;
    match &cli.command {
        Command::GenData => {
            let mut cfg: GenDataConfig = load_config(config)?;
            if let Some(seed) = cli.seed {
                cfg.instance.seed = seed;
            }
            let result = cmd_gen_data(&cfg, out)?;
            println!(
                "wrote {} (N = {})",
                result.json_path.display(),
                result.instance.data.len()
            );
        }
        Command::Solve { instance } => {
            let mut cfg: SolveConfig = load_config(config)?;
            if let Some(path) = instance {
                cfg.instance_path = Some(path.clone());
            }
            if let Some(kind) = cli.solver {
                cfg.solver = kind;
            }
            let report = cmd_solve(&cfg, out)?;
            println!(
                "{}: {} after {} iterations, residual {:.3e}",
                report.method,
                report.status.as_str(),
                report.total_inner,
                report.final_residual
            );
            if !report.converged() {
                return Err(not_converged(&report.method, format!("status {}", report.status.as_str())));
            }
        }
        Command::ResidualStudy => {
            let mut cfg: ResidualStudyConfig = load_config(config)?;
            if let Some(seed) = cli.seed {
                cfg.instance.seed = seed;
            }
            if let Some(kind) = cli.solver {
                cfg.methods = vec![kind];
            }
            let study = cmd_residual_study(&cfg, out)?;
            println!("budget {} iterations", study.budget);
            for (kind, r) in &study.runs {
                println!("{:>9}: {:>6} iterations, final residual {:.3e}", kind.name(), r.total_inner, r.final_residual);
            }
        }
        Command::ScalingStudy => {
            reject_solver(cli, "scaling-study")?;
            let mut cfg: ScalingStudyConfig = load_config(config)?;
            if let Some(seed) = cli.seed {
                cfg.seed = seed;
            }
            let study = cmd_scaling_study(&cfg, out)?;
            for r in &study.records {
                println!(
                    "n={:>4} m={:>4} L={:>4} N={:>6}: {:>6} iterations, {:.3e} s/iteration",
                    r.n, r.m, r.horizon, r.data_len, r.total_iterations, r.mean_s_per_iteration
                );
            }
            for s in &study.series {
                match s.slope {
                    Some(slope) => println!("m={} L={}: log-log slope {slope:.3}", s.m, s.horizon),
                    None => println!("m={} L={}: {}", s.m, s.horizon, s.note.as_deref().unwrap_or("slope undefined")),
                }
            }
        }
        Command::ConditionStudy => {
            reject_solver(cli, "condition-study")?;
            let mut cfg: ConditionStudyConfig = load_config(config)?;
            if let Some(seed) = cli.seed {
                cfg.seed = seed;
            }
            for r in cmd_condition_study(&cfg, out)? {
                println!("n={:>4}: kappa(S) = {:.3e}, kappa(BS) = {:.3e}", r.n, r.kappa_s, r.kappa_bs);
            }
        }
        Command::ClosedLoop => {
            reject_solver(cli, "closed-loop")?;
            let mut cfg: ClosedLoopConfig = load_config(config)?;
            if let Some(seed) = cli.seed {
                cfg.instance.seed = seed;
            }
            let result = cmd_closed_loop_demo(&cfg, out)?;
            println!("final tracking error {:.3e} after {} steps", result.final_error, result.steps.len());
            if !result.all_converged() {
                return Err(not_converged("closed-loop", "a receding-horizon solve stopped early".into()));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
