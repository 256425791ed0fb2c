//! Experiment configuration: JSON files with per-command defaults, plus the
//! global command-line overrides.

use std::fs;
use std::path::{Path, PathBuf};

use fastdeepc::solvers::{AlConfig, LbfgsConfig};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    AlLbfgs,
    AlGd,
    Minres,
}

impl SolverKind {
    pub fn name(self) -> &'static str {
        match self {
            SolverKind::AlLbfgs => "al-lbfgs",
            SolverKind::AlGd => "al-gd",
            SolverKind::Minres => "minres",
        }
    }
}

/// Parameters shared by every solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    pub mu0: f64,
    pub mu_delta: f64,
    pub inner_tol: f64,
    /// KKT residual target; `None` means `1e-6 (1 + |x0|)`.
    pub outer_tol: Option<f64>,
    pub max_outer: usize,
    pub window: usize,
    /// Per-subproblem iteration cap.
    pub max_inner: usize,
    /// Cap on all inner iterations (MINRES: on its iterations).
    pub max_iterations: Option<usize>,
    pub minres_tol: Option<f64>,
}

impl Default for SolverSettings {
    fn default() -> Self {
        let al = AlConfig::default();
        let lb = LbfgsConfig::default();
        Self {
            mu0: al.mu0,
            mu_delta: al.mu_delta,
            inner_tol: al.inner_tol,
            outer_tol: None,
            max_outer: al.max_outer,
            window: lb.window,
            max_inner: lb.max_inner,
            max_iterations: None,
            minres_tol: None,
        }
    }
}

impl SolverSettings {
    pub fn al_config(&self) -> AlConfig {
        AlConfig {
            mu0: self.mu0,
            mu_delta: self.mu_delta,
            inner_tol: self.inner_tol,
            outer_tol: self.outer_tol,
            max_outer: self.max_outer,
            max_total_inner: self.max_iterations,
            lambda0: None,
            z0: None,
        }
    }

    pub fn lbfgs_config(&self) -> LbfgsConfig {
        LbfgsConfig {
            window: self.window,
            grad_tol: self.inner_tol,
            max_inner: self.max_inner,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.al_config().validate()?;
        self.lbfgs_config().validate()?;
        if self.max_iterations == Some(0) {
            return Err(BenchError::Config("max_iterations must be positive".into()));
        }
        if self.minres_tol.is_some_and(|t| !(t > 0.0)) {
            return Err(BenchError::Config("minres_tol must be positive".into()));
        }
        Ok(())
    }
}

/// How a random instance is drawn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InstanceSpec {
    pub n: usize,
    pub m: usize,
    pub horizon: usize,
    pub seed: u64,
    pub spectral_radius: f64,
    pub density: f64,
    /// Track an equilibrium setpoint rather than regulate to the origin.
    pub tracking: bool,
    /// Setpoint input; drawn from the seed when absent.
    pub u_s: Option<Vec<f64>>,
    /// Initial state; drawn from the seed when absent.
    pub x0: Option<Vec<f64>>,
    /// Data length; the planned 7-smooth length when absent.
    pub data_len: Option<usize>,
}

impl Default for InstanceSpec {
    fn default() -> Self {
        Self {
            n: 100,
            m: 50,
            horizon: 50,
            seed: 1,
            spectral_radius: 0.9,
            density: 0.5,
            tracking: true,
            u_s: None,
            x0: None,
            data_len: None,
        }
    }
}

impl InstanceSpec {
    pub fn sized(n: usize, m: usize, horizon: usize, seed: u64) -> Self {
        Self {
            n,
            m,
            horizon,
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.m == 0 || self.horizon == 0 {
            return Err(BenchError::Config("n, m and horizon must be positive".into()));
        }
        if self.u_s.as_ref().is_some_and(|u| u.len() != self.m) {
            return Err(BenchError::Config(format!("u_s must have {} entries", self.m)));
        }
        if self.x0.as_ref().is_some_and(|x| x.len() != self.n) {
            return Err(BenchError::Config(format!("x0 must have {} entries", self.n)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[derive(Default)]
pub struct GenDataConfig {
    pub instance: InstanceSpec,
    /// File stem of the emitted CSV and JSON.
    pub name: Option<String>,
}


#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveConfig {
    pub instance_path: Option<PathBuf>,
    pub solver: SolverKind,
    pub settings: SolverSettings,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            instance_path: None,
            solver: SolverKind::AlLbfgs,
            settings: SolverSettings::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResidualStudyConfig {
    pub instance: InstanceSpec,
    pub methods: Vec<SolverKind>,
    pub settings: SolverSettings,
    /// Iteration budget of the baselines; by default the iterations aL-lBFGS
    /// needed.
    pub budget: Option<usize>,
}

impl Default for ResidualStudyConfig {
    fn default() -> Self {
        Self {
            instance: InstanceSpec::default(),
            methods: vec![SolverKind::AlLbfgs, SolverKind::AlGd, SolverKind::Minres],
            settings: SolverSettings {
                outer_tol: Some(1e-6),
                ..SolverSettings::default()
            },
            budget: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SweepPair {
    pub m: usize,
    pub horizon: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScalingStudyConfig {
    pub ns: Vec<usize>,
    pub pairs: Vec<SweepPair>,
    pub seed: u64,
    /// Timed runs per point; the median is reported.
    pub repeats: usize,
    pub settings: SolverSettings,
}

impl Default for ScalingStudyConfig {
    fn default() -> Self {
        Self {
            ns: vec![64, 128, 256, 512],
            pairs: vec![SweepPair { m: 50, horizon: 50 }, SweepPair { m: 100, horizon: 100 }],
            seed: 1,
            repeats: 3,
            settings: SolverSettings {
                max_iterations: Some(30),
                ..SolverSettings::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConditionStudyConfig {
    pub ns: Vec<usize>,
    pub m: usize,
    pub horizon: usize,
    pub seed: u64,
    pub settings: SolverSettings,
}

impl Default for ConditionStudyConfig {
    fn default() -> Self {
        Self {
            ns: vec![20, 40, 60],
            m: 10,
            horizon: 10,
            seed: 1,
            settings: SolverSettings::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClosedLoopConfig {
    pub instance: InstanceSpec,
    pub steps: usize,
    pub settings: SolverSettings,
    /// Cross-check every applied input against the dense oracle.
    pub dense_check: bool,
}

impl Default for ClosedLoopConfig {
    fn default() -> Self {
        Self {
            instance: InstanceSpec {
                n: 3,
                m: 1,
                horizon: 10,
                seed: 5,
                u_s: Some(vec![1.0]),
                x0: Some(vec![1.0, -1.0, 0.5]),
                ..InstanceSpec::default()
            },
            steps: 50,
            settings: SolverSettings::default(),
            dense_check: true,
        }
    }
}

/// Reads a command config, or its defaults when no file is given.
pub fn load_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = fs::read_to_string(path).map_err(|source| BenchError::ConfigFile {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| BenchError::ConfigParse {
        path: path.to_path_buf(),
        source,
    })
}

/// Creates the output directory and checks that it accepts files.
pub fn prepare_output_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| BenchError::Config(format!("cannot create {}: {e}", dir.display())))?;
    let probe = dir.join(".fastdeepc-write-probe");
    fs::write(&probe, b"").map_err(|e| BenchError::Config(format!("{} is not writable: {e}", dir.display())))?;
    fs::remove_file(&probe)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_json_keeps_defaults() {
        let cfg: ResidualStudyConfig = serde_json::from_str(r#"{"instance": {"n": 4, "m": 2, "horizon": 3}}"#).unwrap();
        assert_eq!(cfg.instance.n, 4);
        assert_eq!(cfg.instance.spectral_radius, 0.9);
        assert_eq!(cfg.methods.len(), 3);
        assert_eq!(cfg.settings.outer_tol, Some(1e-6));
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(serde_json::from_str::<GenDataConfig>(r#"{"instanse": {}}"#).is_err());
    }

    #[test]
    fn solver_names_round_trip() {
        for kind in [SolverKind::AlLbfgs, SolverKind::AlGd, SolverKind::Minres] {
            let json = serde_json::to_string(&kind).unwrap();
            assert_eq!(json, format!("\"{}\"", kind.name()));
        }
    }

    #[test]
    fn settings_validation() {
        assert!(SolverSettings::default().validate().is_ok());
        let bad = SolverSettings {
            window: 0,
            ..SolverSettings::default()
        };
        assert!(bad.validate().is_err());
    }
}
