//! File formats: trajectory CSV and problem instance JSON.
//!
//! Trajectory CSV starts with a comment line `# n=<n> m=<m> N=<N>`, then a
//! header `x_0,...,x_{n-1},u_0,...,u_{m-1}` and one row per time step. Values
//! are written with 17 significant digits so that reading them back
//! reproduces the same doubles.

use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lti::{LtiSystem, Setpoint, Trajectory};
use crate::problem::DeepcProblem;

fn fmt_value(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_trajectory_csv<W: Write>(traj: &Trajectory, mut writer: W) -> Result<()> {
    let (n, m, len) = (traj.n(), traj.m(), traj.len());
    writeln!(writer, "# n={n} m={m} N={len}")?;
    let mut wtr = csv::Writer::from_writer(writer);
    let header: Vec<String> = (0..n).map(|i| format!("x_{i}")).chain((0..m).map(|i| format!("u_{i}"))).collect();
    wtr.write_record(&header)?;
    for k in 0..len {
        let row: Vec<String> = traj
            .states()
            .column(k)
            .iter()
            .chain(traj.inputs().column(k).iter())
            .map(|&v| fmt_value(v))
            .collect();
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

fn parse_dims(line: &str) -> Result<(usize, usize, usize)> {
    let mut dims = [None; 3];
    for token in line.trim_start_matches('#').split_whitespace() {
        let (key, value) = token
            .split_once('=')
            .ok_or_else(|| Error::Format(format!("bad dimension token '{token}'")))?;
        let value: usize = value
            .parse()
            .map_err(|_| Error::Format(format!("bad dimension value '{token}'")))?;
        match key {
            "n" => dims[0] = Some(value),
            "m" => dims[1] = Some(value),
            "N" => dims[2] = Some(value),
            _ => return Err(Error::Format(format!("unknown dimension '{key}'"))),
        }
    }
    match dims {
        [Some(n), Some(m), Some(len)] => Ok((n, m, len)),
        _ => Err(Error::Format("dimension line must give n, m and N".into())),
    }
}

pub fn read_trajectory_csv<R: Read>(reader: R) -> Result<Trajectory> {
    let mut buf = BufReader::new(reader);
    let mut first = String::new();
    buf.read_line(&mut first)?;
    if !first.starts_with('#') {
        return Err(Error::Format("missing '# n=.. m=.. N=..' line".into()));
    }
    let (n, m, len) = parse_dims(&first)?;
    let mut rdr = csv::Reader::from_reader(buf);
    let header = rdr.headers()?.clone();
    let expected: Vec<String> = (0..n).map(|i| format!("x_{i}")).chain((0..m).map(|i| format!("u_{i}"))).collect();
    if header.iter().ne(expected.iter().map(String::as_str)) {
        return Err(Error::Format(format!("unexpected header {header:?}")));
    }
    let mut states = DMatrix::zeros(n, len);
    let mut inputs = DMatrix::zeros(m, len);
    let mut rows = 0;
    for (k, record) in rdr.records().enumerate() {
        let record = record?;
        if k >= len {
            return Err(Error::Format(format!("more than N={len} rows")));
        }
        if record.len() != n + m {
            return Err(Error::Format(format!("row {k} has {} fields, expected {}", record.len(), n + m)));
        }
        for (i, field) in record.iter().enumerate() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| Error::Format(format!("row {k}: bad number '{field}'")))?;
            if i < n {
                states[(i, k)] = v;
            } else {
                inputs[(i - n, k)] = v;
            }
        }
        rows += 1;
    }
    if rows != len {
        return Err(Error::Format(format!("expected {len} rows, found {rows}")));
    }
    Trajectory::new(states, inputs)
}

pub fn save_trajectory(traj: &Trajectory, path: &Path) -> Result<()> {
    write_trajectory_csv(traj, std::io::BufWriter::new(File::create(path)?))
}

pub fn load_trajectory(path: &Path) -> Result<Trajectory> {
    read_trajectory_csv(File::open(path)?)
}

fn rows_of(mat: &DMatrix<f64>) -> Vec<Vec<f64>> {
    mat.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn matrix_from_rows(rows: &[Vec<f64>], name: &str) -> Result<DMatrix<f64>> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Format(format!("{name} has ragged rows")));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemFile {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
}

impl SystemFile {
    pub fn from_system(sys: &LtiSystem) -> Self {
        Self {
            a: rows_of(&sys.a_matrix),
            b: rows_of(&sys.b_matrix),
        }
    }

    pub fn to_system(&self) -> Result<LtiSystem> {
        LtiSystem::new(matrix_from_rows(&self.a, "a")?, matrix_from_rows(&self.b, "b")?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetpointFile {
    pub x_s: Vec<f64>,
    pub u_s: Vec<f64>,
}

/// Problem instance document; the trajectory lives in a separate CSV whose
/// path is resolved relative to the JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceFile {
    pub trajectory_csv: String,
    pub n: usize,
    pub m: usize,
    pub horizon: usize,
    pub data_len: usize,
    pub q_weight: Vec<Vec<f64>>,
    pub r_weight: Vec<Vec<f64>>,
    pub x0: Vec<f64>,
    #[serde(default)]
    pub setpoint: Option<SetpointFile>,
    /// Ground-truth plant, kept for verification and closed-loop simulation.
    #[serde(default)]
    pub system: Option<SystemFile>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub spectral_radius: Option<f64>,
    #[serde(default)]
    pub density: Option<f64>,
    /// Free-form provenance notes such as how `data_len` was chosen.
    #[serde(default)]
    pub metadata: serde_json::Map<String, serde_json::Value>,
}

impl InstanceFile {
    pub fn new(
        trajectory_csv: impl Into<String>,
        traj: &Trajectory,
        horizon: usize,
        q_weight: &DMatrix<f64>,
        r_weight: &DMatrix<f64>,
        x0: &DVector<f64>,
        setpoint: Option<&Setpoint>,
    ) -> Self {
        Self {
            trajectory_csv: trajectory_csv.into(),
            n: traj.n(),
            m: traj.m(),
            horizon,
            data_len: traj.len(),
            q_weight: rows_of(q_weight),
            r_weight: rows_of(r_weight),
            x0: x0.iter().copied().collect(),
            setpoint: setpoint.map(|sp| SetpointFile {
                x_s: sp.x_s.iter().copied().collect(),
                u_s: sp.u_s.iter().copied().collect(),
            }),
            system: None,
            seed: None,
            spectral_radius: None,
            density: None,
            metadata: serde_json::Map::new(),
        }
    }

    pub fn setpoint(&self) -> Option<Setpoint> {
        self.setpoint.as_ref().map(|sp| Setpoint {
            x_s: DVector::from_vec(sp.x_s.clone()),
            u_s: DVector::from_vec(sp.u_s.clone()),
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::io::BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(file, self)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
    }

    pub fn trajectory_path(&self, instance_path: &Path) -> PathBuf {
        let csv = Path::new(&self.trajectory_csv);
        if csv.is_absolute() {
            csv.to_path_buf()
        } else {
            instance_path.parent().unwrap_or(Path::new(".")).join(csv)
        }
    }

    /// Loads the trajectory and assembles the problem.
    pub fn assemble(&self, instance_path: &Path) -> Result<(DeepcProblem, Trajectory)> {
        let traj = load_trajectory(&self.trajectory_path(instance_path))?;
        if traj.n() != self.n || traj.m() != self.m || traj.len() != self.data_len {
            return Err(Error::Format(format!(
                "trajectory dimensions ({}, {}, {}) disagree with instance ({}, {}, {})",
                traj.n(),
                traj.m(),
                traj.len(),
                self.n,
                self.m,
                self.data_len
            )));
        }
        let problem = DeepcProblem::assemble(
            &traj,
            self.horizon,
            matrix_from_rows(&self.q_weight, "q_weight")?,
            matrix_from_rows(&self.r_weight, "r_weight")?,
            DVector::from_vec(self.x0.clone()),
            self.setpoint(),
        )?;
        Ok((problem, traj))
    }
}
