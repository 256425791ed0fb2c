//! Seeded random instances in the style of the numerical experiments:
//! stable sparse plants, random excitation, equilibrium setpoints.

use fastdeepc::io::{InstanceFile, SystemFile};
use fastdeepc::lti::{equilibrium_setpoint, generate_excitation, generate_system, is_persistently_exciting, simulate};
use fastdeepc::{min_data_length, DeepcProblem, LtiSystem, Trajectory};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde_json::json;

use crate::config::InstanceSpec;
use crate::error::{BenchError, Result};
use crate::planning::plan_signal_length;

/// Plants are redrawn from `seed + k * PLANT_SEED_STRIDE` until controllable.
pub const PLANT_SEED_STRIDE: u64 = 1_000_003;
pub const MAX_RESAMPLES: u64 = 20;
/// Above this state dimension the Kalman rank test is numerically meaningless
/// (`A^k B` decays like `0.9^k`) and is skipped.
pub const CONTROLLABILITY_CHECK_MAX_N: usize = 40;
/// Largest input Hankel matrix densified for the excitation check.
pub const PE_CHECK_MAX_ENTRIES: usize = 4_000_000;

const EXCITATION_STREAM: u64 = 0x6578_6369_7465;
const VECTOR_STREAM: u64 = 0x7665_6374_6f72;

#[derive(Debug, Clone)]
pub struct GeneratedInstance {
    pub spec: InstanceSpec,
    pub system: LtiSystem,
    pub data: Trajectory,
    pub problem: DeepcProblem,
    /// Serializable description; `trajectory_csv` is empty until saved.
    pub file: InstanceFile,
}

fn normal_vector(rng: &mut ChaCha8Rng, len: usize) -> DVector<f64> {
    DVector::from_fn(len, |_, _| rng.sample(StandardNormal))
}

pub fn generate_instance(spec: &InstanceSpec) -> Result<GeneratedInstance> {
    spec.validate()?;
    let (n, m, horizon) = (spec.n, spec.m, spec.horizon);
    let required = min_data_length(n, m, horizon);
    let data_len = spec.data_len.unwrap_or_else(|| plan_signal_length(n, m, horizon));
    if data_len < required {
        return Err(BenchError::Config(format!(
            "data_len {data_len} is below the minimum {required} for n={n}, m={m}, L={horizon}"
        )));
    }

    let check_controllability = n <= CONTROLLABILITY_CHECK_MAX_N;
    let mut resamples = 0;
    let (system, plant_seed) = loop {
        let plant_seed = spec.seed.wrapping_add(resamples * PLANT_SEED_STRIDE);
        let system = generate_system(n, m, spec.spectral_radius, spec.density, plant_seed)?;
        if !check_controllability || system.is_controllable() {
            break (system, plant_seed);
        }
        resamples += 1;
        if resamples == MAX_RESAMPLES {
            return Err(BenchError::Config(format!(
                "no controllable plant in {MAX_RESAMPLES} draws from seed {}",
                spec.seed
            )));
        }
    };

    let inputs = generate_excitation(m, data_len, spec.seed ^ EXCITATION_STREAM)?;
    let data = simulate(&system, &DVector::zeros(n), &inputs)?;
    let persistently_exciting = (m * (horizon + n) * (data_len + 1 - horizon - n) <= PE_CHECK_MAX_ENTRIES)
        .then(|| is_persistently_exciting(&inputs, horizon + n));

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ VECTOR_STREAM);
    let x0 = match &spec.x0 {
        Some(x) => DVector::from_vec(x.clone()),
        None => normal_vector(&mut rng, n),
    };
    let setpoint = if spec.tracking {
        let u_s = match &spec.u_s {
            Some(u) => DVector::from_vec(u.clone()),
            None => normal_vector(&mut rng, m),
        };
        Some(equilibrium_setpoint(&system, &u_s)?)
    } else {
        None
    };

    let (q, r) = (DMatrix::identity(n, n), DMatrix::identity(m, m));
    let problem = DeepcProblem::assemble(&data, horizon, q.clone(), r.clone(), x0.clone(), setpoint.clone())?;

    let mut file = InstanceFile::new("", &data, horizon, &q, &r, &x0, setpoint.as_ref());
    file.system = Some(SystemFile::from_system(&system));
    file.seed = Some(spec.seed);
    file.spectral_radius = Some(spec.spectral_radius);
    file.density = Some(spec.density);
    let meta = &mut file.metadata;
    meta.insert("min_data_length".into(), json!(required));
    if spec.data_len.is_none() {
        meta.insert("data_len_status".into(), json!("reconstructed"));
        meta.insert("data_len_rule".into(), json!("least 7-smooth length >= (m+1)(L+n)-1"));
    } else {
        meta.insert("data_len_status".into(), json!("configured"));
    }
    meta.insert("plant_seed".into(), json!(plant_seed));
    meta.insert("plant_resamples".into(), json!(resamples));
    meta.insert("controllability_checked".into(), json!(check_controllability));
    meta.insert("persistently_exciting".into(), json!(persistently_exciting));

    Ok(GeneratedInstance {
        spec: spec.clone(),
        system,
        data,
        problem,
        file,
    })
}
