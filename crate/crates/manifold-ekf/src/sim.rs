//! Attitude estimation from two body-frame direction measurements: the
//! benchmark scenario exercising every update variant and reset choice.
//!
//! The true attitude `R` integrates a prescribed angular velocity with Euler
//! steps (re-orthonormalized each step). A rate gyro measures the velocity
//! with additive white noise; at each step two reference directions are
//! observed in the body frame, each perturbed along the sphere by projected
//! ambient noise. The filter state lives on SO(3), the output on S² × S².
//!
//! Randomness discipline: a run's generator is derived from `(seed, run_id)`
//! (see [`run_rng`]); a run draws its initial attitude first, then the sensor
//! stream (per step: three gyro normals, then three ambient normals per
//! direction, in order). Every variant in a Monte Carlo batch replays the
//! same realization, so cross-variant comparisons are paired.

use nalgebra::{DMatrix, DVector, Matrix3, Matrix3x2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::filter::{
    filter_energy, ConcentratedGaussian, FilterError, FilterVariant, ManifoldEkf,
    MeasurementModel, SystemModel, UpdateVariant,
};
use crate::manifolds::product::Product;
use crate::manifolds::so3::{so3_exp, Rotation, So3};
use crate::manifolds::sphere::{tangent_basis, sphere_exp, Sphere, UnitVector};

/// Additive tangent process noise floor keeping predicted covariances SPD.
pub const PROCESS_NOISE_FLOOR: f64 = 1e-12;

/// Floor on the projected measurement covariance. An order of magnitude above
/// the linear solver's pivot tolerance so that zero-noise configurations stay
/// solvable; negligible against realistic direction noise.
pub const MEAS_NOISE_FLOOR: f64 = 1e-10;

/// Margin kept from the chart radius when sampling the initial attitude.
pub const INIT_SAMPLE_MARGIN: f64 = 1e-6;

/// Transient window used by error summaries, in seconds from the start.
pub const TRANSIENT_WINDOW: f64 = 5.0;

/// The steady-state window is the last third of the run.
pub const STEADY_FRACTION: f64 = 1.0 / 3.0;

/// Angular velocity profile of the true attitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum OmegaProfile {
    /// `ω(t) = amplitude · (cos t, sin t, sin t)` rad/s.
    Oscillatory { amplitude: f64 },
    /// A fixed rate vector in rad/s (zero for a static attitude).
    Constant { rate: [f64; 3] },
}

impl Default for OmegaProfile {
    fn default() -> Self {
        OmegaProfile::Oscillatory { amplitude: 0.1 }
    }
}

impl OmegaProfile {
    pub fn rate_at(&self, t: f64) -> Vector3<f64> {
        match *self {
            OmegaProfile::Oscillatory { amplitude } => {
                Vector3::new(amplitude * t.cos(), amplitude * t.sin(), amplitude * t.sin())
            }
            OmegaProfile::Constant { rate } => Vector3::new(rate[0], rate[1], rate[2]),
        }
    }

    fn is_finite(&self) -> bool {
        match *self {
            OmegaProfile::Oscillatory { amplitude } => amplitude.is_finite(),
            OmegaProfile::Constant { rate } => rate.iter().all(|x| x.is_finite()),
        }
    }
}

/// Scenario parameters. The defaults reproduce the reference benchmark:
/// 50 Hz sampling for 30 s, oscillating rate of amplitude 0.1 rad/s, gyro
/// noise variance 0.02 (rad/s)² per axis, ambient direction-noise covariance
/// diag(0.01, 0.03, 0.05) rad², reference directions `(0, 1, 0)` and
/// `(1/√2, 0, 1/√2)`, and an initial attitude spread of (1.5 rad)² per axis
/// about the identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub dt: f64,
    pub duration: f64,
    pub omega_profile: OmegaProfile,
    pub gyro_var: f64,
    pub meas_cov_ambient: [[f64; 3]; 3],
    pub d1: [f64; 3],
    pub d2: [f64; 3],
    pub init_cov: [[f64; 3]; 3],
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            dt: 0.02,
            duration: 30.0,
            omega_profile: OmegaProfile::default(),
            gyro_var: 0.02,
            meas_cov_ambient: [[0.01, 0.0, 0.0], [0.0, 0.03, 0.0], [0.0, 0.0, 0.05]],
            d1: [0.0, 1.0, 0.0],
            d2: [std::f64::consts::FRAC_1_SQRT_2, 0.0, std::f64::consts::FRAC_1_SQRT_2],
            init_cov: [[2.25, 0.0, 0.0], [0.0, 2.25, 0.0], [0.0, 0.0, 2.25]],
            seed: 0,
        }
    }
}

/// Scenario validation failures, named by config field.
#[derive(Debug, Clone, Error)]
pub enum ScenarioError {
    #[error("scenario.{field}: {msg}")]
    Invalid { field: &'static str, msg: String },
}

fn invalid(field: &'static str, msg: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid {
        field,
        msg: msg.into(),
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if !self.dt.is_finite() || self.dt <= 0.0 {
            return Err(invalid("dt", format!("must be a positive duration, got {}", self.dt)));
        }
        if !self.duration.is_finite() || self.duration < self.dt {
            return Err(invalid(
                "duration",
                format!("must cover at least one step of {} s, got {}", self.dt, self.duration),
            ));
        }
        if !self.omega_profile.is_finite() {
            return Err(invalid("omega_profile", "rates must be finite"));
        }
        if !self.gyro_var.is_finite() || self.gyro_var < 0.0 {
            return Err(invalid("gyro_var", format!("must be ≥ 0, got {}", self.gyro_var)));
        }
        check_symmetric_psd(&self.meas_cov_matrix(), "meas_cov_ambient")?;
        let init = self.init_cov_matrix();
        check_symmetric_psd(&init, "init_cov")?;
        if init.cholesky().is_none() {
            return Err(invalid("init_cov", "must be strictly positive-definite for sampling"));
        }
        let d1 = self.d1_unit()?;
        let d2 = self.d2_unit()?;
        if d1.vector().cross(d2.vector()).norm() < 1e-9 {
            return Err(invalid(
                "d2",
                "reference directions are collinear; attitude is unobservable",
            ));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.duration / self.dt).round().max(1.0) as usize
    }

    pub fn meas_cov_matrix(&self) -> Matrix3<f64> {
        from_rows(&self.meas_cov_ambient)
    }

    pub fn init_cov_matrix(&self) -> Matrix3<f64> {
        from_rows(&self.init_cov)
    }

    pub fn d1_unit(&self) -> Result<UnitVector, ScenarioError> {
        UnitVector::new(Vector3::new(self.d1[0], self.d1[1], self.d1[2]))
            .map_err(|e| invalid("d1", e.to_string()))
    }

    pub fn d2_unit(&self) -> Result<UnitVector, ScenarioError> {
        UnitVector::new(Vector3::new(self.d2[0], self.d2[1], self.d2[2]))
            .map_err(|e| invalid("d2", e.to_string()))
    }
}

fn from_rows(rows: &[[f64; 3]; 3]) -> Matrix3<f64> {
    Matrix3::from_fn(|i, j| rows[i][j])
}

fn check_symmetric_psd(m: &Matrix3<f64>, field: &'static str) -> Result<(), ScenarioError> {
    if m.iter().any(|x| !x.is_finite()) {
        return Err(invalid(field, "entries must be finite"));
    }
    let asym = (m - m.transpose()).abs().max();
    if asym > 1e-9 {
        return Err(invalid(field, format!("must be symmetric (max asymmetry {asym:.3e})")));
    }
    let min_eig = m.symmetric_eigen().eigenvalues.min();
    if min_eig < -1e-9 {
        return Err(invalid(
            field,
            format!("must be positive semidefinite (eigenvalue {min_eig:.3e})"),
        ));
    }
    Ok(())
}

/// One sample of the true trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthSample {
    pub t: f64,
    pub attitude: Rotation,
    pub omega: Vector3<f64>,
}

/// One step of sensor data: the measured rate over `[t_k, t_{k+1})` and the
/// two direction observations taken at `t_{k+1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorSample {
    pub omega_meas: Vector3<f64>,
    pub y1: UnitVector,
    pub y2: UnitVector,
}

/// One recorded filter step.
#[derive(Debug, Clone, PartialEq)]
pub struct SimRecord {
    pub t: f64,
    pub variant: FilterVariant,
    pub run_id: u64,
    /// Geodesic distance between estimate and truth, in radians.
    pub attitude_error: f64,
    /// Normalized estimation energy of the truth under the filter density.
    pub energy: f64,
}

/// A single filtered trajectory. `failure` is set when a step aborted (chart
/// domain violations, covariance breakdown); the records up to the abort are
/// kept.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterRun {
    pub variant: FilterVariant,
    pub run_id: u64,
    pub records: Vec<SimRecord>,
    pub failure: Option<String>,
}

/// Per-run error/energy statistics over the standard windows.
#[derive(Debug, Clone, PartialEq)]
pub struct RunStats {
    pub run_id: u64,
    pub transient_error_mean: f64,
    pub steady_error_mean: f64,
    pub energy_mean: f64,
    pub failed: bool,
}

/// Per-variant aggregates over a Monte Carlo batch. Time-indexed vectors run
/// over the shared timestamps and average completed runs only.
#[derive(Debug, Clone, PartialEq)]
pub struct VariantSummary {
    pub variant: FilterVariant,
    pub label: String,
    pub mean_error: Vec<f64>,
    pub median_error: Vec<f64>,
    pub mean_energy: Vec<f64>,
    pub per_run: Vec<RunStats>,
    pub transient_error_mean: f64,
    pub steady_error_mean: f64,
    pub energy_mean: f64,
    pub failures: usize,
}

/// A full Monte Carlo batch: all runs (ordered by variant label, then run id)
/// plus per-variant summaries in the caller's variant order.
#[derive(Debug, Clone, PartialEq)]
pub struct McBatch {
    pub times: Vec<f64>,
    pub runs: Vec<FilterRun>,
    pub summaries: Vec<VariantSummary>,
}

/// Derives the generator for `(seed, run_id)`. The 256-bit key is expanded
/// with splitmix64 from `seed ⊕ (run_id · odd-constant)`, so distinct pairs
/// get distinct, uncorrelated streams and results never depend on thread
/// scheduling.
pub fn run_rng(seed: u64, run_id: u64) -> ChaCha12Rng {
    let mut state = seed ^ run_id.wrapping_mul(0xA24B_AED4_963E_E407);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha12Rng::from_seed(key)
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Integrates the true attitude: `R_{k+1} = proj(R_k · exp(δt · ω(t_k)))`,
/// starting at the identity, with a polar projection absorbing Euler drift.
pub fn simulate_truth(cfg: &ScenarioConfig) -> Vec<TruthSample> {
    let steps = cfg.steps();
    let mut out = Vec::with_capacity(steps + 1);
    let mut attitude = Rotation::identity();
    out.push(TruthSample {
        t: 0.0,
        attitude,
        omega: cfg.omega_profile.rate_at(0.0),
    });
    for k in 0..steps {
        let t = k as f64 * cfg.dt;
        let omega = cfg.omega_profile.rate_at(t);
        attitude = attitude.compose(&so3_exp(&(omega * cfg.dt))).renormalized();
        let t_next = (k + 1) as f64 * cfg.dt;
        out.push(TruthSample {
            t: t_next,
            attitude,
            omega: cfg.omega_profile.rate_at(t_next),
        });
    }
    out
}

fn normal3(rng: &mut ChaCha12Rng) -> Vector3<f64> {
    Vector3::new(
        rng.sample::<f64, _>(StandardNormal),
        rng.sample::<f64, _>(StandardNormal),
        rng.sample::<f64, _>(StandardNormal),
    )
}

/// Symmetric PSD square root used to sample ambient noise (supports
/// semidefinite covariances, unlike a Cholesky factor).
fn psd_sqrt(m: &Matrix3<f64>) -> Matrix3<f64> {
    let eig = m.symmetric_eigen();
    let mut out = Matrix3::zeros();
    for i in 0..3 {
        let l = eig.eigenvalues[i].max(0.0).sqrt();
        let v = eig.eigenvectors.column(i);
        out += l * v * v.transpose();
    }
    out
}

fn perturb_direction(
    p_true: UnitVector,
    sqrt_amb: &Matrix3<f64>,
    rng: &mut ChaCha12Rng,
) -> Result<UnitVector, FilterError> {
    let nu = sqrt_amb * normal3(rng);
    let v = tangent_basis(&p_true).transpose() * nu;
    Ok(sphere_exp(&p_true, &v)?)
}

/// Draws the measured rates and the perturbed direction observations for the
/// whole trajectory. The gyro measures `ω(t_k)` plus white noise; directions
/// observe the next-step attitude (they are processed after the prediction).
pub fn simulate_sensors(
    truth: &[TruthSample],
    cfg: &ScenarioConfig,
    rng: &mut ChaCha12Rng,
) -> Result<Vec<SensorSample>, ScenarioError> {
    let d1 = cfg.d1_unit()?;
    let d2 = cfg.d2_unit()?;
    let gyro_std = cfg.gyro_var.sqrt();
    let sqrt_amb = psd_sqrt(&cfg.meas_cov_matrix());
    let mut out = Vec::with_capacity(truth.len().saturating_sub(1));
    for k in 0..truth.len().saturating_sub(1) {
        let omega_meas = truth[k].omega + gyro_std * normal3(rng);
        let next = &truth[k + 1].attitude;
        let p1 = UnitVector::new(next.inverse_apply(d1.vector())).expect("rotated unit vector");
        let p2 = UnitVector::new(next.inverse_apply(d2.vector())).expect("rotated unit vector");
        let y1 = perturb_direction(p1, &sqrt_amb, rng)
            .map_err(|e| invalid("meas_cov_ambient", format!("direction perturbation failed: {e}")))?;
        let y2 = perturb_direction(p2, &sqrt_amb, rng)
            .map_err(|e| invalid("meas_cov_ambient", format!("direction perturbation failed: {e}")))?;
        out.push(SensorSample { omega_meas, y1, y2 });
    }
    Ok(out)
}

/// Rejection-samples the initial tangent error inside the chart radius; the
/// filter's initial density is the same Gaussian restricted to its chart.
fn sample_initial_tangent(
    chol_l: &Matrix3<f64>,
    rng: &mut ChaCha12Rng,
) -> Result<Vector3<f64>, String> {
    for _ in 0..10_000 {
        let v = chol_l * normal3(rng);
        if v.norm() < std::f64::consts::PI - INIT_SAMPLE_MARGIN {
            return Ok(v);
        }
    }
    Err("initial attitude sampling kept leaving the chart; init_cov is too wide".to_string())
}

struct RunInputs {
    init_attitude: Rotation,
    sensors: Vec<SensorSample>,
}

fn draw_run_inputs(
    truth: &[TruthSample],
    cfg: &ScenarioConfig,
    rng: &mut ChaCha12Rng,
) -> Result<RunInputs, String> {
    let chol_l = cfg
        .init_cov_matrix()
        .cholesky()
        .ok_or_else(|| "init_cov lost definiteness".to_string())?
        .l();
    let v = sample_initial_tangent(&chol_l, rng)?;
    let init_attitude = so3_exp(&v);
    let sensors = simulate_sensors(truth, cfg, rng).map_err(|e| e.to_string())?;
    Ok(RunInputs {
        init_attitude,
        sensors,
    })
}

/// Tangent-space measurement covariance at an output pair: the ambient
/// covariance projected onto each sphere's basis, plus the SPD floor. The
/// filter evaluates this wherever its update anchors the noise.
fn projected_meas_cov(q_amb: &Matrix3<f64>, p1: &UnitVector, p2: &UnitVector) -> DMatrix<f64> {
    let mut q = DMatrix::zeros(4, 4);
    for (idx, p) in [p1, p2].into_iter().enumerate() {
        let b: Matrix3x2<f64> = tangent_basis(p);
        let block = b.transpose() * q_amb * b;
        for i in 0..2 {
            for j in 0..2 {
                q[(2 * idx + i, 2 * idx + j)] = block[(i, j)];
            }
        }
    }
    for i in 0..4 {
        q[(i, i)] += MEAS_NOISE_FLOOR;
    }
    q
}

fn run_filter_on(
    cfg: &ScenarioConfig,
    variant: FilterVariant,
    run_id: u64,
    truth: &[TruthSample],
    inputs: &RunInputs,
) -> FilterRun {
    let so3 = So3;
    let output = Product::new(vec![Sphere, Sphere]);
    let d1 = *cfg.d1_unit().expect("validated").vector();
    let d2 = *cfg.d2_unit().expect("validated").vector();
    let dt = cfg.dt;
    let q_amb = cfg.meas_cov_matrix();

    let system = SystemModel::new(
        move |r: &Rotation, u: &DVector<f64>| {
            let w = Vector3::new(u[0], u[1], u[2]) * dt;
            r.compose(&so3_exp(&w)).renormalized()
        },
        DMatrix::from_diagonal_element(3, 3, cfg.gyro_var),
        DMatrix::from_diagonal_element(3, 3, PROCESS_NOISE_FLOOR),
    )
    .expect("gyro covariance is PSD");
    let measurement = MeasurementModel::new(
        move |r: &Rotation| {
            vec![
                UnitVector::new(r.inverse_apply(&d1)).expect("rotated unit vector"),
                UnitVector::new(r.inverse_apply(&d2)).expect("rotated unit vector"),
            ]
        },
        DMatrix::identity(4, 4),
    )
    .expect("placeholder covariance is SPD")
    .with_cov_at(move |pts: &Vec<UnitVector>| projected_meas_cov(&q_amb, &pts[0], &pts[1]));
    let ekf = ManifoldEkf::new(&so3, &output, system, measurement);

    let mut records = Vec::with_capacity(truth.len());
    let mut failure = None;

    let init_cov = DMatrix::from_fn(3, 3, |i, j| cfg.init_cov[i][j]);
    let mut state = match ConcentratedGaussian::new(
        &so3,
        inputs.init_attitude,
        DVector::zeros(3),
        init_cov,
    ) {
        Ok(s) => s,
        Err(e) => {
            return FilterRun {
                variant,
                run_id,
                records,
                failure: Some(format!("initialization: {e}")),
            }
        }
    };

    match record_step(&so3, &state, &truth[0], variant, run_id) {
        Ok(rec) => records.push(rec),
        Err(e) => failure = Some(format!("t=0: {e}")),
    }

    if failure.is_none() {
        for (k, sensor) in inputs.sensors.iter().enumerate() {
            let step = || -> Result<(ConcentratedGaussian<Rotation>, SimRecord), FilterError> {
                let u = DVector::from_column_slice(sensor.omega_meas.as_slice());
                let predicted = ekf.predict(&state, &u)?;
                let y = vec![sensor.y1, sensor.y2];
                let truth_point = truth[k + 1].attitude;
                let truth_arg = match variant.update {
                    UpdateVariant::TrueOutput => Some(&truth_point),
                    _ => None,
                };
                let updated = ekf.update(&predicted, &y, variant.update, truth_arg)?;
                let reset = ekf.reset(&updated, variant.geometric_reset)?;
                let rec = record_step(&so3, &reset, &truth[k + 1], variant, run_id)?;
                Ok((reset, rec))
            };
            match step() {
                Ok((next, rec)) => {
                    state = next;
                    records.push(rec);
                }
                Err(e) => {
                    failure = Some(format!("t={:.3}: {e}", truth[k + 1].t));
                    break;
                }
            }
        }
    }

    FilterRun {
        variant,
        run_id,
        records,
        failure,
    }
}

fn record_step(
    so3: &So3,
    state: &ConcentratedGaussian<Rotation>,
    truth: &TruthSample,
    variant: FilterVariant,
    run_id: u64,
) -> Result<SimRecord, FilterError> {
    Ok(SimRecord {
        t: truth.t,
        variant,
        run_id,
        attitude_error: state.base().angle_to(&truth.attitude),
        energy: filter_energy(so3, state, &truth.attitude)?,
    })
}

/// Simulates truth and sensors from `rng` and filters them once (run id 0).
pub fn run_filter(
    cfg: &ScenarioConfig,
    variant: FilterVariant,
    rng: &mut ChaCha12Rng,
) -> Result<FilterRun, ScenarioError> {
    cfg.validate()?;
    let truth = simulate_truth(cfg);
    match draw_run_inputs(&truth, cfg, rng) {
        Ok(inputs) => Ok(run_filter_on(cfg, variant, 0, &truth, &inputs)),
        Err(msg) => Ok(FilterRun {
            variant,
            run_id: 0,
            records: Vec::new(),
            failure: Some(msg),
        }),
    }
}

/// Runs `runs` paired realizations of every variant in parallel and
/// aggregates. Results are independent of the worker-thread count: runs are
/// seeded by id and reductions happen in a fixed order afterwards.
pub fn monte_carlo(
    cfg: &ScenarioConfig,
    variants: &[FilterVariant],
    runs: u64,
) -> Result<McBatch, ScenarioError> {
    cfg.validate()?;
    let truth = simulate_truth(cfg);
    let times: Vec<f64> = truth.iter().map(|s| s.t).collect();

    let per_run: Vec<Vec<FilterRun>> = (0..runs)
        .into_par_iter()
        .map(|run_id| {
            let mut rng = run_rng(cfg.seed, run_id);
            match draw_run_inputs(&truth, cfg, &mut rng) {
                Ok(inputs) => variants
                    .iter()
                    .map(|&variant| run_filter_on(cfg, variant, run_id, &truth, &inputs))
                    .collect(),
                Err(msg) => variants
                    .iter()
                    .map(|&variant| FilterRun {
                        variant,
                        run_id,
                        records: Vec::new(),
                        failure: Some(msg.clone()),
                    })
                    .collect(),
            }
        })
        .collect();

    let mut all_runs: Vec<FilterRun> = per_run.into_iter().flatten().collect();
    let summaries = variants
        .iter()
        .map(|&variant| summarize_variant(variant, &all_runs, &times, cfg))
        .collect();
    all_runs.sort_by(|a, b| {
        (a.variant.label(), a.run_id).cmp(&(b.variant.label(), b.run_id))
    });

    Ok(McBatch {
        times,
        runs: all_runs,
        summaries,
    })
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut count = 0usize;
    for v in values {
        sum += v;
        count += 1;
    }
    if count == 0 {
        f64::NAN
    } else {
        sum / count as f64
    }
}

fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

fn run_stats(run: &FilterRun, horizon: f64, complete: bool) -> RunStats {
    let transient = mean(
        run.records
            .iter()
            .filter(|r| r.t <= TRANSIENT_WINDOW + 1e-9)
            .map(|r| r.attitude_error),
    );
    let steady_start = horizon * (1.0 - STEADY_FRACTION);
    let steady = mean(
        run.records
            .iter()
            .filter(|r| r.t >= steady_start - 1e-9)
            .map(|r| r.attitude_error),
    );
    let energy = mean(run.records.iter().map(|r| r.energy));
    RunStats {
        run_id: run.run_id,
        transient_error_mean: transient,
        steady_error_mean: steady,
        energy_mean: energy,
        failed: !complete,
    }
}

fn summarize_variant(
    variant: FilterVariant,
    all_runs: &[FilterRun],
    times: &[f64],
    cfg: &ScenarioConfig,
) -> VariantSummary {
    let horizon = cfg.steps() as f64 * cfg.dt;
    let runs: Vec<&FilterRun> = all_runs.iter().filter(|r| r.variant == variant).collect();
    let complete: Vec<&&FilterRun> = runs
        .iter()
        .filter(|r| r.failure.is_none() && r.records.len() == times.len())
        .collect();

    let mut mean_error = Vec::with_capacity(times.len());
    let mut median_error = Vec::with_capacity(times.len());
    let mut mean_energy = Vec::with_capacity(times.len());
    for ti in 0..times.len() {
        mean_error.push(mean(complete.iter().map(|r| r.records[ti].attitude_error)));
        let mut errs: Vec<f64> = complete.iter().map(|r| r.records[ti].attitude_error).collect();
        median_error.push(median(&mut errs));
        mean_energy.push(mean(complete.iter().map(|r| r.records[ti].energy)));
    }

    let per_run: Vec<RunStats> = runs
        .iter()
        .map(|r| {
            let is_complete = r.failure.is_none() && r.records.len() == times.len();
            run_stats(r, horizon, is_complete)
        })
        .collect();
    let ok = |s: &&RunStats| !s.failed;
    VariantSummary {
        variant,
        label: variant.label(),
        transient_error_mean: mean(per_run.iter().filter(ok).map(|s| s.transient_error_mean)),
        steady_error_mean: mean(per_run.iter().filter(ok).map(|s| s.steady_error_mean)),
        energy_mean: mean(per_run.iter().filter(ok).map(|s| s.energy_mean)),
        failures: per_run.iter().filter(|s| s.failed).count(),
        mean_error,
        median_error,
        mean_energy,
        per_run,
    }
}
