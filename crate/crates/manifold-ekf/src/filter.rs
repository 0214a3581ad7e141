//! Error-state extended Kalman filtering with transport-aware updates.
//!
//! State density: a concentrated Gaussian `(ξ̂, μ, Σ)`, i.e. the pushforward of
//! `N(μ, Σ)` through the chart at the base point `ξ̂`. Prediction and update
//! expect `μ = 0` (call [`ManifoldEkf::reset`] after an update); the update
//! returns a nonzero `μ` and leaves moving the base point to the reset, where
//! the covariance can be parallel-transported along with it.
//!
//! The update variants differ only in where the measurement covariance `Q` is
//! anchored before the gain is formed:
//!
//! * `Baseline`: `Q` is read at the predicted output `ŷ` as-is.
//! * `TrueOutput`: `Q` is anchored at the output of the true state and
//!   transported to `ŷ`. Not realizable outside simulation; it is the
//!   reference the other variants are judged against and must be explicitly
//!   opted into by passing the true state.
//! * `Measurement`: `Q` is anchored at the received measurement `y`.
//! * `NaivePosterior`: one baseline pass produces a posterior mean; `Q` is
//!   anchored at the output re-predicted there.
//! * `Iterated(n)`: the re-anchoring is repeated `n` times, each time
//!   transporting the original `Q` from the latest re-predicted output (the
//!   transports are recomputed, never stacked). The innovation and output
//!   matrix are formed once and reused across iterations; only the gain
//!   changes. `Iterated(0)` is exactly `Baseline`, `Iterated(1)` exactly
//!   `NaivePosterior`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{fd_jacobian, ChartedManifold, FdScheme, GeometryError};
use crate::linalg;
use crate::manifolds::euclidean::Euclidean;

/// Errors raised by filter operations.
#[derive(Debug, Clone, Error)]
pub enum FilterError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    /// The innovation covariance could not be solved to working precision.
    #[error("innovation covariance solve failed: {0}")]
    SingularInnovation(String),
    /// Predict and update require a reset (zero-mean) state.
    #[error("state mean must be zero before predict/update; apply reset first")]
    NonzeroPriorMean,
    /// The true-output variant was requested without the true state.
    #[error("the true-output update variant requires the true state")]
    MissingTruth,
}

/// A Gaussian in the tangent space at a base point: mean `μ`, covariance `Σ`,
/// both in chart coordinates at `base`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConcentratedGaussian<P> {
    base: P,
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

impl<P: Clone + std::fmt::Debug> ConcentratedGaussian<P> {
    /// Validates dimensions, finiteness, `|mean|` against the injectivity
    /// radius, and that `cov` is symmetric positive-definite.
    pub fn new<M>(
        manifold: &M,
        base: P,
        mean: DVector<f64>,
        cov: DMatrix<f64>,
    ) -> Result<Self, FilterError>
    where
        M: ChartedManifold<Point = P>,
    {
        let n = manifold.dim();
        if mean.len() != n {
            return Err(GeometryError::DimensionMismatch {
                expected: n,
                actual: mean.len(),
            }
            .into());
        }
        if mean.iter().any(|x| !x.is_finite()) {
            return Err(GeometryError::NonFinite("state mean".to_string()).into());
        }
        if mean.norm() >= manifold.injectivity_radius() {
            return Err(GeometryError::ChartDomain(format!(
                "state mean norm {} reaches the injectivity radius",
                mean.norm()
            ))
            .into());
        }
        if cov.nrows() != n || cov.ncols() != n {
            return Err(GeometryError::DimensionMismatch {
                expected: n,
                actual: cov.nrows(),
            }
            .into());
        }
        linalg::spd_cholesky(&cov, "state covariance")?;
        Ok(Self { base, mean, cov })
    }

    pub fn base(&self) -> &P {
        &self.base
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn into_parts(self) -> (P, DVector<f64>, DMatrix<f64>) {
        (self.base, self.mean, self.cov)
    }
}

type DynamicsFn<'a, P> = Box<dyn Fn(&P, &DVector<f64>) -> P + 'a>;
type DynamicsJacobianFn<'a, P> = Box<dyn Fn(&P, &DVector<f64>) -> DMatrix<f64> + 'a>;
type OutputFn<'a, P, Y> = Box<dyn Fn(&P) -> Y + 'a>;
type PointJacobianFn<'a, P> = Box<dyn Fn(&P) -> DMatrix<f64> + 'a>;
type AnchoredCovFn<'a, Y> = Box<dyn Fn(&Y) -> DMatrix<f64> + 'a>;

/// Discrete-time dynamics `ξ⁺ = F(ξ, u)` with input noise covariance `R^I`
/// (entering through the input Jacobian) and additive tangent-space process
/// noise `R^P`. Jacobians are finite-differenced through the charts unless
/// analytic providers are supplied.
pub struct SystemModel<'a, M: ChartedManifold> {
    f: DynamicsFn<'a, M::Point>,
    input_cov: DMatrix<f64>,
    process_cov: DMatrix<f64>,
    state_jacobian: Option<DynamicsJacobianFn<'a, M::Point>>,
    input_jacobian: Option<DynamicsJacobianFn<'a, M::Point>>,
}

impl<'a, M: ChartedManifold> SystemModel<'a, M> {
    /// `input_cov` and `process_cov` must be symmetric positive-semidefinite.
    pub fn new(
        f: impl Fn(&M::Point, &DVector<f64>) -> M::Point + 'a,
        input_cov: DMatrix<f64>,
        process_cov: DMatrix<f64>,
    ) -> Result<Self, FilterError> {
        check_psd(&input_cov, "input covariance")?;
        check_psd(&process_cov, "process covariance")?;
        Ok(Self {
            f: Box::new(f),
            input_cov,
            process_cov,
            state_jacobian: None,
            input_jacobian: None,
        })
    }

    /// Analytic chart Jacobian of `ξ ↦ F(ξ, u)`, replacing finite differences.
    pub fn with_state_jacobian(
        mut self,
        jac: impl Fn(&M::Point, &DVector<f64>) -> DMatrix<f64> + 'a,
    ) -> Self {
        self.state_jacobian = Some(Box::new(jac));
        self
    }

    /// Analytic chart Jacobian of `u ↦ F(ξ, u)`, replacing finite differences.
    pub fn with_input_jacobian(
        mut self,
        jac: impl Fn(&M::Point, &DVector<f64>) -> DMatrix<f64> + 'a,
    ) -> Self {
        self.input_jacobian = Some(Box::new(jac));
        self
    }

    pub fn dynamics(&self, xi: &M::Point, u: &DVector<f64>) -> M::Point {
        (self.f)(xi, u)
    }

    pub fn input_cov(&self) -> &DMatrix<f64> {
        &self.input_cov
    }

    pub fn process_cov(&self) -> &DMatrix<f64> {
        &self.process_cov
    }
}

fn check_psd(m: &DMatrix<f64>, what: &str) -> Result<(), FilterError> {
    linalg::check_symmetric(m, what)?;
    let min = m.clone().symmetric_eigen().eigenvalues.min();
    let scale = m.iter().fold(1.0f64, |acc, x| acc.max(x.abs()));
    if min < -1e-9 * scale {
        return Err(GeometryError::NotSpd(format!(
            "{what} has negative eigenvalue {min:.3e}"
        ))
        .into());
    }
    Ok(())
}

/// Measurement map `y = h(ξ) ⊞ ν` on an output manifold, with `ν` a
/// concentrated Gaussian noise of covariance `Q` in the chart at `h(ξ)`.
pub struct MeasurementModel<'a, M: ChartedManifold, N: ChartedManifold> {
    h: OutputFn<'a, M::Point, N::Point>,
    meas_cov: DMatrix<f64>,
    output_jacobian: Option<PointJacobianFn<'a, M::Point>>,
    cov_at: Option<AnchoredCovFn<'a, N::Point>>,
}

impl<'a, M: ChartedManifold, N: ChartedManifold> MeasurementModel<'a, M, N> {
    /// `meas_cov` must be symmetric positive-definite.
    pub fn new(
        h: impl Fn(&M::Point) -> N::Point + 'a,
        meas_cov: DMatrix<f64>,
    ) -> Result<Self, FilterError> {
        linalg::spd_cholesky(&meas_cov, "measurement covariance")?;
        Ok(Self {
            h: Box::new(h),
            meas_cov,
            output_jacobian: None,
            cov_at: None,
        })
    }

    /// Analytic chart Jacobian of `h`, replacing finite differences.
    pub fn with_output_jacobian(
        mut self,
        jac: impl Fn(&M::Point) -> DMatrix<f64> + 'a,
    ) -> Self {
        self.output_jacobian = Some(Box::new(jac));
        self
    }

    /// Point-dependent measurement covariance. When set, the filter evaluates
    /// `Q` in the chart at whichever output point anchors the noise — the
    /// predicted output for the baseline update, the anchor point for the
    /// transported variants — instead of reusing the fixed `meas_cov`. The
    /// provider must return a symmetric positive-definite matrix of the output
    /// dimension at every point it is called on.
    pub fn with_cov_at(mut self, cov_at: impl Fn(&N::Point) -> DMatrix<f64> + 'a) -> Self {
        self.cov_at = Some(Box::new(cov_at));
        self
    }

    pub fn output(&self, xi: &M::Point) -> N::Point {
        (self.h)(xi)
    }

    pub fn meas_cov(&self) -> &DMatrix<f64> {
        &self.meas_cov
    }

    /// Replaces the measurement covariance; used when `Q` is state-dependent
    /// and recomputed per step.
    pub fn set_meas_cov(&mut self, meas_cov: DMatrix<f64>) -> Result<(), FilterError> {
        linalg::spd_cholesky(&meas_cov, "measurement covariance")?;
        self.meas_cov = meas_cov;
        Ok(())
    }

    /// The covariance anchored at `point`: the provider's value when one is
    /// set, the fixed `meas_cov` otherwise.
    fn cov_anchored_at(&self, point: &N::Point) -> Result<DMatrix<f64>, FilterError> {
        match &self.cov_at {
            Some(provider) => {
                let q = provider(point);
                linalg::check_symmetric(&q, "anchored measurement covariance")?;
                Ok(q)
            }
            None => Ok(self.meas_cov.clone()),
        }
    }
}

/// Where the measurement covariance is anchored before the Kalman gain forms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UpdateVariant {
    Baseline,
    TrueOutput,
    Measurement,
    NaivePosterior,
    Iterated(usize),
}

/// An update variant plus the choice of covariance handling at reset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterVariant {
    pub update: UpdateVariant,
    pub geometric_reset: bool,
}

impl FilterVariant {
    /// The update paired with a chart-fixed (covariance-preserving) reset.
    pub fn flat(update: UpdateVariant) -> Self {
        Self {
            update,
            geometric_reset: false,
        }
    }

    /// The update paired with the parallel-transport reset.
    pub fn geometric(update: UpdateVariant) -> Self {
        Self {
            update,
            geometric_reset: true,
        }
    }

    pub fn label(&self) -> String {
        let name = match self.update {
            UpdateVariant::Baseline => "baseline".to_string(),
            UpdateVariant::TrueOutput => "true-output".to_string(),
            UpdateVariant::Measurement => "measurement".to_string(),
            UpdateVariant::NaivePosterior => "naive-posterior".to_string(),
            UpdateVariant::Iterated(n) => format!("iterated-{n}"),
        };
        if self.geometric_reset {
            format!("{name}+reset")
        } else {
            name
        }
    }
}

impl std::fmt::Display for FilterVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.label())
    }
}

/// Numerical knobs. Central differences are the default; the optional
/// iterated-update tolerance short-circuits re-anchoring when consecutive
/// posterior means agree to `tol` (disabled unless set).
#[derive(Debug, Clone, Copy)]
pub struct FilterOptions {
    pub fd_scheme: FdScheme,
    pub fd_step: f64,
    pub iterated_tolerance: Option<f64>,
}

impl Default for FilterOptions {
    fn default() -> Self {
        Self {
            fd_scheme: FdScheme::Central,
            fd_step: crate::geometry::DEFAULT_FD_STEP_CENTRAL,
            iterated_tolerance: None,
        }
    }
}

/// The filter: a state manifold, an output manifold, and the two models.
pub struct ManifoldEkf<'a, M: ChartedManifold, N: ChartedManifold> {
    state_space: &'a M,
    output_space: &'a N,
    system: SystemModel<'a, M>,
    measurement: MeasurementModel<'a, M, N>,
    options: FilterOptions,
}

impl<'a, M: ChartedManifold, N: ChartedManifold> ManifoldEkf<'a, M, N> {
    pub fn new(
        state_space: &'a M,
        output_space: &'a N,
        system: SystemModel<'a, M>,
        measurement: MeasurementModel<'a, M, N>,
    ) -> Self {
        Self {
            state_space,
            output_space,
            system,
            measurement,
            options: FilterOptions::default(),
        }
    }

    pub fn with_options(mut self, options: FilterOptions) -> Self {
        self.options = options;
        self
    }

    pub fn system(&self) -> &SystemModel<'a, M> {
        &self.system
    }

    pub fn measurement(&self) -> &MeasurementModel<'a, M, N> {
        &self.measurement
    }

    /// See [`MeasurementModel::set_meas_cov`].
    pub fn set_meas_cov(&mut self, meas_cov: DMatrix<f64>) -> Result<(), FilterError> {
        self.measurement.set_meas_cov(meas_cov)
    }

    /// Effective process noise at `(ξ, u)`: `R = R^P + B R^I Bᵀ`, where `B` is
    /// the input Jacobian of the dynamics through the charts.
    pub fn combine_noise(&self, xi: &M::Point, u: &DVector<f64>) -> Result<DMatrix<f64>, FilterError> {
        self.check_input(u)?;
        let b = match &self.system.input_jacobian {
            Some(jac) => jac(xi, u),
            None => {
                let input_space = Euclidean::new(u.len());
                fd_jacobian(
                    &input_space,
                    self.state_space,
                    |uu| (self.system.f)(xi, uu),
                    u,
                    self.options.fd_step,
                    self.options.fd_scheme,
                )?
            }
        };
        let projected = &b * &self.system.input_cov * b.transpose();
        Ok(linalg::symmetrize(&(&self.system.process_cov + projected)))
    }

    /// Propagates a reset state through the dynamics: the base moves to
    /// `F(ξ̂, u)` and the covariance follows `Σ⁺ = A Σ Aᵀ + R` with `A` the
    /// chart Jacobian of the dynamics.
    pub fn predict(
        &self,
        state: &ConcentratedGaussian<M::Point>,
        u: &DVector<f64>,
    ) -> Result<ConcentratedGaussian<M::Point>, FilterError> {
        require_zero_mean(state)?;
        self.check_input(u)?;
        let new_base = (self.system.f)(state.base(), u);
        let a = match &self.system.state_jacobian {
            Some(jac) => jac(state.base(), u),
            None => fd_jacobian(
                self.state_space,
                self.state_space,
                |p| (self.system.f)(p, u),
                state.base(),
                self.options.fd_step,
                self.options.fd_scheme,
            )?,
        };
        let r = self.combine_noise(state.base(), u)?;
        let propagated = &a * state.cov() * a.transpose() + r;
        let cov = linalg::ensure_spd(&linalg::symmetrize(&propagated), "predicted covariance");
        ConcentratedGaussian::new(
            self.state_space,
            new_base,
            DVector::zeros(self.state_space.dim()),
            cov,
        )
    }

    /// Innovation `y ⊟ ŷ` in the chart at the predicted output.
    pub fn innovation(
        &self,
        xi_hat: &M::Point,
        y: &N::Point,
    ) -> Result<DVector<f64>, FilterError> {
        let y_hat = (self.measurement.h)(xi_hat);
        Ok(self.output_space.boxminus(y, &y_hat)?)
    }

    /// Chart Jacobian of the output map at `ξ̂`.
    pub fn output_matrix(&self, xi_hat: &M::Point) -> Result<DMatrix<f64>, FilterError> {
        match &self.measurement.output_jacobian {
            Some(jac) => Ok(jac(xi_hat)),
            None => Ok(fd_jacobian(
                self.state_space,
                self.output_space,
                |p| (self.measurement.h)(p),
                xi_hat,
                self.options.fd_step,
                self.options.fd_scheme,
            )?),
        }
    }

    /// The measurement covariance anchored at `anchor` and parallel-transported
    /// to the predicted output along the connecting geodesic.
    pub fn transported_meas_cov(
        &self,
        anchor: &N::Point,
        y_hat: &N::Point,
    ) -> Result<DMatrix<f64>, FilterError> {
        let q = self.measurement.cov_anchored_at(anchor)?;
        let geodesic = self.output_space.boxminus(y_hat, anchor)?;
        let transport = self.output_space.transport(anchor, &geodesic)?;
        Ok(transport.transport_covariance(&q)?)
    }

    /// One measurement update. `truth` must be given exactly when `variant` is
    /// [`UpdateVariant::TrueOutput`] (it is ignored otherwise). The returned
    /// state keeps the prior base point and carries the posterior mean; apply
    /// [`ManifoldEkf::reset`] to move the base.
    pub fn update(
        &self,
        state: &ConcentratedGaussian<M::Point>,
        y: &N::Point,
        variant: UpdateVariant,
        truth: Option<&M::Point>,
    ) -> Result<ConcentratedGaussian<M::Point>, FilterError> {
        require_zero_mean(state)?;
        let y_hat = (self.measurement.h)(state.base());
        let c = self.output_matrix(state.base())?;
        let innov = self.output_space.boxminus(y, &y_hat)?;
        let q = match variant {
            UpdateVariant::Baseline => self.measurement.cov_anchored_at(&y_hat)?,
            UpdateVariant::TrueOutput => {
                let truth = truth.ok_or(FilterError::MissingTruth)?;
                let anchor = (self.measurement.h)(truth);
                self.transported_meas_cov(&anchor, &y_hat)?
            }
            UpdateVariant::Measurement => self.transported_meas_cov(y, &y_hat)?,
            UpdateVariant::NaivePosterior => {
                let q0 = self.measurement.cov_anchored_at(&y_hat)?;
                let (_, mu) = self.gain_and_mean(state.cov(), &c, &q0, &innov)?;
                let reanchored = self.state_space.boxplus(state.base(), &mu)?;
                let anchor = (self.measurement.h)(&reanchored);
                self.transported_meas_cov(&anchor, &y_hat)?
            }
            UpdateVariant::Iterated(n) => {
                let mut q_cur = self.measurement.cov_anchored_at(&y_hat)?;
                let mut prev_mu: Option<DVector<f64>> = None;
                for _ in 0..n {
                    let (_, mu) = self.gain_and_mean(state.cov(), &c, &q_cur, &innov)?;
                    if let (Some(tol), Some(prev)) = (self.options.iterated_tolerance, &prev_mu) {
                        if (&mu - prev).norm() < tol {
                            break;
                        }
                    }
                    let reanchored = self.state_space.boxplus(state.base(), &mu)?;
                    let anchor = (self.measurement.h)(&reanchored);
                    q_cur = self.transported_meas_cov(&anchor, &y_hat)?;
                    prev_mu = Some(mu);
                }
                q_cur
            }
        };
        let (k, mu) = self.gain_and_mean(state.cov(), &c, &q, &innov)?;
        let n = self.state_space.dim();
        let i_kc = DMatrix::identity(n, n) - &k * &c;
        let cov = linalg::ensure_spd(
            &linalg::symmetrize(&(i_kc * state.cov())),
            "posterior covariance",
        );
        ConcentratedGaussian::new(self.state_space, state.base().clone(), mu, cov)
    }

    /// Moves the base point along the posterior mean and zeroes it. With
    /// `geometric` set, the covariance is parallel-transported along the same
    /// geodesic; otherwise it is reused in the new chart unchanged.
    pub fn reset(
        &self,
        state: &ConcentratedGaussian<M::Point>,
        geometric: bool,
    ) -> Result<ConcentratedGaussian<M::Point>, FilterError> {
        let new_base = self.state_space.boxplus(state.base(), state.mean())?;
        let cov = if geometric {
            let transport = self.state_space.transport(state.base(), state.mean())?;
            transport.transport_covariance(state.cov())?
        } else {
            state.cov().clone()
        };
        ConcentratedGaussian::new(
            self.state_space,
            new_base,
            DVector::zeros(self.state_space.dim()),
            cov,
        )
    }

    fn check_input(&self, u: &DVector<f64>) -> Result<(), FilterError> {
        if u.len() != self.system.input_cov.nrows() {
            return Err(GeometryError::DimensionMismatch {
                expected: self.system.input_cov.nrows(),
                actual: u.len(),
            }
            .into());
        }
        if u.iter().any(|x| !x.is_finite()) {
            return Err(GeometryError::NonFinite("input vector".to_string()).into());
        }
        if self.system.process_cov.nrows() != self.state_space.dim() {
            return Err(GeometryError::DimensionMismatch {
                expected: self.state_space.dim(),
                actual: self.system.process_cov.nrows(),
            }
            .into());
        }
        Ok(())
    }

    /// Kalman gain and posterior mean for a given anchored `Q`. Factored out
    /// so every variant runs the same floating-point path.
    fn gain_and_mean(
        &self,
        sigma: &DMatrix<f64>,
        c: &DMatrix<f64>,
        q: &DMatrix<f64>,
        innov: &DVector<f64>,
    ) -> Result<(DMatrix<f64>, DVector<f64>), FilterError> {
        let s = linalg::symmetrize(&(c * sigma * c.transpose() + q));
        let chol = linalg::spd_cholesky_with_pivot(&s, linalg::MIN_PIVOT, "innovation covariance")
            .map_err(|e| FilterError::SingularInnovation(e.to_string()))?;
        // K = Σ Cᵀ S⁻¹, computed as (S⁻¹ C Σ)ᵀ through the factorization.
        let k = chol.solve(&(c * sigma)).transpose();
        let mu = &k * innov;
        Ok((k, mu))
    }
}

fn require_zero_mean<P: Clone + std::fmt::Debug>(
    state: &ConcentratedGaussian<P>,
) -> Result<(), FilterError> {
    if state.mean().iter().any(|&x| x != 0.0) {
        return Err(FilterError::NonzeroPriorMean);
    }
    Ok(())
}

/// Normalized estimation energy `(ε - μ)ᵀ Σ⁻¹ (ε - μ) / dim` with
/// `ε = truth ⊟ ξ̂`. For a reset state (`μ = 0`) this is the Mahalanobis
/// energy of the truth under the filter density; a consistent filter keeps
/// its expectation near one, and `dim × energy` is χ²-distributed with `dim`
/// degrees of freedom when the density is exact.
pub fn filter_energy<M: ChartedManifold>(
    manifold: &M,
    state: &ConcentratedGaussian<M::Point>,
    truth: &M::Point,
) -> Result<f64, FilterError> {
    let eps = manifold.boxminus(truth, state.base())?;
    let centered = eps - state.mean();
    let chol = linalg::spd_cholesky(state.cov(), "state covariance")?;
    let solved = chol.solve(&centered);
    Ok(centered.dot(&solved) / manifold.dim() as f64)
}
