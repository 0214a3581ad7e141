//! Core geometric abstractions: charted manifolds, parallel transport and
//! numerical differentiation between charts.
//!
//! Conventions used throughout the crate:
//!
//! * Tangent vectors are coordinate vectors with respect to a fixed,
//!   deterministic orthonormal basis at each point, so covariances and
//!   Jacobians are plain real matrices.
//! * `boxplus(ξ, u)` follows the geodesic from `ξ` with initial velocity `u`
//!   for unit time; `boxminus(ζ, ξ)` inverts it at `ξ`. Both are restricted to
//!   the injectivity radius and fail loudly outside it rather than wrapping.
//! * `transport(ξ, μ)` parallel-transports tangent coordinates along the
//!   geodesic `t ↦ ξ ⊞ tμ`, from `ξ` to `ξ ⊞ μ`. The transport itself is
//!   defined for any geodesic segment, so the domain is only capped at the
//!   injectivity radius (boundary included) to keep endpoints chart-reachable.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::linalg;

/// Errors raised by chart and transport operations.
#[derive(Debug, Clone, Error)]
pub enum GeometryError {
    /// A tangent vector left the region where the chart is invertible, or a
    /// point pair reached the cut locus where the inverse chart is undefined.
    #[error("chart domain violation: {0}")]
    ChartDomain(String),
    /// A matrix that must be symmetric positive-definite is not.
    #[error("not symmetric positive-definite: {0}")]
    NotSpd(String),
    /// A step size or tolerance that must be positive is not.
    #[error("step size must be positive, got {0}")]
    StepSize(f64),
    /// Vector or matrix dimensions do not match the manifold.
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    /// A non-finite value appeared where a finite one is required.
    #[error("non-finite value in {0}")]
    NonFinite(String),
    /// A value does not satisfy the invariants of its point type.
    #[error("invalid point: {0}")]
    InvalidPoint(String),
}

/// A smooth manifold with an affine connection, presented through normal
/// coordinates at each point.
///
/// Implementations must satisfy, for `|u|` within the injectivity radius:
///
/// * `boxplus(ξ, 0) = ξ` exactly;
/// * `boxminus(boxplus(ξ, u), ξ) = u` up to roundoff;
/// * `boxplus(ξ, boxminus(ζ, ξ)) = ζ` up to roundoff.
pub trait ChartedManifold {
    /// Point representation. Kept concrete (matrices, unit vectors, tuples)
    /// rather than coordinates; charts are derived quantities.
    type Point: Clone + std::fmt::Debug;

    /// Dimension of the tangent spaces.
    fn dim(&self) -> usize;

    /// Largest `r` such that `u ↦ ξ ⊞ u` is a diffeomorphism on `|u| < r`,
    /// uniformly over `ξ`. Infinite for flat spaces.
    fn injectivity_radius(&self) -> f64;

    /// Geodesic step: `ξ ⊞ u`.
    fn boxplus(&self, xi: &Self::Point, u: &DVector<f64>) -> Result<Self::Point, GeometryError>;

    /// Chart inverse: the `u` with `ξ ⊞ u = ζ`, expressed at `ξ`.
    fn boxminus(&self, zeta: &Self::Point, xi: &Self::Point) -> Result<DVector<f64>, GeometryError>;

    /// Parallel transport along `t ↦ ξ ⊞ tμ` from `ξ` to `ξ ⊞ μ`, as a matrix
    /// on tangent coordinates.
    fn transport(
        &self,
        xi: &Self::Point,
        mu: &DVector<f64>,
    ) -> Result<TransportMatrix<Self::Point>, GeometryError>;
}

/// Tangent coordinates attached to their base point.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentCoords<P> {
    pub base: P,
    pub vec: DVector<f64>,
}

impl<P: Clone + std::fmt::Debug> TangentCoords<P> {
    /// Validates dimensions and finiteness against the owning manifold.
    pub fn new<M>(manifold: &M, base: P, vec: DVector<f64>) -> Result<Self, GeometryError>
    where
        M: ChartedManifold<Point = P>,
    {
        check_tangent(manifold, &vec)?;
        Ok(Self { base, vec })
    }

    /// `base ⊞ vec`.
    pub fn apply<M>(&self, manifold: &M) -> Result<P, GeometryError>
    where
        M: ChartedManifold<Point = P>,
    {
        manifold.boxplus(&self.base, &self.vec)
    }
}

/// A parallel-transport operator between the tangent spaces at `from` and
/// `to`, expressed in their chart bases. Always invertible; for metric
/// connections it is orthogonal.
#[derive(Debug, Clone)]
pub struct TransportMatrix<P> {
    pub matrix: DMatrix<f64>,
    pub from: P,
    pub to: P,
}

impl<P: Clone> TransportMatrix<P> {
    /// The identity transport at a single point.
    pub fn identity(dim: usize, point: P) -> Self {
        Self {
            matrix: DMatrix::identity(dim, dim),
            from: point.clone(),
            to: point,
        }
    }

    /// Moves a covariance between tangent spaces: `Σ ↦ P Σ Pᵀ`, re-symmetrized.
    /// `sigma` must be SPD and sized like the transport.
    pub fn transport_covariance(&self, sigma: &DMatrix<f64>) -> Result<DMatrix<f64>, GeometryError> {
        let n = self.matrix.ncols();
        if sigma.nrows() != n || sigma.ncols() != n {
            return Err(GeometryError::DimensionMismatch {
                expected: n,
                actual: sigma.nrows(),
            });
        }
        linalg::spd_cholesky(sigma, "transported covariance input")?;
        Ok(linalg::symmetrize(&(&self.matrix * sigma * self.matrix.transpose())))
    }
}

pub(crate) fn check_tangent<M: ChartedManifold>(
    manifold: &M,
    u: &DVector<f64>,
) -> Result<(), GeometryError> {
    if u.len() != manifold.dim() {
        return Err(GeometryError::DimensionMismatch {
            expected: manifold.dim(),
            actual: u.len(),
        });
    }
    if u.iter().any(|x| !x.is_finite()) {
        return Err(GeometryError::NonFinite("tangent vector".to_string()));
    }
    Ok(())
}

/// Finite-difference scheme for chart-to-chart Jacobians.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FdScheme {
    /// One-sided differences, O(h) truncation error.
    Forward,
    /// Symmetric differences, O(h²) truncation error.
    Central,
}

/// Default step for forward differences (≈ √ε on unit-scale problems).
pub const DEFAULT_FD_STEP_FORWARD: f64 = 1e-6;

/// Default step for central differences (≈ ∛ε on unit-scale problems).
pub const DEFAULT_FD_STEP_CENTRAL: f64 = 1e-5;

/// Jacobian of `f: M → N` at `ξ`, read through the normal charts at `ξ` and at
/// `f(ξ)`: column `i` differences `φ_f(ξ)(f(ξ ⊞ h eᵢ))` in the codomain chart.
pub fn fd_jacobian<MD, MC, F>(
    dom: &MD,
    cod: &MC,
    f: F,
    xi: &MD::Point,
    step: f64,
    scheme: FdScheme,
) -> Result<DMatrix<f64>, GeometryError>
where
    MD: ChartedManifold,
    MC: ChartedManifold,
    F: Fn(&MD::Point) -> MC::Point,
{
    if step.is_nan() || step <= 0.0 {
        return Err(GeometryError::StepSize(step));
    }
    let m = dom.dim();
    let n = cod.dim();
    let center = f(xi);
    let mut jac = DMatrix::zeros(n, m);
    let mut e = DVector::zeros(m);
    for i in 0..m {
        let column = match scheme {
            FdScheme::Forward => {
                e[i] = step;
                let plus = cod.boxminus(&f(&dom.boxplus(xi, &e)?), &center)?;
                plus / step
            }
            FdScheme::Central => {
                e[i] = step;
                let plus = cod.boxminus(&f(&dom.boxplus(xi, &e)?), &center)?;
                e[i] = -step;
                let minus = cod.boxminus(&f(&dom.boxplus(xi, &e)?), &center)?;
                (plus - minus) / (2.0 * step)
            }
        };
        e[i] = 0.0;
        jac.set_column(i, &column);
    }
    Ok(jac)
}

/// A manifold whose parallel transport can also be evaluated by integrating
/// the transport ODE along the geodesic. The integrated form is the oracle the
/// closed-form [`ChartedManifold::transport`] implementations are verified
/// against; the state may live in an embedding (so its dimension can exceed
/// the chart dimension).
pub trait TransportOde: ChartedManifold {
    /// Dimension of the ODE state carrying one transported vector.
    fn ode_state_dim(&self) -> usize;

    /// Endpoint of the geodesic `t ↦ ξ ⊞ tμ` at `t = 1`, defined for any
    /// finite `μ` (no chart restriction).
    fn geodesic_endpoint(&self, xi: &Self::Point, mu: &DVector<f64>) -> Self::Point;

    /// Lifts chart coordinates at `ξ` into the ODE state at `t = 0`.
    fn ode_init(&self, xi: &Self::Point, v: &DVector<f64>) -> DVector<f64>;

    /// Right-hand side `ẇ(t)` of the transport equation along the geodesic.
    fn ode_rhs(
        &self,
        xi: &Self::Point,
        mu: &DVector<f64>,
        t: f64,
        w: &DVector<f64>,
    ) -> DVector<f64>;

    /// Projects the ODE state at `t = 1` back to chart coordinates at `ξ ⊞ μ`.
    fn ode_close(&self, xi: &Self::Point, mu: &DVector<f64>, w: &DVector<f64>) -> DVector<f64>;
}

/// Default step for the transport oracle; fourth-order error ≈ 1e-12 per unit
/// geodesic, comfortably below the 1e-6 verification tolerances.
pub const DEFAULT_ODE_STEP: f64 = 1e-3;

/// Parallel transport computed by RK4 integration of the transport ODE, one
/// chart basis vector at a time. Slow but assumption-free; used to validate
/// closed-form transports.
pub fn ode_transport_oracle<M: TransportOde>(
    manifold: &M,
    xi: &M::Point,
    mu: &DVector<f64>,
    step: f64,
) -> Result<TransportMatrix<M::Point>, GeometryError> {
    if step.is_nan() || step <= 0.0 {
        return Err(GeometryError::StepSize(step));
    }
    check_tangent(manifold, mu)?;
    let radius = manifold.injectivity_radius();
    if mu.norm() > radius * (1.0 + 1e-9) {
        return Err(GeometryError::ChartDomain(format!(
            "geodesic velocity norm {} exceeds injectivity radius {radius}",
            mu.norm()
        )));
    }
    let n = manifold.dim();
    let steps = (1.0 / step).ceil().max(1.0) as usize;
    let h = 1.0 / steps as f64;
    let to = manifold.geodesic_endpoint(xi, mu);
    let mut matrix = DMatrix::zeros(n, n);
    let mut basis = DVector::zeros(n);
    for i in 0..n {
        basis[i] = 1.0;
        let mut w = manifold.ode_init(xi, &basis);
        basis[i] = 0.0;
        for k in 0..steps {
            let t = k as f64 * h;
            let k1 = manifold.ode_rhs(xi, mu, t, &w);
            let k2 = manifold.ode_rhs(xi, mu, t + 0.5 * h, &(&w + &k1 * (0.5 * h)));
            let k3 = manifold.ode_rhs(xi, mu, t + 0.5 * h, &(&w + &k2 * (0.5 * h)));
            let k4 = manifold.ode_rhs(xi, mu, t + h, &(&w + &k3 * h));
            w += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        }
        matrix.set_column(i, &manifold.ode_close(xi, mu, &w));
    }
    Ok(TransportMatrix {
        matrix,
        from: xi.clone(),
        to,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifolds::euclidean::Euclidean;
    use approx::assert_abs_diff_eq;

    #[test]
    fn fd_jacobian_of_identity_is_identity() {
        let space = Euclidean::new(4);
        let xi = nalgebra::dvector![0.3, -1.2, 0.0, 7.5];
        for scheme in [FdScheme::Forward, FdScheme::Central] {
            let step = match scheme {
                FdScheme::Forward => DEFAULT_FD_STEP_FORWARD,
                FdScheme::Central => DEFAULT_FD_STEP_CENTRAL,
            };
            let jac = fd_jacobian(&space, &space, |p| p.clone(), &xi, step, scheme).unwrap();
            assert_abs_diff_eq!(jac, DMatrix::identity(4, 4), epsilon = 1e-9);
        }
    }

    #[test]
    fn fd_jacobian_rejects_bad_step() {
        let space = Euclidean::new(2);
        let xi = nalgebra::dvector![0.0, 0.0];
        let err = fd_jacobian(&space, &space, |p| p.clone(), &xi, 0.0, FdScheme::Central);
        assert!(matches!(err, Err(GeometryError::StepSize(_))));
    }

    #[test]
    fn central_differences_gain_an_order_on_a_cubic() {
        // f(x) = x + x³ has Jacobian 1 + 3x² = 1.75 at x = 0.5. Halving the
        // step must shrink forward error ~2x and central error ~4x.
        let space = Euclidean::new(1);
        let xi = nalgebra::dvector![0.5];
        let f = |p: &DVector<f64>| nalgebra::dvector![p[0] + p[0] * p[0] * p[0]];
        let exact = 1.0 + 3.0 * 0.25;
        let err = |step: f64, scheme: FdScheme| {
            (fd_jacobian(&space, &space, f, &xi, step, scheme).unwrap()[(0, 0)] - exact).abs()
        };
        let (f1, f2) = (err(1e-3, FdScheme::Forward), err(5e-4, FdScheme::Forward));
        let (c1, c2) = (err(1e-3, FdScheme::Central), err(5e-4, FdScheme::Central));
        assert!(f2 / f1 > 0.3 && f2 / f1 < 0.7, "forward ratio {}", f2 / f1);
        assert!(c2 / c1 > 0.15 && c2 / c1 < 0.35, "central ratio {}", c2 / c1);
    }

    #[test]
    fn transport_covariance_requires_spd() {
        let transport = TransportMatrix::identity(2, ());
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(
            transport.transport_covariance(&bad),
            Err(GeometryError::NotSpd(_))
        ));
        let sized = DMatrix::identity(3, 3);
        assert!(matches!(
            transport.transport_covariance(&sized),
            Err(GeometryError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn identity_transport_preserves_covariance() {
        let transport = TransportMatrix::identity(3, ());
        let sigma = DMatrix::from_diagonal(&nalgebra::dvector![1.0, 2.0, 3.0]);
        assert_eq!(transport.transport_covariance(&sigma).unwrap(), sigma);
    }

    #[test]
    fn tangent_coords_validate_dimension_and_finiteness() {
        let space = Euclidean::new(2);
        let base = nalgebra::dvector![0.0, 0.0];
        assert!(TangentCoords::new(&space, base.clone(), nalgebra::dvector![1.0]).is_err());
        assert!(
            TangentCoords::new(&space, base.clone(), nalgebra::dvector![f64::NAN, 0.0]).is_err()
        );
        let ok = TangentCoords::new(&space, base, nalgebra::dvector![1.0, 2.0]).unwrap();
        assert_eq!(ok.apply(&space).unwrap(), nalgebra::dvector![1.0, 2.0]);
    }

    #[test]
    fn oracle_rejects_bad_step_and_matches_identity_on_flat_space() {
        let space = Euclidean::new(3);
        let xi = nalgebra::dvector![1.0, 2.0, 3.0];
        let mu = nalgebra::dvector![0.5, -0.25, 4.0];
        assert!(matches!(
            ode_transport_oracle(&space, &xi, &mu, -1.0),
            Err(GeometryError::StepSize(_))
        ));
        let transport = ode_transport_oracle(&space, &xi, &mu, 1e-2).unwrap();
        assert_abs_diff_eq!(transport.matrix, DMatrix::identity(3, 3), epsilon = 1e-12);
        assert_abs_diff_eq!(transport.to, &xi + &mu, epsilon = 1e-12);
    }
}
