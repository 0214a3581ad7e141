//! Error-state extended Kalman filtering on smooth manifolds.
//!
//! The state lives on a manifold `M` equipped with an affine connection. Every
//! estimate `ξ̂` carries a normal-coordinate chart built from the connection's
//! exponential map, and uncertainty is a concentrated Gaussian: a zero-ish mean
//! and covariance expressed in the tangent space at `ξ̂`. Three ingredients are
//! exposed per manifold:
//!
//! * `boxplus` / `boxminus`, the chart and its inverse (`ξ ⊞ u = exp_ξ(u)`,
//!   `ζ ⊟ ξ = exp_ξ⁻¹(ζ)` in tangent coordinates);
//! * parallel transport along geodesics `t ↦ ξ ⊞ tμ`, as a matrix acting on
//!   tangent coordinates.
//!
//! Transport is what separates this filter from a chart-fixed error-state EKF:
//! measurement covariance can be expressed where it is physically known (the
//! true output, the received measurement, or a re-predicted output) and moved
//! to the predicted output along the connecting geodesic before the Kalman
//! update. The same machinery transports the state covariance during the
//! post-update reset, so second-order information is not silently re-based.
//!
//! Module layout:
//!
//! * [`geometry`]: manifold trait, transports, finite-difference Jacobians and
//!   the Runge-Kutta transport oracle used to validate closed forms.
//! * [`manifolds`]: Euclidean space, the rotation group, the unit sphere and
//!   finite products of these.
//! * [`filter`]: concentrated Gaussians, system/measurement models, prediction,
//!   the update variants and the (geometric) reset.
//! * [`sim`]: the attitude-from-two-directions benchmark scenario and its
//!   Monte Carlo driver.

pub mod filter;
pub mod geometry;
pub mod linalg;
pub mod manifolds;
pub mod sim;

pub use filter::{
    filter_energy, ConcentratedGaussian, FilterError, FilterOptions, FilterVariant,
    ManifoldEkf, MeasurementModel, SystemModel, UpdateVariant,
};
pub use geometry::{
    fd_jacobian, ode_transport_oracle, ChartedManifold, FdScheme, GeometryError, TangentCoords,
    TransportMatrix, TransportOde,
};
pub use manifolds::{
    euclidean::Euclidean,
    product::Product,
    so3::{so3_exp, so3_log, Rotation, So3},
    sphere::{sphere_exp, sphere_log, Sphere, UnitVector},
};
