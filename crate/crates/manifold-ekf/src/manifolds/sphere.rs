//! The unit sphere S² ⊂ ℝ³ with its canonical metric connection.
//!
//! Geodesics are great circles. Tangent spaces get a deterministic orthonormal
//! basis so tangent coordinates are reproducible across runs and processes:
//! at `p`, take the coordinate axis `e_j` with the smallest `|p_j|` (lowest
//! index on ties), Gram-Schmidt it against `p` for the first leg, and close
//! with `b₂ = p × b₁`. Transport is computed in the ambient space, where a
//! transported vector `w(t)` along `γ` obeys `ẇ = -(w · γ̇) γ`.

use nalgebra::{DMatrix, DVector, Matrix3x2, Vector2, Vector3};

use crate::geometry::{
    check_tangent, ChartedManifold, GeometryError, TransportMatrix, TransportOde,
};

const SMALL_ANGLE: f64 = 1e-8;
const ZERO_TANGENT: f64 = 1e-12;

/// Antipodal guard: `p · q ≤ -1 + ANTIPODAL_MARGIN` has no unique connecting
/// geodesic and is rejected.
pub const ANTIPODAL_MARGIN: f64 = 1e-9;

/// A point on the unit sphere. Construction normalizes the input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitVector {
    v: Vector3<f64>,
}

impl UnitVector {
    pub fn new(v: Vector3<f64>) -> Result<Self, GeometryError> {
        let norm = v.norm();
        if !norm.is_finite() || norm < 1e-9 {
            return Err(GeometryError::InvalidPoint(format!(
                "cannot normalize a vector of norm {norm}"
            )));
        }
        Ok(Self { v: v / norm })
    }

    pub(crate) fn from_unit_unchecked(v: Vector3<f64>) -> Self {
        Self { v }
    }

    pub fn vector(&self) -> &Vector3<f64> {
        &self.v
    }

    /// Angle to another point, in `[0, π]`.
    pub fn angle_to(&self, other: &UnitVector) -> f64 {
        self.v.cross(&other.v).norm().atan2(self.v.dot(&other.v))
    }
}

/// The deterministic tangent basis at `p`, as the 3x2 matrix `[b₁ b₂]`.
pub fn tangent_basis(p: &UnitVector) -> Matrix3x2<f64> {
    let v = p.vector();
    let mut axis = 0;
    for i in 1..3 {
        if v[i].abs() < v[axis].abs() {
            axis = i;
        }
    }
    let mut e = Vector3::zeros();
    e[axis] = 1.0;
    let b1 = (e - v * v[axis]).normalize();
    let b2 = v.cross(&b1);
    Matrix3x2::from_columns(&[b1, b2])
}

fn embed(p: &UnitVector, v: &Vector2<f64>) -> Vector3<f64> {
    tangent_basis(p) * v
}

fn endpoint_ambient(p: &UnitVector, w: &Vector3<f64>) -> UnitVector {
    let theta = w.norm();
    if theta < ZERO_TANGENT {
        return *p;
    }
    let dir = w / theta;
    let q = p.vector() * theta.cos() + dir * theta.sin();
    UnitVector::from_unit_unchecked(q.normalize())
}

/// Geodesic step from `p` with chart coordinates `v`; fails for `|v| ≥ π`.
pub fn sphere_exp(p: &UnitVector, v: &Vector2<f64>) -> Result<UnitVector, GeometryError> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(GeometryError::NonFinite("tangent vector".to_string()));
    }
    if v.norm() >= std::f64::consts::PI {
        return Err(GeometryError::ChartDomain(format!(
            "tangent norm {} is outside the chart radius π",
            v.norm()
        )));
    }
    Ok(endpoint_ambient(p, &embed(p, v)))
}

/// Chart coordinates of `q` at `p`; fails near the antipode of `p`.
pub fn sphere_log(q: &UnitVector, p: &UnitVector) -> Result<Vector2<f64>, GeometryError> {
    let c = p.vector().dot(q.vector()).clamp(-1.0, 1.0);
    if c <= -1.0 + ANTIPODAL_MARGIN {
        return Err(GeometryError::ChartDomain(
            "points are antipodal up to the guard margin".to_string(),
        ));
    }
    let theta = c.acos();
    if theta < SMALL_ANGLE {
        // Residual O(θ²) is below resolution for θ < 1e-8; the projection
        // alone is exact enough.
        let w = q.vector() - p.vector() * c;
        return Ok(tangent_basis(p).transpose() * w);
    }
    let w = (q.vector() - p.vector() * c) * (theta / theta.sin());
    Ok(tangent_basis(p).transpose() * w)
}

/// Parallel transport along the geodesic leaving `p` with chart coordinates
/// `v`, as a 2x2 matrix between the deterministic bases at the two endpoints.
/// Decomposed in the ambient frame `{û, n}` with `n = p × û`: the in-geodesic
/// leg rotates to `û' = cos|v| û - sin|v| p` while `n` is fixed.
pub fn sphere_transport(
    p: &UnitVector,
    v: &Vector2<f64>,
) -> Result<TransportMatrix<UnitVector>, GeometryError> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(GeometryError::NonFinite("tangent vector".to_string()));
    }
    let theta = v.norm();
    if theta > std::f64::consts::PI * (1.0 + 1e-9) {
        return Err(GeometryError::ChartDomain(format!(
            "geodesic velocity norm {theta} exceeds the chart radius π"
        )));
    }
    if theta < ZERO_TANGENT {
        return Ok(TransportMatrix {
            matrix: DMatrix::identity(2, 2),
            from: *p,
            to: *p,
        });
    }
    let w = embed(p, v);
    let u = w / theta;
    let n = p.vector().cross(&u);
    let q = endpoint_ambient(p, &w);
    let u_moved = u * theta.cos() - p.vector() * theta.sin();
    let ambient = u_moved * u.transpose() + n * n.transpose();
    let matrix = tangent_basis(&q).transpose() * ambient * tangent_basis(p);
    Ok(TransportMatrix {
        matrix: to_dmatrix2(&matrix),
        from: *p,
        to: q,
    })
}

fn to_dmatrix2(m: &nalgebra::Matrix2<f64>) -> DMatrix<f64> {
    DMatrix::from_column_slice(2, 2, m.as_slice())
}

fn vec2(u: &DVector<f64>) -> Vector2<f64> {
    Vector2::new(u[0], u[1])
}

/// S² as a charted manifold.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Sphere;

impl ChartedManifold for Sphere {
    type Point = UnitVector;

    fn dim(&self) -> usize {
        2
    }

    fn injectivity_radius(&self) -> f64 {
        std::f64::consts::PI
    }

    fn boxplus(&self, xi: &UnitVector, u: &DVector<f64>) -> Result<UnitVector, GeometryError> {
        check_tangent(self, u)?;
        if u.iter().all(|&x| x == 0.0) {
            return Ok(*xi);
        }
        sphere_exp(xi, &vec2(u))
    }

    fn boxminus(&self, zeta: &UnitVector, xi: &UnitVector) -> Result<DVector<f64>, GeometryError> {
        let v = sphere_log(zeta, xi)?;
        Ok(DVector::from_column_slice(v.as_slice()))
    }

    fn transport(
        &self,
        xi: &UnitVector,
        mu: &DVector<f64>,
    ) -> Result<TransportMatrix<UnitVector>, GeometryError> {
        check_tangent(self, mu)?;
        sphere_transport(xi, &vec2(mu))
    }
}

impl TransportOde for Sphere {
    fn ode_state_dim(&self) -> usize {
        3
    }

    fn geodesic_endpoint(&self, xi: &UnitVector, mu: &DVector<f64>) -> UnitVector {
        endpoint_ambient(xi, &embed(xi, &vec2(mu)))
    }

    fn ode_init(&self, xi: &UnitVector, v: &DVector<f64>) -> DVector<f64> {
        let w = embed(xi, &vec2(v));
        DVector::from_column_slice(w.as_slice())
    }

    fn ode_rhs(&self, xi: &UnitVector, mu: &DVector<f64>, t: f64, w: &DVector<f64>) -> DVector<f64> {
        let theta = embed(xi, &vec2(mu)).norm();
        if theta < ZERO_TANGENT {
            return DVector::zeros(3);
        }
        let u = embed(xi, &vec2(mu)) / theta;
        let gamma = xi.vector() * (t * theta).cos() + u * (t * theta).sin();
        let gamma_dot = (u * (t * theta).cos() - xi.vector() * (t * theta).sin()) * theta;
        let wv = Vector3::new(w[0], w[1], w[2]);
        let dw = -gamma * wv.dot(&gamma_dot);
        DVector::from_column_slice(dw.as_slice())
    }

    fn ode_close(&self, xi: &UnitVector, mu: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        let q = self.geodesic_endpoint(xi, mu);
        let wv = Vector3::new(w[0], w[1], w[2]);
        let coords = tangent_basis(&q).transpose() * wv;
        DVector::from_column_slice(coords.as_slice())
    }
}
