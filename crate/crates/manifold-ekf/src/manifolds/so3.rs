//! The rotation group SO(3) with the symmetric bi-invariant connection.
//!
//! Conventions:
//!
//! * Points are proper orthogonal 3x3 matrices, validated on construction.
//! * Tangent coordinates are body-frame: `ξ ⊞ u = ξ · exp(u^∧)`, so a tangent
//!   vector is an angular displacement expressed in the frame of `ξ` itself.
//! * Geodesics through `ξ` are the curves `t ↦ ξ · exp(t u^∧)`; the chart is
//!   invertible for `|u| < π` and the antipodal set (`|u| = π`) is excluded.
//! * Parallel transport along `t ↦ ξ · exp(t μ^∧)` is the half-angle rotation
//!   `exp(-μ^∧/2)` on body coordinates: transported vectors satisfy
//!   `ẇ = -½ μ × w`, i.e. they rotate backwards at half the geodesic rate.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};

use crate::geometry::{
    check_tangent, ChartedManifold, GeometryError, TransportMatrix, TransportOde,
};

/// Orthogonality / determinant tolerance for accepting a matrix as a rotation.
pub const ROTATION_TOL: f64 = 1e-9;

/// Margin kept away from the cut locus at angle π; the chart inverse is
/// ill-conditioned inside it (relative error grows like ε/margin).
pub const CUT_LOCUS_MARGIN: f64 = 1e-6;

const SMALL_ANGLE: f64 = 1e-8;

/// `v ↦ v^∧`, the matrix with `v^∧ w = v × w`.
pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

fn vee(m: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(m[(2, 1)], m[(0, 2)], m[(1, 0)])
}

/// A rotation matrix. The wrapped matrix is kept proper orthogonal; use
/// [`Rotation::renormalized`] after long composition chains to project drift
/// away.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation {
    mat: Matrix3<f64>,
}

impl Rotation {
    pub fn identity() -> Self {
        Self {
            mat: Matrix3::identity(),
        }
    }

    /// Accepts a matrix that is orthogonal with determinant one up to
    /// [`ROTATION_TOL`].
    pub fn from_matrix(mat: Matrix3<f64>) -> Result<Self, GeometryError> {
        let candidate = Self { mat };
        let orth = candidate.orthogonality_error();
        if !orth.is_finite() || orth > ROTATION_TOL {
            return Err(GeometryError::InvalidPoint(format!(
                "matrix is not orthogonal (|RᵀR - I|_max = {orth:.3e})"
            )));
        }
        let det = mat.determinant();
        if (det - 1.0).abs() > ROTATION_TOL {
            return Err(GeometryError::InvalidPoint(format!(
                "matrix determinant {det} is not +1"
            )));
        }
        Ok(candidate)
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.mat
    }

    /// `self · other`.
    pub fn compose(&self, other: &Rotation) -> Rotation {
        Rotation {
            mat: self.mat * other.mat,
        }
    }

    pub fn transpose(&self) -> Rotation {
        Rotation {
            mat: self.mat.transpose(),
        }
    }

    /// `R v`.
    pub fn apply(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.mat * v
    }

    /// `Rᵀ v`.
    pub fn inverse_apply(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.mat.transpose() * v
    }

    /// Largest entry of `|RᵀR - I|`.
    pub fn orthogonality_error(&self) -> f64 {
        let gram = self.mat.transpose() * self.mat - Matrix3::identity();
        gram.iter().fold(0.0f64, |acc, x| acc.max(x.abs()))
    }

    /// Projects back onto the rotation group via the Newton iteration for the
    /// polar factor, `X ← (X + X⁻ᵀ)/2`. Quadratic convergence near the group;
    /// one or two sweeps remove integration drift.
    pub fn renormalized(&self) -> Rotation {
        let mut x = self.mat;
        for _ in 0..20 {
            let Some(inv_t) = x.transpose().try_inverse() else {
                break;
            };
            let next = (x + inv_t) * 0.5;
            let delta = (next - x).iter().fold(0.0f64, |acc, e| acc.max(e.abs()));
            x = next;
            if delta < 1e-15 {
                break;
            }
        }
        Rotation { mat: x }
    }

    /// Rotation angle in `[0, π]`, computed as `atan2(|R - Rᵀ|/2, (tr R - 1)/2)`
    /// so it stays accurate at both ends of the range.
    pub fn angle(&self) -> f64 {
        let s = vee(&((self.mat - self.mat.transpose()) * 0.5)).norm();
        let c = (self.mat.trace() - 1.0) * 0.5;
        s.atan2(c)
    }

    /// Geodesic distance to `other`: the angle of `selfᵀ · other`.
    pub fn angle_to(&self, other: &Rotation) -> f64 {
        self.transpose().compose(other).angle()
    }
}

/// Exponential map at the identity: Rodrigues' formula with a series branch
/// below the small-angle threshold (truncation error O(θ³) ≤ 1e-24 there).
pub fn so3_exp(u: &Vector3<f64>) -> Rotation {
    let theta2 = u.norm_squared();
    let k = skew(u);
    let mat = if theta2 < SMALL_ANGLE * SMALL_ANGLE {
        Matrix3::identity() + k + k * k * 0.5
    } else {
        let theta = theta2.sqrt();
        let a = theta.sin() / theta;
        let b = (1.0 - theta.cos()) / theta2;
        Matrix3::identity() + k * a + k * k * b
    };
    Rotation { mat }
}

/// Logarithm on the chart domain `angle < π - margin`. The angle comes from
/// `atan2(|w|, (tr - 1)/2)` with `w = vee((R - Rᵀ)/2) = sin(θ)·axis`, which is
/// well conditioned everywhere the chart is.
pub fn so3_log(r: &Rotation) -> Result<Vector3<f64>, GeometryError> {
    let w = vee(&((r.mat - r.mat.transpose()) * 0.5));
    let s = w.norm();
    let c = (r.mat.trace() - 1.0) * 0.5;
    let theta = s.atan2(c);
    if theta >= std::f64::consts::PI - CUT_LOCUS_MARGIN {
        return Err(GeometryError::ChartDomain(format!(
            "rotation angle {theta} is within {CUT_LOCUS_MARGIN:.0e} of the cut locus at π"
        )));
    }
    if theta < SMALL_ANGLE {
        // w = θ·axis·(1 - θ²/6 + ...); the relative defect θ²/6 ≤ 2e-17 is
        // below resolution.
        return Ok(w);
    }
    Ok(w * (theta / s))
}

/// SO(3) as a charted manifold (body-frame tangent coordinates).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct So3;

fn vec3(u: &DVector<f64>) -> Vector3<f64> {
    Vector3::new(u[0], u[1], u[2])
}

fn dvec3(v: &Vector3<f64>) -> DVector<f64> {
    DVector::from_column_slice(v.as_slice())
}

pub(crate) fn mat3_to_dmatrix(m: &Matrix3<f64>) -> DMatrix<f64> {
    DMatrix::from_column_slice(3, 3, m.as_slice())
}

impl ChartedManifold for So3 {
    type Point = Rotation;

    fn dim(&self) -> usize {
        3
    }

    fn injectivity_radius(&self) -> f64 {
        std::f64::consts::PI
    }

    fn boxplus(&self, xi: &Rotation, u: &DVector<f64>) -> Result<Rotation, GeometryError> {
        check_tangent(self, u)?;
        if u.iter().all(|&x| x == 0.0) {
            return Ok(*xi);
        }
        let norm = u.norm();
        if norm >= self.injectivity_radius() {
            return Err(GeometryError::ChartDomain(format!(
                "tangent norm {norm} is outside the chart radius π"
            )));
        }
        Ok(xi.compose(&so3_exp(&vec3(u))))
    }

    fn boxminus(&self, zeta: &Rotation, xi: &Rotation) -> Result<DVector<f64>, GeometryError> {
        let relative = xi.transpose().compose(zeta);
        Ok(dvec3(&so3_log(&relative)?))
    }

    fn transport(
        &self,
        xi: &Rotation,
        mu: &DVector<f64>,
    ) -> Result<TransportMatrix<Rotation>, GeometryError> {
        check_tangent(self, mu)?;
        let norm = mu.norm();
        if norm > self.injectivity_radius() * (1.0 + 1e-9) {
            return Err(GeometryError::ChartDomain(format!(
                "geodesic velocity norm {norm} exceeds the chart radius π"
            )));
        }
        let mu3 = vec3(mu);
        Ok(TransportMatrix {
            matrix: mat3_to_dmatrix(so3_exp(&(-mu3 * 0.5)).matrix()),
            from: *xi,
            to: self.geodesic_endpoint(xi, mu),
        })
    }
}

impl TransportOde for So3 {
    fn ode_state_dim(&self) -> usize {
        3
    }

    fn geodesic_endpoint(&self, xi: &Rotation, mu: &DVector<f64>) -> Rotation {
        xi.compose(&so3_exp(&vec3(mu)))
    }

    fn ode_init(&self, _xi: &Rotation, v: &DVector<f64>) -> DVector<f64> {
        v.clone()
    }

    fn ode_rhs(&self, _xi: &Rotation, mu: &DVector<f64>, _t: f64, w: &DVector<f64>) -> DVector<f64> {
        dvec3(&(vec3(mu).cross(&vec3(w)) * -0.5))
    }

    fn ode_close(&self, _xi: &Rotation, _mu: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        w.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ode_transport_oracle;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;
    use rand_distr::StandardNormal;
    use std::f64::consts::PI;

    /// Truncated matrix-power series for exp(u^∧); 30 terms bound the tail by
    /// π³⁰/30! ≈ 3e-18 on the whole chart.
    fn exp_series(u: &Vector3<f64>) -> Matrix3<f64> {
        let k = skew(u);
        let mut sum = Matrix3::identity();
        let mut term = Matrix3::identity();
        for n in 1..=30 {
            term = term * k / n as f64;
            sum += term;
        }
        sum
    }

    fn random_tangent(rng: &mut ChaCha12Rng, max_norm: f64) -> Vector3<f64> {
        loop {
            let v = Vector3::new(
                rng.sample::<f64, _>(StandardNormal),
                rng.sample::<f64, _>(StandardNormal),
                rng.sample::<f64, _>(StandardNormal),
            );
            if v.norm() > 1e-12 {
                let scale: f64 = rng.random::<f64>() * max_norm;
                return v.normalize() * scale;
            }
        }
    }

    fn random_rotation(rng: &mut ChaCha12Rng) -> Rotation {
        so3_exp(&random_tangent(rng, 0.99 * PI))
    }

    #[test]
    fn exp_matches_the_power_series() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let u = random_tangent(&mut rng, PI);
            let r = so3_exp(&u);
            assert_abs_diff_eq!(*r.matrix(), exp_series(&u), epsilon = 1e-12);
        }
    }

    #[test]
    fn exp_special_values() {
        assert_eq!(*so3_exp(&Vector3::zeros()).matrix(), Matrix3::identity());
        let half_turn = so3_exp(&Vector3::new(PI, 0.0, 0.0));
        let expected = Matrix3::from_diagonal(&Vector3::new(1.0, -1.0, -1.0));
        assert_abs_diff_eq!(*half_turn.matrix(), expected, epsilon = 1e-12);
        let quarter_z = so3_exp(&Vector3::new(0.0, 0.0, PI / 2.0));
        let expected =
            Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
        assert_abs_diff_eq!(*quarter_z.matrix(), expected, epsilon = 1e-12);
    }

    #[test]
    fn log_inverts_exp_on_the_chart() {
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        for _ in 0..1000 {
            let u = random_tangent(&mut rng, 3.0);
            let back = so3_log(&so3_exp(&u)).unwrap();
            assert_abs_diff_eq!(back, u, epsilon = 1e-10);
        }
        assert_eq!(so3_log(&Rotation::identity()).unwrap(), Vector3::zeros());
        let quarter_x = so3_log(&so3_exp(&Vector3::new(PI / 2.0, 0.0, 0.0))).unwrap();
        assert_abs_diff_eq!(quarter_x, Vector3::new(PI / 2.0, 0.0, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn log_rejects_the_cut_locus() {
        let half_turn = so3_exp(&Vector3::new(PI, 0.0, 0.0));
        assert!(matches!(
            so3_log(&half_turn),
            Err(GeometryError::ChartDomain(_))
        ));
        // Just inside the margin still works.
        let near = so3_exp(&Vector3::new(PI - 1e-5, 0.0, 0.0));
        let back = so3_log(&near).unwrap();
        assert_abs_diff_eq!(back.norm(), PI - 1e-5, epsilon = 1e-9);
    }

    #[test]
    fn box_operators_satisfy_the_chart_axioms() {
        let space = So3;
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        for _ in 0..200 {
            let xi = random_rotation(&mut rng);
            let u = dvec3(&random_tangent(&mut rng, 0.9 * PI));
            let zeta = space.boxplus(&xi, &u).unwrap();
            let recovered = space.boxminus(&zeta, &xi).unwrap();
            assert_abs_diff_eq!(recovered, u, epsilon = 1e-9);
            let rebuilt = space.boxplus(&xi, &recovered).unwrap();
            assert!(zeta.angle_to(&rebuilt) < 1e-9);
        }
        let xi = random_rotation(&mut rng);
        assert_eq!(space.boxplus(&xi, &DVector::zeros(3)).unwrap(), xi);
        let too_far = dvec3(&Vector3::new(PI, 0.0, 0.0));
        assert!(matches!(
            space.boxplus(&xi, &too_far),
            Err(GeometryError::ChartDomain(_))
        ));
    }

    #[test]
    fn boxminus_of_quarter_turn_reads_off_the_axis() {
        let space = So3;
        let zeta = so3_exp(&Vector3::new(PI / 2.0, 0.0, 0.0));
        let u = space.boxminus(&zeta, &Rotation::identity()).unwrap();
        assert_abs_diff_eq!(vec3(&u), Vector3::new(PI / 2.0, 0.0, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn transport_is_the_half_angle_rotation() {
        let space = So3;
        let xi = Rotation::identity();
        let zero = space.transport(&xi, &DVector::zeros(3)).unwrap();
        assert_eq!(zero.matrix, DMatrix::identity(3, 3));

        // A full half-turn geodesic transports by a quarter turn backwards.
        let mu = dvec3(&Vector3::new(PI, 0.0, 0.0));
        let transport = space.transport(&xi, &mu).unwrap();
        let expected = so3_exp(&Vector3::new(-PI / 2.0, 0.0, 0.0));
        assert_abs_diff_eq!(
            transport.matrix,
            mat3_to_dmatrix(expected.matrix()),
            epsilon = 1e-12
        );
    }

    #[test]
    fn transport_matches_the_ode_oracle() {
        let space = So3;
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        for _ in 0..25 {
            let xi = random_rotation(&mut rng);
            let mu = dvec3(&random_tangent(&mut rng, PI));
            let closed = space.transport(&xi, &mu).unwrap();
            let oracle = ode_transport_oracle(&space, &xi, &mu, 1e-3).unwrap();
            assert_abs_diff_eq!(closed.matrix, oracle.matrix, epsilon = 1e-6);
            assert!(closed.to.angle_to(&oracle.to) < 1e-12);
        }
    }

    #[test]
    fn oracle_refines_towards_the_closed_form() {
        // Richardson check: quartering the step must not move the oracle by
        // more than the already tiny step-1e-3 defect.
        let space = So3;
        let xi = Rotation::identity();
        let mu = dvec3(&Vector3::new(1.0, -0.7, 2.2));
        let closed = space.transport(&xi, &mu).unwrap();
        let coarse = ode_transport_oracle(&space, &xi, &mu, 1e-2).unwrap();
        let fine = ode_transport_oracle(&space, &xi, &mu, 2.5e-3).unwrap();
        let err_coarse = (&coarse.matrix - &closed.matrix).abs().max();
        let err_fine = (&fine.matrix - &closed.matrix).abs().max();
        assert!(err_fine < err_coarse || err_coarse < 1e-14);
        assert!(err_fine < 1e-10);
    }

    #[test]
    fn reverse_transport_inverts_transport() {
        let space = So3;
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        for _ in 0..100 {
            let xi = random_rotation(&mut rng);
            let mu = dvec3(&random_tangent(&mut rng, 0.99 * PI));
            let forward = space.transport(&xi, &mu).unwrap();
            // The same geodesic traversed backwards starts at the endpoint
            // with body-frame velocity -μ.
            let back = space.transport(&forward.to, &(-&mu)).unwrap();
            let product = &back.matrix * &forward.matrix;
            assert_abs_diff_eq!(product, DMatrix::identity(3, 3), epsilon = 1e-12);
        }
    }

    #[test]
    fn curvature_contracts_chart_differences() {
        // Fourth chart property: on SO(3) the chart never expands tangent
        // differences, |(ξ⊞δ₁) ⊟ (ξ⊞δ₂)| ≤ |δ₁ - δ₂| (+ slack) for small δ.
        let space = So3;
        let mut rng = ChaCha12Rng::seed_from_u64(6);
        for _ in 0..1000 {
            let xi = random_rotation(&mut rng);
            let d1 = dvec3(&random_tangent(&mut rng, 0.1));
            let d2 = dvec3(&random_tangent(&mut rng, 0.1));
            let p1 = space.boxplus(&xi, &d1).unwrap();
            let p2 = space.boxplus(&xi, &d2).unwrap();
            let diff = space.boxminus(&p1, &p2).unwrap();
            assert!(diff.norm_squared() <= (&d1 - &d2).norm_squared() + 1e-9);
        }
    }

    #[test]
    fn renormalization_controls_composition_drift() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let mut r = Rotation::identity();
        for _ in 0..100_000 {
            let step = so3_exp(&random_tangent(&mut rng, 0.02));
            r = r.compose(&step).renormalized();
        }
        assert!(r.orthogonality_error() <= 1e-9);
        assert!((r.matrix().determinant() - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn from_matrix_validates() {
        assert!(Rotation::from_matrix(Matrix3::identity()).is_ok());
        assert!(Rotation::from_matrix(Matrix3::identity() * 1.1).is_err());
        // Orthogonal but improper (a reflection).
        let reflect = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0));
        assert!(Rotation::from_matrix(reflect).is_err());
    }

    #[test]
    fn angle_is_stable_at_both_ends() {
        assert_eq!(Rotation::identity().angle(), 0.0);
        let tiny = so3_exp(&Vector3::new(1e-9, 0.0, 0.0));
        assert_abs_diff_eq!(tiny.angle(), 1e-9, epsilon = 1e-15);
        let near_pi = so3_exp(&Vector3::new(PI - 1e-7, 0.0, 0.0));
        assert_abs_diff_eq!(near_pi.angle(), PI - 1e-7, epsilon = 1e-12);
    }
}
