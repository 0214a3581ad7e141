//! Flat space: charts are global, transport is the identity.

use nalgebra::DVector;

use crate::geometry::{
    check_tangent, ChartedManifold, GeometryError, TransportMatrix, TransportOde,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Euclidean {
    dim: usize,
}

impl Euclidean {
    pub fn new(dim: usize) -> Self {
        Self { dim }
    }
}

impl ChartedManifold for Euclidean {
    type Point = DVector<f64>;

    fn dim(&self) -> usize {
        self.dim
    }

    fn injectivity_radius(&self) -> f64 {
        f64::INFINITY
    }

    fn boxplus(&self, xi: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>, GeometryError> {
        check_point(self, xi)?;
        check_tangent(self, u)?;
        Ok(xi + u)
    }

    fn boxminus(
        &self,
        zeta: &DVector<f64>,
        xi: &DVector<f64>,
    ) -> Result<DVector<f64>, GeometryError> {
        check_point(self, zeta)?;
        check_point(self, xi)?;
        Ok(zeta - xi)
    }

    fn transport(
        &self,
        xi: &DVector<f64>,
        mu: &DVector<f64>,
    ) -> Result<TransportMatrix<DVector<f64>>, GeometryError> {
        check_point(self, xi)?;
        check_tangent(self, mu)?;
        Ok(TransportMatrix {
            matrix: nalgebra::DMatrix::identity(self.dim, self.dim),
            from: xi.clone(),
            to: xi + mu,
        })
    }
}

impl TransportOde for Euclidean {
    fn ode_state_dim(&self) -> usize {
        self.dim
    }

    fn geodesic_endpoint(&self, xi: &DVector<f64>, mu: &DVector<f64>) -> DVector<f64> {
        xi + mu
    }

    fn ode_init(&self, _xi: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        v.clone()
    }

    fn ode_rhs(
        &self,
        _xi: &DVector<f64>,
        _mu: &DVector<f64>,
        _t: f64,
        w: &DVector<f64>,
    ) -> DVector<f64> {
        DVector::zeros(w.len())
    }

    fn ode_close(&self, _xi: &DVector<f64>, _mu: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        w.clone()
    }
}

fn check_point(space: &Euclidean, p: &DVector<f64>) -> Result<(), GeometryError> {
    if p.len() != space.dim {
        return Err(GeometryError::DimensionMismatch {
            expected: space.dim,
            actual: p.len(),
        });
    }
    Ok(())
}
