//! Finite products of one manifold type, with blockwise charts and transports.
//!
//! Points are vectors of factor points; tangent coordinates concatenate the
//! factor coordinates in order. The product connection acts factor by factor,
//! so transports are block-diagonal and the injectivity radius is the smallest
//! factor radius.

use nalgebra::{DMatrix, DVector};

use crate::geometry::{
    check_tangent, ChartedManifold, GeometryError, TransportMatrix, TransportOde,
};

#[derive(Debug, Clone)]
pub struct Product<M> {
    factors: Vec<M>,
}

impl<M: ChartedManifold> Product<M> {
    /// Builds the product of the given factors. Panics on an empty list: a
    /// zero-factor product has no meaningful chart.
    pub fn new(factors: Vec<M>) -> Self {
        assert!(!factors.is_empty(), "product manifold needs at least one factor");
        Self { factors }
    }

    pub fn factors(&self) -> &[M] {
        &self.factors
    }

    fn check_point(&self, p: &[M::Point]) -> Result<(), GeometryError> {
        if p.len() != self.factors.len() {
            return Err(GeometryError::DimensionMismatch {
                expected: self.factors.len(),
                actual: p.len(),
            });
        }
        Ok(())
    }
}

impl<M: ChartedManifold> ChartedManifold for Product<M> {
    type Point = Vec<M::Point>;

    fn dim(&self) -> usize {
        self.factors.iter().map(ChartedManifold::dim).sum()
    }

    fn injectivity_radius(&self) -> f64 {
        self.factors
            .iter()
            .map(ChartedManifold::injectivity_radius)
            .fold(f64::INFINITY, f64::min)
    }

    fn boxplus(&self, xi: &Self::Point, u: &DVector<f64>) -> Result<Self::Point, GeometryError> {
        self.check_point(xi)?;
        check_tangent(self, u)?;
        let mut out = Vec::with_capacity(self.factors.len());
        let mut offset = 0;
        for (factor, point) in self.factors.iter().zip(xi) {
            let block = u.rows(offset, factor.dim()).into_owned();
            out.push(factor.boxplus(point, &block)?);
            offset += factor.dim();
        }
        Ok(out)
    }

    fn boxminus(&self, zeta: &Self::Point, xi: &Self::Point) -> Result<DVector<f64>, GeometryError> {
        self.check_point(zeta)?;
        self.check_point(xi)?;
        let mut out = DVector::zeros(self.dim());
        let mut offset = 0;
        for ((factor, z), x) in self.factors.iter().zip(zeta).zip(xi) {
            out.rows_mut(offset, factor.dim())
                .copy_from(&factor.boxminus(z, x)?);
            offset += factor.dim();
        }
        Ok(out)
    }

    fn transport(
        &self,
        xi: &Self::Point,
        mu: &DVector<f64>,
    ) -> Result<TransportMatrix<Self::Point>, GeometryError> {
        self.check_point(xi)?;
        check_tangent(self, mu)?;
        let dim = self.dim();
        let mut matrix = DMatrix::zeros(dim, dim);
        let mut to = Vec::with_capacity(self.factors.len());
        let mut offset = 0;
        for (factor, point) in self.factors.iter().zip(xi) {
            let block = mu.rows(offset, factor.dim()).into_owned();
            let part = factor.transport(point, &block)?;
            matrix
                .view_mut((offset, offset), (factor.dim(), factor.dim()))
                .copy_from(&part.matrix);
            to.push(part.to);
            offset += factor.dim();
        }
        Ok(TransportMatrix {
            matrix,
            from: xi.clone(),
            to,
        })
    }
}

impl<M: TransportOde> TransportOde for Product<M> {
    fn ode_state_dim(&self) -> usize {
        self.factors.iter().map(TransportOde::ode_state_dim).sum()
    }

    fn geodesic_endpoint(&self, xi: &Self::Point, mu: &DVector<f64>) -> Self::Point {
        let mut out = Vec::with_capacity(self.factors.len());
        let mut offset = 0;
        for (factor, point) in self.factors.iter().zip(xi) {
            let block = mu.rows(offset, factor.dim()).into_owned();
            out.push(factor.geodesic_endpoint(point, &block));
            offset += factor.dim();
        }
        out
    }

    fn ode_init(&self, xi: &Self::Point, v: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.ode_state_dim());
        let mut chart = 0;
        let mut state = 0;
        for (factor, point) in self.factors.iter().zip(xi) {
            let block = v.rows(chart, factor.dim()).into_owned();
            out.rows_mut(state, factor.ode_state_dim())
                .copy_from(&factor.ode_init(point, &block));
            chart += factor.dim();
            state += factor.ode_state_dim();
        }
        out
    }

    fn ode_rhs(&self, xi: &Self::Point, mu: &DVector<f64>, t: f64, w: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.ode_state_dim());
        let mut chart = 0;
        let mut state = 0;
        for (factor, point) in self.factors.iter().zip(xi) {
            let mu_block = mu.rows(chart, factor.dim()).into_owned();
            let w_block = w.rows(state, factor.ode_state_dim()).into_owned();
            out.rows_mut(state, factor.ode_state_dim())
                .copy_from(&factor.ode_rhs(point, &mu_block, t, &w_block));
            chart += factor.dim();
            state += factor.ode_state_dim();
        }
        out
    }

    fn ode_close(&self, xi: &Self::Point, mu: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim());
        let mut chart = 0;
        let mut state = 0;
        for (factor, point) in self.factors.iter().zip(xi) {
            let mu_block = mu.rows(chart, factor.dim()).into_owned();
            let w_block = w.rows(state, factor.ode_state_dim()).into_owned();
            out.rows_mut(chart, factor.dim())
                .copy_from(&factor.ode_close(point, &mu_block, &w_block));
            chart += factor.dim();
            state += factor.ode_state_dim();
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifolds::euclidean::Euclidean;
    use crate::manifolds::sphere::{sphere_transport, Sphere, UnitVector};
    use approx::assert_abs_diff_eq;
    use nalgebra::{Vector2, Vector3};
    use std::f64::consts::PI;

    #[test]
    fn product_of_flat_factors_is_flat_concatenation() {
        let space = Product::new(vec![Euclidean::new(2), Euclidean::new(2)]);
        assert_eq!(space.dim(), 4);
        assert_eq!(space.injectivity_radius(), f64::INFINITY);
        let xi = vec![nalgebra::dvector![1.0, 2.0], nalgebra::dvector![3.0, 4.0]];
        let u = nalgebra::dvector![0.1, 0.2, 0.3, 0.4];
        let zeta = space.boxplus(&xi, &u).unwrap();
        assert_eq!(zeta[0], nalgebra::dvector![1.1, 2.2]);
        assert_eq!(zeta[1], nalgebra::dvector![3.3, 4.4]);
        assert_abs_diff_eq!(space.boxminus(&zeta, &xi).unwrap(), u, epsilon = 1e-15);
        assert_eq!(
            space.transport(&xi, &u).unwrap().matrix,
            DMatrix::identity(4, 4)
        );
    }

    #[test]
    fn two_sphere_product_has_blockwise_chart_and_radius_pi() {
        let space = Product::new(vec![Sphere, Sphere]);
        assert_eq!(space.dim(), 4);
        assert_eq!(space.injectivity_radius(), PI);
        let north = UnitVector::new(Vector3::new(0.0, 0.0, 1.0)).unwrap();
        let px = UnitVector::new(Vector3::new(1.0, 0.0, 0.0)).unwrap();
        let xi = vec![north, px];
        let u = nalgebra::dvector![PI / 2.0, 0.0, 0.0, 0.3];
        let zeta = space.boxplus(&xi, &u).unwrap();
        assert_abs_diff_eq!(
            *zeta[0].vector(),
            Vector3::new(1.0, 0.0, 0.0),
            epsilon = 1e-12
        );
        let back = space.boxminus(&zeta, &xi).unwrap();
        assert_abs_diff_eq!(back, u, epsilon = 1e-10);
        assert_eq!(space.boxplus(&xi, &DVector::zeros(4)).unwrap(), xi);
    }

    #[test]
    fn transport_is_block_diagonal() {
        let space = Product::new(vec![Sphere, Sphere]);
        let north = UnitVector::new(Vector3::new(0.0, 0.0, 1.0)).unwrap();
        let px = UnitVector::new(Vector3::new(1.0, 0.0, 0.0)).unwrap();
        let xi = vec![north, px];
        let mu = nalgebra::dvector![PI / 2.0, 0.0, 0.1, -0.2];
        let whole = space.transport(&xi, &mu).unwrap();
        let first = sphere_transport(&north, &Vector2::new(PI / 2.0, 0.0)).unwrap();
        let second = sphere_transport(&px, &Vector2::new(0.1, -0.2)).unwrap();
        assert_abs_diff_eq!(
            whole.matrix.view((0, 0), (2, 2)).into_owned(),
            first.matrix,
            epsilon = 0.0
        );
        assert_abs_diff_eq!(
            whole.matrix.view((2, 2), (2, 2)).into_owned(),
            second.matrix,
            epsilon = 0.0
        );
        assert_eq!(whole.matrix.view((0, 2), (2, 2)).iter().sum::<f64>(), 0.0);
        assert_eq!(whole.to[0], first.to);
        assert_eq!(whole.to[1], second.to);
    }

    #[test]
    fn malformed_points_are_rejected() {
        let space = Product::new(vec![Sphere, Sphere]);
        let north = UnitVector::new(Vector3::new(0.0, 0.0, 1.0)).unwrap();
        let xi = vec![north];
        let err = space.boxplus(&xi, &DVector::zeros(4));
        assert!(matches!(err, Err(GeometryError::DimensionMismatch { .. })));
        let xi = vec![north, north];
        let err = space.boxplus(&xi, &DVector::zeros(3));
        assert!(matches!(err, Err(GeometryError::DimensionMismatch { .. })));
    }

    #[test]
    #[should_panic(expected = "at least one factor")]
    fn empty_product_panics() {
        let _ = Product::<Sphere>::new(vec![]);
    }
}
