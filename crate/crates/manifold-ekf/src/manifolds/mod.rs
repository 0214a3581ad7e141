//! Concrete manifolds: Euclidean space, the rotation group SO(3), the unit
//! sphere S², and finite products.

pub mod euclidean;
pub mod product;
pub mod so3;
pub mod sphere;
