//! Closures for analytic data fields.

use std::sync::Arc;

use crate::mesh::Point;

pub type ScalarFn = Arc<dyn Fn(Point) -> f64 + Send + Sync>;
pub type VectorFn = Arc<dyn Fn(Point) -> [f64; 2] + Send + Sync>;
/// Gradient of a vector field, `grad[c][d] = ∂u_c/∂x_d`.
pub type TensorFn = Arc<dyn Fn(Point) -> [[f64; 2]; 2] + Send + Sync>;
/// Closure of a coefficient in the porosity, e.g. `alpha(eps)`.
pub type Closure1 = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

pub fn constant_scalar(c: f64) -> ScalarFn {
    Arc::new(move |_| c)
}

pub fn constant_vector(c: [f64; 2]) -> VectorFn {
    Arc::new(move |_| c)
}

pub fn constant_closure(c: f64) -> Closure1 {
    Arc::new(move |_| c)
}
