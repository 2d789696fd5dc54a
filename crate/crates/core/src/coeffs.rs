//! Porosity, Darcy and Forchheimer coefficients.

use crate::error::{Error, Result};
use crate::fespace::ElementGeometry;
use crate::fields::{Closure1, ScalarFn, VectorFn};
use crate::mesh::Mesh;
use crate::quadrature::TriangleRule;

/// Slack allowed on the porosity bounds.
pub const POROSITY_SLACK: f64 = 1e-12;

/// Coefficients of one problem on one mesh.
#[derive(Clone)]
pub struct CoefficientSet {
    pub epsilon: ScalarFn,
    pub alpha: Closure1,
    pub beta: Closure1,
    pub reynolds: f64,
    /// Nodal values of the P1 interpolant `ε_h`.
    pub eps_h: Vec<f64>,
    pub eps0: f64,
}

impl CoefficientSet {
    pub fn new(
        mesh: &Mesh,
        epsilon: ScalarFn,
        alpha: Closure1,
        beta: Closure1,
        reynolds: f64,
        eps0: f64,
    ) -> Result<Self> {
        if !(reynolds > 0.0) || !reynolds.is_finite() {
            return Err(Error::InvalidInput(format!("Reynolds number must be positive, got {reynolds}")));
        }
        if !(eps0 > 0.0 && eps0 <= 1.0) {
            return Err(Error::InvalidInput(format!("porosity lower bound {eps0} outside (0, 1]")));
        }
        for e in [eps0, 1.0] {
            let (a, b) = (alpha(e), beta(e));
            // The packed-bed closures vanish at ε = 1.
            if !(a >= 0.0 && b >= 0.0) {
                return Err(Error::InvalidInput(format!(
                    "Darcy/Forchheimer closures must be non-negative on [eps0, 1]: alpha({e}) = {a}, beta({e}) = {b}"
                )));
            }
        }
        let eps_h = interpolate_porosity(&epsilon, mesh, eps0)?;
        Ok(CoefficientSet { epsilon, alpha, beta, reynolds, eps_h, eps0 })
    }

    /// Nodal values of `ε_h` on triangle `t`.
    #[inline]
    pub fn element_eps(&self, tri: &[usize; 3]) -> [f64; 3] {
        [self.eps_h[tri[0]], self.eps_h[tri[1]], self.eps_h[tri[2]]]
    }
}

/// Nodal P1 interpolant of the porosity, checked against `[eps0, 1]`.
pub fn interpolate_porosity(epsilon: &ScalarFn, mesh: &Mesh, eps0: f64) -> Result<Vec<f64>> {
    mesh.vertices()
        .iter()
        .enumerate()
        .map(|(vertex, &p)| {
            let value = epsilon(p);
            if value >= eps0 - POROSITY_SLACK && value <= 1.0 + POROSITY_SLACK {
                Ok(value)
            } else {
                Err(Error::PorosityRange { vertex, value, eps0 })
            }
        })
        .collect()
}

/// Cell means of the forcing and of `α(ε)`, `β(ε)`.
#[derive(Clone, Debug)]
pub struct CellAverages {
    pub f_h: Vec<[f64; 2]>,
    pub alpha_h: Vec<f64>,
    pub beta_h: Vec<f64>,
}

pub fn cellwise_averages(mesh: &Mesh, coeffs: &CoefficientSet, f: &VectorFn, rule: &TriangleRule) -> CellAverages {
    let n = mesh.n_triangles();
    let mut out = CellAverages { f_h: Vec::with_capacity(n), alpha_h: Vec::with_capacity(n), beta_h: Vec::with_capacity(n) };
    for t in 0..n {
        let geom = ElementGeometry::of(mesh, t);
        let (mut fx, mut fy, mut a, mut b) = (0.0, 0.0, 0.0, 0.0);
        for (lam, w) in rule.points.iter().zip(&rule.weights) {
            let x = geom.point(*lam);
            let fv = f(x);
            let e = (coeffs.epsilon)(x);
            fx += w * fv[0];
            fy += w * fv[1];
            a += w * (coeffs.alpha)(e);
            b += w * (coeffs.beta)(e);
        }
        out.f_h.push([fx, fy]);
        out.alpha_h.push(a);
        out.beta_h.push(b);
    }
    out
}
