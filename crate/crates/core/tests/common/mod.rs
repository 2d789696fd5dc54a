//! Brute-force dense reference assembly of the discrete forms.
//!
//! Everything here is recomputed from the mesh coordinates: barycentric
//! coordinates come from inverting the affine element map at each physical
//! quadrature point, and the forms are integrated entry by entry into dense
//! matrices. Only the quadrature points are shared with the library.

#![allow(dead_code)]

use bdf_core::fields::{Closure1, VectorFn};
use bdf_core::mesh::{BoundaryEdge, Mesh, Point};
use bdf_core::quadrature::TriangleRule;
use bdf_core::sparse::CsrMatrix;
use rand::Rng;

pub type Dense = Vec<Vec<f64>>;

/// Values and gradients of the four local scalar basis functions at a point.
struct LocalPoint {
    weight: f64,
    x: Point,
    phi: [f64; 4],
    grad: [[f64; 2]; 4],
    eps: f64,
    grad_eps: [f64; 2],
}

struct Element {
    /// Global scalar DOF of each local basis function.
    scalar: [usize; 4],
    vertices: [usize; 3],
    points: Vec<LocalPoint>,
}

pub struct Oracle {
    nv: usize,
    nt: usize,
    elements: Vec<Element>,
    alpha: Closure1,
    beta: Closure1,
    re: f64,
}

/// Barycentric coordinates of `x` and their gradients, from `x = p0 + J ξ`.
fn barycentric(c: [Point; 3], x: Point) -> ([f64; 3], [[f64; 2]; 3]) {
    let j = [[c[1][0] - c[0][0], c[2][0] - c[0][0]], [c[1][1] - c[0][1], c[2][1] - c[0][1]]];
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    let inv = [[j[1][1] / det, -j[0][1] / det], [-j[1][0] / det, j[0][0] / det]];
    let r = [x[0] - c[0][0], x[1] - c[0][1]];
    let xi = inv[0][0] * r[0] + inv[0][1] * r[1];
    let eta = inv[1][0] * r[0] + inv[1][1] * r[1];
    // rows of J⁻¹ are ∇ξ and ∇η
    let g1 = inv[0];
    let g2 = inv[1];
    let g0 = [-g1[0] - g2[0], -g1[1] - g2[1]];
    ([1.0 - xi - eta, xi, eta], [g0, g1, g2])
}

impl Oracle {
    pub fn new(mesh: &Mesh, eps_nodal: &[f64], alpha: Closure1, beta: Closure1, re: f64, rule: &TriangleRule) -> Self {
        let nv = mesh.n_vertices();
        let nt = mesh.n_triangles();
        let vs = mesh.vertices();
        let mut elements = Vec::with_capacity(nt);
        for (t, tri) in mesh.triangles().iter().enumerate() {
            let c = [vs[tri[0]], vs[tri[1]], vs[tri[2]]];
            let area = 0.5 * ((c[1][0] - c[0][0]) * (c[2][1] - c[0][1]) - (c[2][0] - c[0][0]) * (c[1][1] - c[0][1])).abs();
            let e = [eps_nodal[tri[0]], eps_nodal[tri[1]], eps_nodal[tri[2]]];
            let points = rule
                .points
                .iter()
                .zip(&rule.weights)
                .map(|(lam_ref, w)| {
                    let x = [
                        lam_ref[0] * c[0][0] + lam_ref[1] * c[1][0] + lam_ref[2] * c[2][0],
                        lam_ref[0] * c[0][1] + lam_ref[1] * c[1][1] + lam_ref[2] * c[2][1],
                    ];
                    let (l, g) = barycentric(c, x);
                    let bubble = l[0] * l[1] * l[2];
                    let mut gb = [0.0; 2];
                    for d in 0..2 {
                        gb[d] = g[0][d] * l[1] * l[2] + l[0] * g[1][d] * l[2] + l[0] * l[1] * g[2][d];
                    }
                    let eps = e[0] * l[0] + e[1] * l[1] + e[2] * l[2];
                    let grad_eps = [
                        e[0] * g[0][0] + e[1] * g[1][0] + e[2] * g[2][0],
                        e[0] * g[0][1] + e[1] * g[1][1] + e[2] * g[2][1],
                    ];
                    LocalPoint {
                        weight: w * area,
                        x,
                        phi: [l[0], l[1], l[2], bubble],
                        grad: [g[0], g[1], g[2], gb],
                        eps,
                        grad_eps,
                    }
                })
                .collect();
            elements.push(Element { scalar: [tri[0], tri[1], tri[2], nv + t], vertices: *tri, points });
        }
        Oracle { nv, nt, elements, alpha, beta, re }
    }

    pub fn n_velocity(&self) -> usize {
        2 * (self.nv + self.nt)
    }

    /// Global velocity index of component `c` of scalar DOF `s`.
    pub fn dof(&self, c: usize, s: usize) -> usize {
        if s < self.nv {
            c * self.nv + s
        } else {
            2 * self.nv + c * self.nt + (s - self.nv)
        }
    }

    fn value(&self, el: &Element, q: &LocalPoint, u: &[f64]) -> ([f64; 2], [[f64; 2]; 2]) {
        let mut v = [0.0; 2];
        let mut g = [[0.0; 2]; 2];
        for c in 0..2 {
            for k in 0..4 {
                let coef = u[self.dof(c, el.scalar[k])];
                v[c] += coef * q.phi[k];
                g[c][0] += coef * q.grad[k][0];
                g[c][1] += coef * q.grad[k][1];
            }
        }
        (v, g)
    }

    fn square(&self) -> Dense {
        vec![vec![0.0; self.n_velocity()]; self.n_velocity()]
    }

    /// `(ε_h/Re ∇u, ∇v) + (α(ε_h) u, v)`.
    pub fn a(&self) -> Dense {
        let mut m = self.square();
        for el in &self.elements {
            for q in &el.points {
                for c in 0..2 {
                    for i in 0..4 {
                        for j in 0..4 {
                            let grad = q.grad[i][0] * q.grad[j][0] + q.grad[i][1] * q.grad[j][1];
                            m[self.dof(c, el.scalar[i])][self.dof(c, el.scalar[j])] += q.weight
                                * (q.eps / self.re * grad + (self.alpha)(q.eps) * q.phi[i] * q.phi[j]);
                        }
                    }
                }
            }
        }
        m
    }

    /// `B[k][v] = (∇ε_h·v + ε_h div v, ψ_k)`.
    pub fn b(&self) -> Dense {
        let mut m = vec![vec![0.0; self.n_velocity()]; self.nv];
        for el in &self.elements {
            for q in &el.points {
                for (kv, &k) in el.vertices.iter().enumerate() {
                    let psi = q.phi[kv];
                    for c in 0..2 {
                        for j in 0..4 {
                            let div = q.grad_eps[c] * q.phi[j] + q.eps * q.grad[j][c];
                            m[k][self.dof(c, el.scalar[j])] += q.weight * div * psi;
                        }
                    }
                }
            }
        }
        m
    }

    /// `(ε_h (T·∇)u, v) + ½ (div(ε_h T) u, v)`.
    pub fn d(&self, transport: &[f64]) -> Dense {
        let mut m = self.square();
        for el in &self.elements {
            for q in &el.points {
                let (t, gt) = self.value(el, q, transport);
                let div = q.grad_eps[0] * t[0] + q.grad_eps[1] * t[1] + q.eps * (gt[0][0] + gt[1][1]);
                for c in 0..2 {
                    for i in 0..4 {
                        for j in 0..4 {
                            let adv = q.eps * (t[0] * q.grad[j][0] + t[1] * q.grad[j][1]);
                            m[self.dof(c, el.scalar[i])][self.dof(c, el.scalar[j])] +=
                                q.weight * (adv + 0.5 * div * q.phi[j]) * q.phi[i];
                        }
                    }
                }
            }
        }
        m
    }

    /// `(β(ε_h) |U| u, v)`.
    pub fn forchheimer(&self, drag: &[f64]) -> Dense {
        let mut m = self.square();
        for el in &self.elements {
            for q in &el.points {
                let (u, _) = self.value(el, q, drag);
                let s = (self.beta)(q.eps) * (u[0] * u[0] + u[1] * u[1]).sqrt();
                for c in 0..2 {
                    for i in 0..4 {
                        for j in 0..4 {
                            m[self.dof(c, el.scalar[i])][self.dof(c, el.scalar[j])] +=
                                q.weight * s * q.phi[i] * q.phi[j];
                        }
                    }
                }
            }
        }
        m
    }

    /// `(ε_h f, v)`.
    pub fn load(&self, f: &VectorFn) -> Vec<f64> {
        let mut out = vec![0.0; self.n_velocity()];
        for el in &self.elements {
            for q in &el.points {
                let fv = f(q.x);
                for c in 0..2 {
                    for i in 0..4 {
                        out[self.dof(c, el.scalar[i])] += q.weight * q.eps * fv[c] * q.phi[i];
                    }
                }
            }
        }
        out
    }
}

/// Largest entrywise difference relative to the largest entry of `expected`.
pub fn relative_difference(actual: &CsrMatrix, expected: &Dense) -> f64 {
    let a = actual.to_dense();
    assert_eq!(a.len(), expected.len());
    let scale = expected.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    let diff = a
        .iter()
        .zip(expected)
        .flat_map(|(ra, re)| {
            assert_eq!(ra.len(), re.len());
            ra.iter().zip(re).map(|(x, y)| (x - y).abs())
        })
        .fold(0.0f64, f64::max);
    diff / scale.max(f64::MIN_POSITIVE)
}

pub fn relative_vector_difference(actual: &[f64], expected: &[f64]) -> f64 {
    assert_eq!(actual.len(), expected.len());
    let scale = expected.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let diff = actual.iter().zip(expected).map(|(x, y)| (x - y).abs()).fold(0.0f64, f64::max);
    diff / scale.max(f64::MIN_POSITIVE)
}

/// Random vector with entries in `[-1, 1]`, zero where `fixed` is set.
pub fn random_free_vector(rng: &mut impl Rng, fixed: &[bool]) -> Vec<f64> {
    fixed.iter().map(|&f| if f { 0.0 } else { rng.gen_range(-1.0..1.0) }).collect()
}

/// A few small meshes with distorted, non-uniform elements.
pub fn small_meshes() -> Vec<Mesh> {
    let edge = |a, b, label| BoundaryEdge { vertices: [a, b], label };
    let single = Mesh::new(
        vec![[0.1, 0.05], [0.9, 0.2], [0.3, 0.8]],
        vec![[0, 1, 2]],
        vec![0],
        vec![edge(0, 1, 1), edge(1, 2, 2), edge(2, 0, 4)],
        None,
    )
    .unwrap();
    let quad = Mesh::new(
        vec![[0.0, 0.0], [1.0, 0.1], [0.9, 0.85], [0.05, 1.0], [0.45, 0.55]],
        vec![[0, 1, 4], [1, 2, 4], [2, 3, 4], [3, 0, 4]],
        vec![0; 4],
        vec![edge(0, 1, 1), edge(1, 2, 2), edge(2, 3, 3), edge(3, 0, 4)],
        None,
    )
    .unwrap();
    let strip = Mesh::new(
        vec![[0.0, 0.0], [0.5, 0.0], [1.0, 0.0], [0.0, 1.0], [0.6, 1.0], [1.0, 1.0]],
        vec![[0, 1, 4], [0, 4, 3], [1, 2, 5], [1, 5, 4]],
        vec![0; 4],
        vec![edge(0, 1, 1), edge(1, 2, 1), edge(2, 5, 2), edge(5, 4, 3), edge(4, 3, 3), edge(3, 0, 4)],
        None,
    )
    .unwrap();
    let grid = bdf_core::mesh::uniform_mesh(2, 2, bdf_core::mesh::Rect::unit_square()).unwrap();
    vec![single, quad, strip, grid]
}
