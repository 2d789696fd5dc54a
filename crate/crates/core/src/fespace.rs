//! Mini-element velocity space and P1 pressure space.
//!
//! On each triangle the scalar velocity basis is `λ0, λ1, λ2, b` with the
//! cubic bubble `b = λ0 λ1 λ2`. Scalar DOFs are the mesh vertices followed by
//! one bubble per triangle. Velocity DOFs are laid out in four blocks:
//! vertex x-components, vertex y-components, bubble x-components, bubble
//! y-components. Pressure DOFs are the vertices.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::fields::VectorFn;
use crate::mesh::{BoundaryLabel, Mesh, Point};

/// Affine data of one triangle.
#[derive(Clone, Copy, Debug)]
pub struct ElementGeometry {
    pub corners: [Point; 3],
    pub area: f64,
    /// Constant gradients of the barycentric coordinates.
    pub grad_lambda: [[f64; 2]; 3],
}

impl ElementGeometry {
    pub fn new(corners: [Point; 3]) -> Self {
        let [p0, p1, p2] = corners;
        let twice = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
        let mut grad_lambda = [[0.0; 2]; 3];
        for i in 0..3 {
            let (pj, pk) = (corners[(i + 1) % 3], corners[(i + 2) % 3]);
            grad_lambda[i] = [(pj[1] - pk[1]) / twice, (pk[0] - pj[0]) / twice];
        }
        ElementGeometry { corners, area: 0.5 * twice, grad_lambda }
    }

    pub fn of(mesh: &Mesh, t: usize) -> Self {
        ElementGeometry::new(mesh.corners(t))
    }

    pub fn point(&self, lambda: [f64; 3]) -> Point {
        let c = &self.corners;
        [
            lambda[0] * c[0][0] + lambda[1] * c[1][0] + lambda[2] * c[2][0],
            lambda[0] * c[0][1] + lambda[1] * c[1][1] + lambda[2] * c[2][1],
        ]
    }

    /// Gradient of the P1 function with the given vertex values.
    pub fn p1_gradient(&self, nodal: [f64; 3]) -> [f64; 2] {
        let g = &self.grad_lambda;
        [
            nodal[0] * g[0][0] + nodal[1] * g[1][0] + nodal[2] * g[2][0],
            nodal[0] * g[0][1] + nodal[1] * g[1][1] + nodal[2] * g[2][1],
        ]
    }
}

/// Values of the four scalar mini-element basis functions at a point.
#[derive(Clone, Copy, Debug)]
pub struct BasisValues {
    pub lambda: [f64; 3],
    pub value: [f64; 4],
    pub grad: [[f64; 2]; 4],
    /// Laplacian of the bubble (the P1 functions have none).
    pub bubble_laplacian: f64,
}

pub fn eval_basis(geom: &ElementGeometry, lambda: [f64; 3]) -> BasisValues {
    let g = &geom.grad_lambda;
    let [l0, l1, l2] = lambda;
    let pair = [l1 * l2, l0 * l2, l0 * l1];
    let mut gb = [0.0; 2];
    for i in 0..3 {
        gb[0] += pair[i] * g[i][0];
        gb[1] += pair[i] * g[i][1];
    }
    let dot = |i: usize, j: usize| g[i][0] * g[j][0] + g[i][1] * g[j][1];
    let bubble_laplacian = 2.0 * (l2 * dot(0, 1) + l1 * dot(0, 2) + l0 * dot(1, 2));
    BasisValues {
        lambda,
        value: [l0, l1, l2, l0 * l1 * l2],
        grad: [g[0], g[1], g[2], gb],
        bubble_laplacian,
    }
}

/// Bubble value and gradient with respect to the reference coordinates
/// `(ξ, η)`, where `λ1 = 1 - ξ - η`, `λ2 = ξ`, `λ3 = η`.
pub fn bubble_eval(lambda: [f64; 3]) -> (f64, [f64; 2]) {
    let [l1, l2, l3] = lambda;
    // ∂λ/∂ξ = (-1, 1, 0), ∂λ/∂η = (-1, 0, 1)
    let d_xi = -l2 * l3 + l1 * l3;
    let d_eta = -l2 * l3 + l1 * l2;
    (l1 * l2 * l3, [d_xi, d_eta])
}

/// Pressure normalization.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Gauge {
    /// `∫ p = 0`, imposed by one Lagrange multiplier.
    ZeroMean,
    None,
}

#[derive(Clone, Debug)]
pub struct FeLayout {
    pub n_vertices: usize,
    pub n_triangles: usize,
    /// Per vertex: lies on a Dirichlet segment.
    pub dirichlet_vertex: Vec<bool>,
    pub gauge: Gauge,
}

impl FeLayout {
    pub fn n_scalar(&self) -> usize {
        self.n_vertices + self.n_triangles
    }

    pub fn n_velocity(&self) -> usize {
        2 * self.n_scalar()
    }

    pub fn n_pressure(&self) -> usize {
        self.n_vertices
    }

    pub fn n_multipliers(&self) -> usize {
        match self.gauge {
            Gauge::ZeroMean => 1,
            Gauge::None => 0,
        }
    }

    /// System total unknowns: velocity + pressure (+ gauge multiplier).
    pub fn stu(&self) -> usize {
        self.n_velocity() + self.n_pressure() + self.n_multipliers()
    }

    /// Velocity DOF of component `comp` for scalar DOF `s`.
    #[inline]
    pub fn velocity_dof(&self, comp: usize, s: usize) -> usize {
        if s < self.n_vertices {
            comp * self.n_vertices + s
        } else {
            2 * self.n_vertices + comp * self.n_triangles + (s - self.n_vertices)
        }
    }

    /// Scalar DOFs of triangle `t`: its three vertices, then its bubble.
    #[inline]
    pub fn element_scalar_dofs(&self, t: usize, tri: &[usize; 3]) -> [usize; 4] {
        [tri[0], tri[1], tri[2], self.n_vertices + t]
    }

    pub fn is_dirichlet(&self, dof: usize) -> bool {
        dof < 2 * self.n_vertices && self.dirichlet_vertex[dof % self.n_vertices]
    }

    pub fn dirichlet_mask(&self) -> Vec<bool> {
        (0..self.n_velocity()).map(|d| self.is_dirichlet(d)).collect()
    }

    pub fn n_constrained(&self) -> usize {
        2 * self.dirichlet_vertex.iter().filter(|&&d| d).count()
    }

    /// Element coefficients of a velocity vector, `[comp][local]`.
    #[inline]
    pub fn gather(&self, t: usize, tri: &[usize; 3], u: &[f64]) -> [[f64; 4]; 2] {
        let s = self.element_scalar_dofs(t, tri);
        let mut out = [[0.0; 4]; 2];
        for (c, row) in out.iter_mut().enumerate() {
            for (k, v) in row.iter_mut().enumerate() {
                *v = u[self.velocity_dof(c, s[k])];
            }
        }
        out
    }
}

pub fn build_layout(mesh: &Mesh, dirichlet_labels: &[BoundaryLabel], gauge: Gauge) -> Result<FeLayout> {
    let present = mesh.boundary_labels();
    for l in dirichlet_labels {
        if !present.contains(l) {
            return Err(Error::Config(format!("unknown boundary label {l}")));
        }
    }
    let mut dirichlet_vertex = vec![false; mesh.n_vertices()];
    for be in mesh.boundary_edges() {
        if dirichlet_labels.contains(&be.label) {
            dirichlet_vertex[be.vertices[0]] = true;
            dirichlet_vertex[be.vertices[1]] = true;
        }
    }
    Ok(FeLayout { n_vertices: mesh.n_vertices(), n_triangles: mesh.n_triangles(), dirichlet_vertex, gauge })
}

/// Data defining the discrete lift `G_h` of the Dirichlet values.
#[derive(Clone)]
pub enum LiftData {
    /// Boundary function per Dirichlet label. Vertices shared by several
    /// labels take the value of the smallest label.
    Boundary(BTreeMap<BoundaryLabel, VectorFn>),
    /// Analytic extension defined on the whole domain.
    Global(VectorFn),
}

/// Nodal interpolant of the lift. Bubble coefficients are zero.
pub fn dirichlet_lift(data: &LiftData, layout: &FeLayout, mesh: &Mesh) -> Vec<f64> {
    let mut g = vec![0.0; layout.n_velocity()];
    match data {
        LiftData::Global(field) => {
            for (v, &p) in mesh.vertices().iter().enumerate() {
                let val = field(p);
                g[layout.velocity_dof(0, v)] = val[0];
                g[layout.velocity_dof(1, v)] = val[1];
            }
        }
        LiftData::Boundary(by_label) => {
            let mut owner: Vec<Option<BoundaryLabel>> = vec![None; mesh.n_vertices()];
            for be in mesh.boundary_edges() {
                if by_label.contains_key(&be.label) {
                    for &v in &be.vertices {
                        owner[v] = Some(owner[v].map_or(be.label, |o| o.min(be.label)));
                    }
                }
            }
            for (v, label) in owner.iter().enumerate() {
                if let Some(label) = label {
                    let val = by_label[label](mesh.vertices()[v]);
                    g[layout.velocity_dof(0, v)] = val[0];
                    g[layout.velocity_dof(1, v)] = val[1];
                }
            }
        }
    }
    g
}

/// Mini-element interpolant of an analytic field: nodal values at vertices,
/// zero bubbles.
pub fn interpolate_velocity(field: &VectorFn, layout: &FeLayout, mesh: &Mesh) -> Vec<f64> {
    dirichlet_lift(&LiftData::Global(field.clone()), layout, mesh)
}

/// Evaluates a velocity coefficient vector at barycentric coordinates of `t`.
pub fn eval_velocity(mesh: &Mesh, layout: &FeLayout, u: &[f64], t: usize, lambda: [f64; 3]) -> [f64; 2] {
    let geom = ElementGeometry::of(mesh, t);
    let b = eval_basis(&geom, lambda);
    let c = layout.gather(t, &mesh.triangles()[t], u);
    let mut out = [0.0; 2];
    for comp in 0..2 {
        for k in 0..4 {
            out[comp] += c[comp][k] * b.value[k];
        }
    }
    out
}
