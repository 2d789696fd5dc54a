//! Element and global assembly of the discrete forms.
//!
//! Velocity forms are assembled on the full velocity space, including the
//! Dirichlet DOFs; [`apply_constraints`] then eliminates those and builds
//! the saddle-point system
//!
//! ```text
//! [ K   -Bᵀ  0 ] [w]   [F - K G]
//! [-B    0   m ] [p] = [   0   ]
//! [ 0    mᵀ  0 ] [λ]   [   0   ]
//! ```
//!
//! where the last row and column exist only with a zero-mean gauge.
//! Accumulation is sequential in element order, so results are
//! reproducible bit for bit.

use crate::coeffs::CoefficientSet;
use crate::fespace::{eval_basis, BasisValues, ElementGeometry, FeLayout, Gauge};
use crate::fields::{Closure1, VectorFn};
use crate::mesh::Mesh;
use crate::quadrature::TriangleRule;
use crate::sparse::{norm2, CsrMatrix, DirectSolver, SolveFailure, TripletBuilder};

/// Scalar element matrix over the local basis `λ0, λ1, λ2, b`.
pub type ScalarBlock = [[f64; 4]; 4];

/// One quadrature point of one element, with `ε_h` and its gradient.
#[derive(Clone, Copy, Debug)]
pub struct QuadPoint {
    /// Weight including the element area.
    pub weight: f64,
    pub basis: BasisValues,
    pub eps: f64,
    pub grad_eps: [f64; 2],
}

/// Quadrature points of an element with the local `ε_h` data attached.
pub fn element_points(geom: &ElementGeometry, eps_nodal: [f64; 3], rule: &TriangleRule) -> Vec<QuadPoint> {
    let grad_eps = geom.p1_gradient(eps_nodal);
    rule.points
        .iter()
        .zip(&rule.weights)
        .map(|(lam, w)| QuadPoint {
            weight: w * geom.area,
            basis: eval_basis(geom, *lam),
            eps: lam[0] * eps_nodal[0] + lam[1] * eps_nodal[1] + lam[2] * eps_nodal[2],
            grad_eps,
        })
        .collect()
}

/// Value of a local velocity at a quadrature point.
#[inline]
pub fn velocity_at(coef: &[[f64; 4]; 2], b: &BasisValues) -> [f64; 2] {
    let mut u = [0.0; 2];
    for c in 0..2 {
        for k in 0..4 {
            u[c] += coef[c][k] * b.value[k];
        }
    }
    u
}

/// Gradient `g[c][d] = ∂u_c/∂x_d` of a local velocity.
#[inline]
pub fn velocity_gradient(coef: &[[f64; 4]; 2], b: &BasisValues) -> [[f64; 2]; 2] {
    let mut g = [[0.0; 2]; 2];
    for c in 0..2 {
        for k in 0..4 {
            g[c][0] += coef[c][k] * b.grad[k][0];
            g[c][1] += coef[c][k] * b.grad[k][1];
        }
    }
    g
}

#[inline]
fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// `(1/Re)(ε_h ∇φ_j, ∇φ_i) + (α(ε_h) φ_j, φ_i)`, identical for both components.
pub fn element_a(points: &[QuadPoint], alpha: &Closure1, reynolds: f64) -> ScalarBlock {
    let mut k = [[0.0; 4]; 4];
    for q in points {
        let visc = q.weight * q.eps / reynolds;
        let drag = q.weight * alpha(q.eps);
        let b = &q.basis;
        for i in 0..4 {
            for j in 0..4 {
                k[i][j] += visc * dot(b.grad[i], b.grad[j]) + drag * b.value[i] * b.value[j];
            }
        }
    }
    k
}

/// `out[k][c][j] = (div(ε_h φ_j e_c), ψ_k)` with `ψ_k` the P1 pressure basis.
pub fn element_b(points: &[QuadPoint]) -> [[[f64; 4]; 2]; 3] {
    let mut out = [[[0.0; 4]; 2]; 3];
    for q in points {
        let b = &q.basis;
        for (k, row) in out.iter_mut().enumerate() {
            let psi = q.weight * b.lambda[k];
            for c in 0..2 {
                for j in 0..4 {
                    row[c][j] += psi * (q.grad_eps[c] * b.value[j] + q.eps * b.grad[j][c]);
                }
            }
        }
    }
    out
}

/// Transport part `d_h(T; φ_j, φ_i)` and Forchheimer part
/// `(β(ε_h)|U| φ_j, φ_i)` for local transport `T` and drag field `U`.
pub fn element_convection(
    points: &[QuadPoint],
    transport: &[[f64; 4]; 2],
    drag: &[[f64; 4]; 2],
    beta: &Closure1,
) -> (ScalarBlock, ScalarBlock) {
    let mut d = [[0.0; 4]; 4];
    let mut m = [[0.0; 4]; 4];
    for q in points {
        let b = &q.basis;
        let t = velocity_at(transport, b);
        let gt = velocity_gradient(transport, b);
        let div_eps_t = dot(q.grad_eps, t) + q.eps * (gt[0][0] + gt[1][1]);
        let u = velocity_at(drag, b);
        let weight_m = q.weight * beta(q.eps) * (u[0] * u[0] + u[1] * u[1]).sqrt();
        for j in 0..4 {
            let adv = q.eps * dot(t, b.grad[j]) + 0.5 * div_eps_t * b.value[j];
            for i in 0..4 {
                d[i][j] += q.weight * adv * b.value[i];
                m[i][j] += weight_m * b.value[j] * b.value[i];
            }
        }
    }
    (d, m)
}

/// `(ε_h f, φ_i e_c)` laid out as `[c][i]`.
pub fn element_load(geom: &ElementGeometry, points: &[QuadPoint], f: &VectorFn) -> [[f64; 4]; 2] {
    let mut out = [[0.0; 4]; 2];
    for q in points {
        let fv = f(geom.point(q.basis.lambda));
        for c in 0..2 {
            for i in 0..4 {
                out[c][i] += q.weight * q.eps * fv[c] * q.basis.value[i];
            }
        }
    }
    out
}

/// Shared inputs of the global assembly routines.
#[derive(Clone, Copy)]
pub struct AssemblyContext<'a> {
    pub mesh: &'a Mesh,
    pub coeffs: &'a CoefficientSet,
    pub layout: &'a FeLayout,
    pub rule: &'a TriangleRule,
}

impl<'a> AssemblyContext<'a> {
    fn for_each_element(&self, mut body: impl FnMut(usize, &[usize; 3], &ElementGeometry, &[QuadPoint])) {
        for (t, tri) in self.mesh.triangles().iter().enumerate() {
            let geom = ElementGeometry::of(self.mesh, t);
            let points = element_points(&geom, self.coeffs.element_eps(tri), self.rule);
            body(t, tri, &geom, &points);
        }
    }

    fn scatter_scalar(&self, out: &mut TripletBuilder, t: usize, tri: &[usize; 3], block: &ScalarBlock) {
        let s = self.layout.element_scalar_dofs(t, tri);
        for c in 0..2 {
            for i in 0..4 {
                let row = self.layout.velocity_dof(c, s[i]);
                for j in 0..4 {
                    out.push(row, self.layout.velocity_dof(c, s[j]), block[i][j]);
                }
            }
        }
    }
}

/// Velocity–velocity matrix of `a_h`.
pub fn assemble_a(ctx: &AssemblyContext) -> CsrMatrix {
    let n = ctx.layout.n_velocity();
    let mut t = TripletBuilder::with_capacity(n, n, 32 * ctx.mesh.n_triangles());
    ctx.for_each_element(|e, tri, _, points| {
        let k = element_a(points, &ctx.coeffs.alpha, ctx.coeffs.reynolds);
        ctx.scatter_scalar(&mut t, e, tri, &k);
    });
    t.build()
}

/// Pressure–velocity matrix with `B[q][v] = b_h(v, ψ_q)`.
pub fn assemble_b(ctx: &AssemblyContext) -> CsrMatrix {
    let layout = ctx.layout;
    let mut t = TripletBuilder::with_capacity(layout.n_pressure(), layout.n_velocity(), 24 * ctx.mesh.n_triangles());
    ctx.for_each_element(|e, tri, _, points| {
        let blk = element_b(points);
        let s = layout.element_scalar_dofs(e, tri);
        for k in 0..3 {
            for c in 0..2 {
                for j in 0..4 {
                    t.push(tri[k], layout.velocity_dof(c, s[j]), blk[k][c][j]);
                }
            }
        }
    });
    t.build()
}

/// Convection matrices for a frozen transport and drag field.
#[derive(Clone, Debug)]
pub struct Convection {
    /// Stabilized transport `d_h(T; ·, ·)`.
    pub transport: CsrMatrix,
    /// Forchheimer mass `(β(ε_h)|U| ·, ·)`.
    pub forchheimer: CsrMatrix,
}

impl Convection {
    pub fn total(&self) -> CsrMatrix {
        self.transport.add(&self.forchheimer)
    }
}

/// Assembles the two parts of `c_h` separately. `transport` and `drag` are
/// total velocities (lift included).
pub fn assemble_convection(ctx: &AssemblyContext, transport: &[f64], drag: &[f64]) -> Convection {
    let n = ctx.layout.n_velocity();
    let cap = 32 * ctx.mesh.n_triangles();
    let mut td = TripletBuilder::with_capacity(n, n, cap);
    let mut tm = TripletBuilder::with_capacity(n, n, cap);
    ctx.for_each_element(|e, tri, _, points| {
        let tc = ctx.layout.gather(e, tri, transport);
        let dc = ctx.layout.gather(e, tri, drag);
        let (d, m) = element_convection(points, &tc, &dc, &ctx.coeffs.beta);
        ctx.scatter_scalar(&mut td, e, tri, &d);
        ctx.scatter_scalar(&mut tm, e, tri, &m);
    });
    Convection { transport: td.build(), forchheimer: tm.build() }
}

/// `a_h + c_h` in one pass, the matrix of one Picard step.
pub fn assemble_picard_matrix(ctx: &AssemblyContext, transport: &[f64], drag: &[f64]) -> CsrMatrix {
    let n = ctx.layout.n_velocity();
    let mut t = TripletBuilder::with_capacity(n, n, 32 * ctx.mesh.n_triangles());
    ctx.for_each_element(|e, tri, _, points| {
        let mut k = element_a(points, &ctx.coeffs.alpha, ctx.coeffs.reynolds);
        let tc = ctx.layout.gather(e, tri, transport);
        let dc = ctx.layout.gather(e, tri, drag);
        let (d, m) = element_convection(points, &tc, &dc, &ctx.coeffs.beta);
        for i in 0..4 {
            for j in 0..4 {
                k[i][j] += d[i][j] + m[i][j];
            }
        }
        ctx.scatter_scalar(&mut t, e, tri, &k);
    });
    t.build()
}

/// Load vector `ℓ_h(v) = (ε_h f, v)` over all velocity DOFs.
pub fn assemble_load(ctx: &AssemblyContext, f: &VectorFn) -> Vec<f64> {
    let mut out = vec![0.0; ctx.layout.n_velocity()];
    ctx.for_each_element(|e, tri, geom, points| {
        let blk = element_load(geom, points, f);
        let s = ctx.layout.element_scalar_dofs(e, tri);
        for c in 0..2 {
            for i in 0..4 {
                out[ctx.layout.velocity_dof(c, s[i])] += blk[c][i];
            }
        }
    });
    out
}

/// Right-hand side `ℓ_h(v) − a_h(G_h, v) − c_h(T; G_h, v)` given the
/// assembled load and Picard matrix `K = A + C(T)`.
pub fn picard_rhs(load: &[f64], k: &CsrMatrix, lift: &[f64]) -> Vec<f64> {
    let kg = k.matvec(lift);
    load.iter().zip(kg).map(|(l, g)| l - g).collect()
}

/// Assembles the full Picard right-hand side from scratch.
pub fn assemble_rhs(ctx: &AssemblyContext, f: &VectorFn, transport: &[f64], drag: &[f64], lift: &[f64]) -> Vec<f64> {
    let k = assemble_picard_matrix(ctx, transport, drag);
    picard_rhs(&assemble_load(ctx, f), &k, lift)
}

/// `m_k = ∫ ψ_k`, the row imposing `∫ p_h = 0`.
pub fn pressure_mean_row(mesh: &Mesh) -> Vec<f64> {
    let mut m = vec![0.0; mesh.n_vertices()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let third = mesh.area(t) / 3.0;
        for &v in tri {
            m[v] += third;
        }
    }
    m
}

/// Saddle-point system over the free velocity DOFs, the pressure and the
/// optional gauge multiplier.
#[derive(Clone, Debug)]
pub struct ConstrainedSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    /// Global velocity DOF of each free unknown.
    pub free_dofs: Vec<usize>,
    pub n_velocity: usize,
    pub n_pressure: usize,
    pub has_gauge: bool,
}

impl ConstrainedSystem {
    pub fn size(&self) -> usize {
        self.matrix.nrows()
    }

    /// Splits a solution into the full velocity vector (zero on Dirichlet
    /// DOFs), the pressure and the gauge multiplier.
    pub fn expand(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>, Option<f64>) {
        let nf = self.free_dofs.len();
        let mut w = vec![0.0; self.n_velocity];
        for (k, &d) in self.free_dofs.iter().enumerate() {
            w[d] = x[k];
        }
        let p = x[nf..nf + self.n_pressure].to_vec();
        let lambda = self.has_gauge.then(|| x[nf + self.n_pressure]);
        (w, p, lambda)
    }

    /// Solves the system and returns the solution with its relative residual.
    ///
    /// The gauge row couples every pressure unknown and ruins the sparsity of
    /// the LU factors. Summing the continuity rows shows that its multiplier
    /// vanishes, so the system is solved with the first pressure unknown pinned
    /// instead, and the pressure is then shifted to satisfy the gauge. The
    /// residual is measured on the full system.
    pub fn solve(&self, solver: &mut DirectSolver) -> Result<(Vec<f64>, f64), SolveFailure> {
        if !self.has_gauge || self.n_pressure == 0 {
            return solver.solve(&self.matrix, &self.rhs);
        }
        let nf = self.free_dofs.len();
        let n = self.size();
        let pinned_row = nf;
        let mut t = TripletBuilder::with_capacity(n - 1, n - 1, self.matrix.nnz());
        for r in 0..n - 1 {
            if r == pinned_row {
                t.push(r, r, 1.0);
                continue;
            }
            for (c, v) in self.matrix.row(r) {
                if c < n - 1 {
                    t.push(r, c, v);
                }
            }
        }
        let mut rhs = self.rhs[..n - 1].to_vec();
        rhs[pinned_row] = 0.0;
        let (mut x, _) = solver.solve(&t.build(), &rhs)?;

        let gauge: Vec<(usize, f64)> = self.matrix.row(n - 1).collect();
        let weight: f64 = gauge.iter().map(|&(_, m)| m).sum();
        let mean = gauge.iter().map(|&(c, m)| m * x[c]).sum::<f64>() / weight;
        for p in &mut x[nf..] {
            *p -= mean;
        }
        x.push(0.0);
        let scale = norm2(&self.rhs);
        let r: Vec<f64> = self.rhs.iter().zip(self.matrix.matvec(&x)).map(|(b, ax)| b - ax).collect();
        Ok((x, norm2(&r) / if scale > 0.0 { scale } else { 1.0 }))
    }
}

/// Eliminates the Dirichlet DOFs and appends the pressure coupling and the
/// gauge row. `rhs` is the full-space velocity right-hand side, already
/// corrected by the lift.
pub fn apply_constraints(k: &CsrMatrix, b: &CsrMatrix, rhs: &[f64], layout: &FeLayout, mesh: &Mesh) -> ConstrainedSystem {
    let nv = layout.n_velocity();
    let np = layout.n_pressure();
    let mut index = vec![usize::MAX; nv];
    let mut free_dofs = Vec::with_capacity(nv);
    for d in 0..nv {
        if !layout.is_dirichlet(d) {
            index[d] = free_dofs.len();
            free_dofs.push(d);
        }
    }
    let nf = free_dofs.len();
    let has_gauge = layout.gauge == Gauge::ZeroMean;
    let n = nf + np + usize::from(has_gauge);
    let mut t = TripletBuilder::with_capacity(n, n, k.nnz() + 2 * b.nnz() + 2 * np);
    for (r, &d) in free_dofs.iter().enumerate() {
        for (c, v) in k.row(d) {
            if index[c] != usize::MAX {
                t.push(r, index[c], v);
            }
        }
    }
    for q in 0..np {
        for (c, v) in b.row(q) {
            if index[c] != usize::MAX {
                t.push(index[c], nf + q, -v);
                t.push(nf + q, index[c], -v);
            }
        }
    }
    if has_gauge {
        for (q, m) in pressure_mean_row(mesh).into_iter().enumerate() {
            t.push(nf + q, nf + np, m);
            t.push(nf + np, nf + q, m);
        }
    }
    let mut full_rhs = vec![0.0; n];
    for (r, &d) in free_dofs.iter().enumerate() {
        full_rhs[r] = rhs[d];
    }
    ConstrainedSystem { matrix: t.build(), rhs: full_rhs, free_dofs, n_velocity: nv, n_pressure: np, has_gauge }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::fespace::build_layout;
    use crate::fields::{constant_closure, constant_scalar, constant_vector};
    use crate::mesh::{uniform_mesh, BoundaryEdge, Rect};
    use crate::sparse::DirectSolver;

    fn reference_triangle() -> Mesh {
        let b = vec![
            BoundaryEdge { vertices: [0, 1], label: 1 },
            BoundaryEdge { vertices: [1, 2], label: 2 },
            BoundaryEdge { vertices: [2, 0], label: 4 },
        ];
        Mesh::new(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], vec![[0, 1, 2]], vec![0], b, None).unwrap()
    }

    fn unit_coeffs(mesh: &Mesh) -> CoefficientSet {
        CoefficientSet::new(mesh, constant_scalar(1.0), constant_closure(0.0), constant_closure(0.0), 1.0, 0.5).unwrap()
    }

    #[test]
    fn reference_stiffness_block() {
        let mesh = reference_triangle();
        let coeffs = unit_coeffs(&mesh);
        let layout = build_layout(&mesh, &[], Gauge::None).unwrap();
        let rule = TriangleRule::default();
        let a = assemble_a(&AssemblyContext { mesh: &mesh, coeffs: &coeffs, layout: &layout, rule: &rule });
        let expect = [[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]];
        for c in 0..2 {
            for i in 0..3 {
                for j in 0..3 {
                    let got = a.get(layout.velocity_dof(c, i), layout.velocity_dof(c, j));
                    assert!((got - expect[i][j]).abs() < 1e-14);
                }
                // the bubble is orthogonal to P1 in the energy product
                assert!(a.get(layout.velocity_dof(c, i), layout.velocity_dof(c, 3)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn reference_load_and_divergence() {
        let mesh = reference_triangle();
        let coeffs = unit_coeffs(&mesh);
        let layout = build_layout(&mesh, &[], Gauge::None).unwrap();
        let rule = TriangleRule::default();
        let ctx = AssemblyContext { mesh: &mesh, coeffs: &coeffs, layout: &layout, rule: &rule };
        let load = assemble_load(&ctx, &constant_vector([1.0, 0.0]));
        for i in 0..3 {
            assert!((load[layout.velocity_dof(0, i)] - 0.5 / 3.0).abs() < 1e-15);
            assert_eq!(load[layout.velocity_dof(1, i)], 0.0);
        }
        assert!((load[layout.velocity_dof(0, 3)] - 0.5 / 60.0).abs() < 1e-15);

        // ∫ ∂λ1/∂x over the element is |K| = 1/2
        let b = assemble_b(&ctx);
        let total: f64 = (0..3).map(|q| b.get(q, layout.velocity_dof(0, 1))).sum();
        assert!((total - 0.5).abs() < 1e-15);
    }

    #[test]
    fn constant_field_sees_only_darcy_term() {
        let mesh = uniform_mesh(3, 3, Rect::unit_square()).unwrap();
        let eps = Arc::new(|p: [f64; 2]| 0.5 + 0.2 * p[0] * p[1]);
        let coeffs = CoefficientSet::new(&mesh, eps, Arc::new(|e| (1.0 - e) * (1.0 - e)), constant_closure(1.0), 7.0, 0.4)
            .unwrap();
        let layout = build_layout(&mesh, &[], Gauge::None).unwrap();
        let rule = TriangleRule::default();
        let ctx = AssemblyContext { mesh: &mesh, coeffs: &coeffs, layout: &layout, rule: &rule };
        let a = assemble_a(&ctx);
        let mut v = vec![0.0; layout.n_velocity()];
        for s in 0..layout.n_vertices {
            v[layout.velocity_dof(0, s)] = 1.0;
        }
        let mut expect = 0.0;
        for (t, tri) in mesh.triangles().iter().enumerate() {
            let geom = ElementGeometry::of(&mesh, t);
            for q in element_points(&geom, coeffs.element_eps(tri), &rule) {
                expect += q.weight * (1.0 - q.eps).powi(2);
            }
        }
        assert!((a.bilinear(&v, &v) - expect).abs() < 1e-14);
        // symmetric
        let at = a.transpose();
        for r in 0..a.nrows() {
            for (c, val) in a.row(r) {
                assert!((val - at.get(r, c)).abs() <= 1e-12 * a.max_abs());
            }
        }
    }

    #[test]
    fn zero_transport_gives_zero_convection() {
        let mesh = uniform_mesh(2, 2, Rect::unit_square()).unwrap();
        let coeffs = unit_coeffs(&mesh);
        let layout = build_layout(&mesh, &[1, 2, 3, 4], Gauge::ZeroMean).unwrap();
        let rule = TriangleRule::default();
        let ctx = AssemblyContext { mesh: &mesh, coeffs: &coeffs, layout: &layout, rule: &rule };
        let zero = vec![0.0; layout.n_velocity()];
        let c = assemble_convection(&ctx, &zero, &zero);
        assert_eq!(c.transport.max_abs(), 0.0);
        assert_eq!(c.forchheimer.max_abs(), 0.0);
    }

    #[test]
    fn homogeneous_system_has_zero_solution_and_mean_free_pressure() {
        let mesh = uniform_mesh(4, 4, Rect::unit_square()).unwrap();
        let coeffs = unit_coeffs(&mesh);
        let layout = build_layout(&mesh, &[1, 2, 3, 4], Gauge::ZeroMean).unwrap();
        let rule = TriangleRule::default();
        let ctx = AssemblyContext { mesh: &mesh, coeffs: &coeffs, layout: &layout, rule: &rule };
        let a = assemble_a(&ctx);
        let b = assemble_b(&ctx);
        let zero = vec![0.0; layout.n_velocity()];
        let sys = apply_constraints(&a, &b, &zero, &layout, &mesh);
        assert_eq!(sys.size(), layout.stu() - layout.n_constrained());
        let (x, _) = DirectSolver::new().solve(&sys.matrix, &sys.rhs).unwrap();
        assert!(x.iter().all(|&v| v == 0.0));

        // a forced problem keeps ∫ p_h = 0
        let f: VectorFn = Arc::new(|p: [f64; 2]| [p[1], p[0] * p[0]]);
        let load = assemble_load(&ctx, &f);
        let sys = apply_constraints(&a, &b, &load, &layout, &mesh);
        let (x, res) = DirectSolver::new().solve(&sys.matrix, &sys.rhs).unwrap();
        assert!(res < 1e-12);
        let (_, p, _) = sys.expand(&x);
        let mean: f64 = pressure_mean_row(&mesh).iter().zip(&p).map(|(m, p)| m * p).sum();
        assert!(mean.abs() < 1e-12);
    }
}
