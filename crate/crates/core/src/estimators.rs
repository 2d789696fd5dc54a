//! A posteriori indicators and error metrics.
//!
//! For a Picard step `i → i+1` with `u = w^{i+1} + G_h`:
//!
//! * `η^L_κ = ‖w^{i+1} − w^i‖_{H1(κ)}` (full norm);
//! * `η^D_κ = h_κ ‖R‖_{L²(κ)} + ½ Σ_e h_e^{1/2} ‖[(ε_h/Re) ∇u·n − p n]‖_{L²(e)}
//!   + ‖div(ε_h u)‖_{L²(κ)}`, the edge sum running over interior edges.
//!
//! The element residual is
//! `R = ε_h f_h + (1/Re) div(ε_h ∇u) − α_h u − ε_h (T·∇)u − ½ div(ε_h T) u
//! − β_h |U| u − ε_h ∇p` with cell means `f_h`, `α_h`, `β_h`, the transport
//! `T` of the step and the Forchheimer weight `|U|` chosen by [`BetaSlot`].

use crate::assembly::{element_points, velocity_at, velocity_gradient, QuadPoint};
use crate::cases::ExactSolution;
use crate::error::{Error, Result};
use crate::fespace::{eval_basis, ElementGeometry, FeLayout, Gauge};
use crate::mesh::{mesh_metrics, EdgeNeighbors, Mesh};
use crate::quadrature::TriangleRule;
use crate::solver::{DiscreteState, Problem};

/// Polynomial exactness of the rule used for error norms.
pub const ERROR_RULE_DEGREE: usize = 16;

/// Forchheimer weight in the element residual.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum BetaSlot {
    /// `|G_h + w^i|`, the weight the linearized equation actually uses.
    #[default]
    Combined,
    /// `|G_h| + |w^i|`.
    Split,
}

/// The three parts of `η^D_κ`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DiscretizationParts {
    pub residual: Vec<f64>,
    pub jump: Vec<f64>,
    pub divergence: Vec<f64>,
}

/// Per-element indicators of one Picard step.
#[derive(Clone, Debug, PartialEq)]
pub struct IndicatorField {
    pub eta_l: Vec<f64>,
    pub parts: DiscretizationParts,
    pub eta_d: Vec<f64>,
}

fn root_sum_squares(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

impl IndicatorField {
    pub fn new(eta_l: Vec<f64>, parts: DiscretizationParts) -> Self {
        let eta_d = parts
            .residual
            .iter()
            .zip(&parts.jump)
            .zip(&parts.divergence)
            .map(|((r, j), d)| r + j + d)
            .collect();
        IndicatorField { eta_l, parts, eta_d }
    }

    pub fn eta_l_total(&self) -> f64 {
        root_sum_squares(&self.eta_l)
    }

    pub fn eta_d_total(&self) -> f64 {
        root_sum_squares(&self.eta_d)
    }
}

fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::Shape { expected, actual })
    }
}

/// `‖w_new − w_old‖_{H1(κ)}` on every element.
pub fn compute_eta_l(mesh: &Mesh, layout: &FeLayout, w_old: &[f64], w_new: &[f64], rule: &TriangleRule) -> Result<Vec<f64>> {
    check_len(layout.n_velocity(), w_old.len())?;
    check_len(layout.n_velocity(), w_new.len())?;
    let diff: Vec<f64> = w_new.iter().zip(w_old).map(|(a, b)| a - b).collect();
    let mut out = Vec::with_capacity(mesh.n_triangles());
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let geom = ElementGeometry::of(mesh, t);
        let c = layout.gather(t, tri, &diff);
        let mut sum = 0.0;
        for (lam, w) in rule.points.iter().zip(&rule.weights) {
            let b = eval_basis(&geom, *lam);
            let v = velocity_at(&c, &b);
            let g = velocity_gradient(&c, &b);
            let sq = v[0] * v[0] + v[1] * v[1] + g[0][0] * g[0][0] + g[0][1] * g[0][1] + g[1][0] * g[1][0] + g[1][1] * g[1][1];
            sum += w * geom.area * sq;
        }
        out.push(sum.sqrt());
    }
    Ok(out)
}

/// Pressure value at a quadrature point.
#[inline]
fn p1_value(nodal: [f64; 3], lambda: [f64; 3]) -> f64 {
    nodal[0] * lambda[0] + nodal[1] * lambda[1] + nodal[2] * lambda[2]
}

#[inline]
fn norm(v: [f64; 2]) -> f64 {
    (v[0] * v[0] + v[1] * v[1]).sqrt()
}

/// Components of `η^D` for the step from `w_prev = w^i` to `next`, which was
/// computed with the full transport field `transport`.
pub fn compute_eta_d(problem: &Problem, w_prev: &[f64], next: &DiscreteState, transport: &[f64]) -> Result<DiscretizationParts> {
    let layout = &problem.layout;
    let mesh = &problem.mesh;
    let nv = layout.n_velocity();
    check_len(nv, w_prev.len())?;
    check_len(nv, next.w.len())?;
    check_len(nv, transport.len())?;
    check_len(layout.n_pressure(), next.p.len())?;
    let re = problem.coeffs.reynolds;
    let avg = &problem.averages;
    let u = problem.total_velocity(&next.w);
    let metrics = mesh_metrics(mesh);
    let nt = mesh.n_triangles();
    let mut parts = DiscretizationParts {
        residual: Vec::with_capacity(nt),
        jump: vec![0.0; nt],
        divergence: Vec::with_capacity(nt),
    };

    for (t, tri) in mesh.triangles().iter().enumerate() {
        let geom = ElementGeometry::of(mesh, t);
        let eps_nodal = problem.coeffs.element_eps(tri);
        let cu = layout.gather(t, tri, &u);
        let ct = layout.gather(t, tri, transport);
        let cw = layout.gather(t, tri, w_prev);
        let cg = layout.gather(t, tri, &problem.lift);
        let pn = [next.p[tri[0]], next.p[tri[1]], next.p[tri[2]]];
        let grad_p = geom.p1_gradient(pn);
        let (mut res_sq, mut div_sq) = (0.0, 0.0);
        for q in element_points(&geom, eps_nodal, &problem.rule) {
            let QuadPoint { weight, basis: b, eps, grad_eps } = q;
            let uv = velocity_at(&cu, &b);
            let gu = velocity_gradient(&cu, &b);
            let tv = velocity_at(&ct, &b);
            let gt = velocity_gradient(&ct, &b);
            let div_eps_t = grad_eps[0] * tv[0] + grad_eps[1] * tv[1] + eps * (gt[0][0] + gt[1][1]);
            let drag = match problem.beta_slot {
                BetaSlot::Combined => {
                    let g = velocity_at(&cg, &b);
                    let w = velocity_at(&cw, &b);
                    norm([g[0] + w[0], g[1] + w[1]])
                }
                BetaSlot::Split => norm(velocity_at(&cg, &b)) + norm(velocity_at(&cw, &b)),
            };
            let mut r = [0.0; 2];
            for c in 0..2 {
                let lap_bubble = cu[c][3] * b.bubble_laplacian;
                let viscous = (grad_eps[0] * gu[c][0] + grad_eps[1] * gu[c][1] + eps * lap_bubble) / re;
                let advect = eps * (tv[0] * gu[c][0] + tv[1] * gu[c][1]) + 0.5 * div_eps_t * uv[c];
                r[c] = eps * avg.f_h[t][c] + viscous
                    - avg.alpha_h[t] * uv[c]
                    - advect
                    - avg.beta_h[t] * drag * uv[c]
                    - eps * grad_p[c];
            }
            res_sq += weight * (r[0] * r[0] + r[1] * r[1]);
            let div = grad_eps[0] * uv[0] + grad_eps[1] * uv[1] + eps * (gu[0][0] + gu[1][1]);
            div_sq += weight * div * div;
        }
        parts.residual.push(metrics.h[t] * res_sq.sqrt());
        parts.divergence.push(div_sq.sqrt());
    }

    for (e, edge) in mesh.edges().iter().enumerate() {
        let EdgeNeighbors::Interior(k1, k2) = edge.neighbors else { continue };
        let norm_jump = edge_jump_norm(problem, &u, &next.p, edge.vertices, k1, k2);
        let share = 0.5 * metrics.edge_length[e].sqrt() * norm_jump;
        parts.jump[k1] += share;
        parts.jump[k2] += share;
    }
    Ok(parts)
}

/// Barycentric coordinates in triangle `t` of the point `(1−s) a + s b` on
/// its edge `(a, b)`.
fn edge_lambda(tri: &[usize; 3], a: usize, b: usize, s: f64) -> [f64; 3] {
    let mut lam = [0.0; 3];
    for k in 0..3 {
        if tri[k] == a {
            lam[k] = 1.0 - s;
        } else if tri[k] == b {
            lam[k] = s;
        }
    }
    lam
}

/// Flux `(ε_h/Re) ∇u·n − p n` seen from triangle `t`.
fn edge_flux(problem: &Problem, u: &[f64], p: &[f64], t: usize, lambda: [f64; 3], n: [f64; 2]) -> [f64; 2] {
    let tri = &problem.mesh.triangles()[t];
    let geom = ElementGeometry::of(&problem.mesh, t);
    let b = eval_basis(&geom, lambda);
    let g = velocity_gradient(&problem.layout.gather(t, tri, u), &b);
    let eps = p1_value(problem.coeffs.element_eps(tri), lambda);
    let pv = p1_value([p[tri[0]], p[tri[1]], p[tri[2]]], lambda);
    let scale = eps / problem.coeffs.reynolds;
    [
        scale * (g[0][0] * n[0] + g[0][1] * n[1]) - pv * n[0],
        scale * (g[1][0] * n[0] + g[1][1] * n[1]) - pv * n[1],
    ]
}

/// `‖[(ε_h/Re) ∇u·n − p n]‖_{L²(e)}` on the interior edge `(a, b)`.
pub fn edge_jump_norm(problem: &Problem, u: &[f64], p: &[f64], vertices: [usize; 2], k1: usize, k2: usize) -> f64 {
    let [a, b] = vertices;
    let (pa, pb) = (problem.mesh.vertices()[a], problem.mesh.vertices()[b]);
    let d = [pb[0] - pa[0], pb[1] - pa[1]];
    let len = norm(d);
    let n = [d[1] / len, -d[0] / len];
    let tris = problem.mesh.triangles();
    let rule = &problem.edge_rule;
    let mut sq = 0.0;
    for (&s, &w) in rule.points.iter().zip(&rule.weights) {
        let f1 = edge_flux(problem, u, p, k1, edge_lambda(&tris[k1], a, b, s), n);
        let f2 = edge_flux(problem, u, p, k2, edge_lambda(&tris[k2], a, b, s), n);
        let j = [f1[0] - f2[0], f1[1] - f2[1]];
        sq += w * len * (j[0] * j[0] + j[1] * j[1]);
    }
    sq.sqrt()
}

/// Data-oscillation diagnostic per element:
/// `h_κ ‖ε_h (f − f_h)‖ + ‖ε − ε_h‖ + ‖(α(ε) − α_h) u‖ + ‖(β(ε) − β_h)|u| u‖`.
/// Reported separately, never added to `η^D`.
pub fn data_oscillation(problem: &Problem, u: &[f64]) -> Vec<f64> {
    let mesh = &problem.mesh;
    let coeffs = &problem.coeffs;
    let avg = &problem.averages;
    let metrics = mesh_metrics(mesh);
    let mut out = Vec::with_capacity(mesh.n_triangles());
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let geom = ElementGeometry::of(mesh, t);
        let cu = problem.layout.gather(t, tri, u);
        let mut acc = [0.0; 4];
        for q in element_points(&geom, coeffs.element_eps(tri), &problem.rule) {
            let x = geom.point(q.basis.lambda);
            let f = (problem.forcing)(x);
            let e = (coeffs.epsilon)(x);
            let uv = velocity_at(&cu, &q.basis);
            let speed = norm(uv);
            let df = [f[0] - avg.f_h[t][0], f[1] - avg.f_h[t][1]];
            let da = (coeffs.alpha)(e) - avg.alpha_h[t];
            let db = (coeffs.beta)(e) - avg.beta_h[t];
            acc[0] += q.weight * q.eps * q.eps * (df[0] * df[0] + df[1] * df[1]);
            acc[1] += q.weight * (e - q.eps) * (e - q.eps);
            acc[2] += q.weight * da * da * speed * speed;
            acc[3] += q.weight * db * db * speed.powi(4);
        }
        out.push(metrics.h[t] * acc[0].sqrt() + acc[1].sqrt() + acc[2].sqrt() + acc[3].sqrt());
    }
    out
}

/// `|u|_{H1}` of a discrete velocity.
pub fn velocity_h1_seminorm(problem: &Problem, u: &[f64]) -> f64 {
    let mut sum = 0.0;
    for (t, tri) in problem.mesh.triangles().iter().enumerate() {
        let geom = ElementGeometry::of(&problem.mesh, t);
        let c = problem.layout.gather(t, tri, u);
        // constant P1 gradient plus a quadratic bubble gradient: degree 4
        for (lam, w) in problem.rule.points.iter().zip(&problem.rule.weights) {
            let g = velocity_gradient(&c, &eval_basis(&geom, *lam));
            sum += w * geom.area * (g[0][0] * g[0][0] + g[0][1] * g[0][1] + g[1][0] * g[1][0] + g[1][1] * g[1][1]);
        }
    }
    sum.sqrt()
}

/// `‖p_h‖_{L²}`, with the mean removed when the problem is gauged.
pub fn pressure_l2(problem: &Problem, p: &[f64]) -> f64 {
    let mesh = &problem.mesh;
    let mean = if problem.layout.gauge == Gauge::ZeroMean {
        let m: f64 = mesh
            .triangles()
            .iter()
            .enumerate()
            .map(|(t, tri)| mesh.area(t) * (p[tri[0]] + p[tri[1]] + p[tri[2]]) / 3.0)
            .sum();
        m / mesh.total_area()
    } else {
        0.0
    };
    let mut sum = 0.0;
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let d = [p[tri[0]] - mean, p[tri[1]] - mean, p[tri[2]] - mean];
        // exact for P1: |K|/6 (Σ d_i² + Σ_{i<j} d_i d_j)
        let s = d[0] * d[0] + d[1] * d[1] + d[2] * d[2] + d[0] * d[1] + d[0] * d[2] + d[1] * d[2];
        sum += mesh.area(t) * s / 6.0;
    }
    sum.sqrt()
}

/// Norms of the exact solution and of the discretization error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorNorms {
    /// `|u − u_h|_{H1}`.
    pub velocity_error: f64,
    /// `‖p − p_h‖_{L²}` (means removed when gauged).
    pub pressure_error: f64,
    pub velocity_norm: f64,
    pub pressure_norm: f64,
}

impl ErrorNorms {
    pub fn absolute(&self) -> f64 {
        self.velocity_error + self.pressure_error
    }

    pub fn reference(&self) -> f64 {
        self.velocity_norm + self.pressure_norm
    }

    pub fn relative(&self) -> f64 {
        self.absolute() / self.reference()
    }
}

/// Errors of `(u_h, p_h)` against `exact`, by a high-order rule.
pub fn exact_errors(problem: &Problem, exact: &ExactSolution, u: &[f64], p: &[f64]) -> Result<ErrorNorms> {
    check_len(problem.layout.n_velocity(), u.len())?;
    check_len(problem.layout.n_pressure(), p.len())?;
    let mesh = &problem.mesh;
    let rule = TriangleRule::with_degree(ERROR_RULE_DEGREE.max(problem.rule.degree));
    let gauged = problem.layout.gauge == Gauge::ZeroMean;
    // pass 1: means; pass 2: norms
    let (mut mean_p, mut mean_ph) = (0.0, 0.0);
    if gauged {
        for (t, tri) in mesh.triangles().iter().enumerate() {
            let geom = ElementGeometry::of(mesh, t);
            for (lam, w) in rule.points.iter().zip(&rule.weights) {
                mean_p += w * geom.area * (exact.pressure)(geom.point(*lam));
                mean_ph += w * geom.area * p1_value([p[tri[0]], p[tri[1]], p[tri[2]]], *lam);
            }
        }
        mean_p /= mesh.total_area();
        mean_ph /= mesh.total_area();
    }
    let mut acc = [0.0; 4];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let geom = ElementGeometry::of(mesh, t);
        let c = problem.layout.gather(t, tri, u);
        let pn = [p[tri[0]], p[tri[1]], p[tri[2]]];
        for (lam, w) in rule.points.iter().zip(&rule.weights) {
            let x = geom.point(*lam);
            let wk = w * geom.area;
            let gh = velocity_gradient(&c, &eval_basis(&geom, *lam));
            let ge = (exact.velocity_gradient)(x);
            let pe = (exact.pressure)(x) - mean_p;
            let ph = p1_value(pn, *lam) - mean_ph;
            for r in 0..2 {
                for s in 0..2 {
                    acc[0] += wk * (ge[r][s] - gh[r][s]).powi(2);
                    acc[2] += wk * ge[r][s] * ge[r][s];
                }
            }
            acc[1] += wk * (pe - ph).powi(2);
            acc[3] += wk * pe * pe;
        }
    }
    Ok(ErrorNorms {
        velocity_error: acc[0].sqrt(),
        pressure_error: acc[1].sqrt(),
        velocity_norm: acc[2].sqrt(),
        pressure_norm: acc[3].sqrt(),
    })
}

/// Relative indicator and, with an exact solution, the relative error and
/// efficiency index.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunMetrics {
    pub e_total: f64,
    errors: Option<ErrorNorms>,
    eta_d: f64,
}

impl RunMetrics {
    /// Relative total error `(|u − u_h|_1 + ‖p − p_h‖) / (|u|_1 + ‖p‖)`.
    pub fn err(&self) -> Result<f64> {
        self.errors.map(|e| e.relative()).ok_or(Error::UnsupportedMetric("err"))
    }

    /// Efficiency index `η^D / (|u − u_h|_1 + ‖p − p_h‖)`.
    pub fn ei(&self) -> Result<f64> {
        self.errors.map(|e| self.eta_d / e.absolute()).ok_or(Error::UnsupportedMetric("ei"))
    }

    pub fn errors(&self) -> Option<ErrorNorms> {
        self.errors
    }
}

/// `E_total = η^D / (|u|_1 + ‖p‖)`. Without an exact solution the norms of
/// the discrete solution stand in for the exact ones.
pub fn compute_metrics(problem: &Problem, state: &DiscreteState, exact: Option<&ExactSolution>, eta_d: f64) -> Result<RunMetrics> {
    let u = problem.total_velocity(&state.w);
    match exact {
        Some(ex) => {
            let errors = exact_errors(problem, ex, &u, &state.p)?;
            Ok(RunMetrics { e_total: eta_d / errors.reference(), errors: Some(errors), eta_d })
        }
        None => {
            let reference = velocity_h1_seminorm(problem, &u) + pressure_l2(problem, &state.p);
            Ok(RunMetrics { e_total: eta_d / reference, errors: None, eta_d })
        }
    }
}
