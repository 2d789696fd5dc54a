//! Benchmark problem definitions.
//!
//! * [`manufactured_case`]: Gaussian vortex on the unit square with a known
//!   exact solution and an enclosed (all-Dirichlet) boundary.
//! * [`packed_bed_case`]: channel flow through a packed bed on `]0,2[×]0,1[`
//!   with a parabolic inlet, no-slip walls and a do-nothing outlet.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use crate::coeffs::CoefficientSet;
use crate::error::{Error, Result};
use crate::fespace::{build_layout, dirichlet_lift, Gauge, LiftData};
use crate::fields::{Closure1, ScalarFn, TensorFn, VectorFn};
use crate::mesh::{side, uniform_mesh, BoundaryLabel, Mesh, Rect};
use crate::quadrature::TriangleRule;
use crate::solver::Problem;

/// Condition imposed on one labelled boundary part.
#[derive(Clone)]
pub enum BoundaryCondition {
    Dirichlet(VectorFn),
    /// Natural outflow condition; nothing is imposed.
    DoNothing,
}

/// Analytic solution with the velocity gradient `g[c][d] = ∂u_c/∂x_d`.
#[derive(Clone)]
pub struct ExactSolution {
    pub velocity: VectorFn,
    pub velocity_gradient: TensorFn,
    pub pressure: ScalarFn,
}

#[derive(Clone)]
pub struct ProblemSpec {
    pub name: &'static str,
    pub domain: Rect,
    /// Grid cells per unit of the parameter `n` along x and y.
    pub cells_per_n: [usize; 2],
    pub epsilon: ScalarFn,
    pub alpha: Closure1,
    pub beta: Closure1,
    pub eps0: f64,
    pub reynolds: f64,
    pub forcing: VectorFn,
    pub boundary: BTreeMap<BoundaryLabel, BoundaryCondition>,
    /// Analytic lift defined on the whole domain, when one is available.
    pub global_lift: Option<VectorFn>,
    pub gauge: Gauge,
    pub exact: Option<ExactSolution>,
}

impl ProblemSpec {
    /// Uniform initial grid with parameter `n`.
    pub fn initial_mesh(&self, n: usize) -> Result<Mesh> {
        if n == 0 {
            return Err(Error::InvalidInput("initial grid parameter must be positive".into()));
        }
        uniform_mesh(self.cells_per_n[0] * n, self.cells_per_n[1] * n, self.domain)
    }

    pub fn dirichlet_labels(&self) -> Vec<BoundaryLabel> {
        self.boundary
            .iter()
            .filter(|(_, c)| matches!(c, BoundaryCondition::Dirichlet(_)))
            .map(|(&l, _)| l)
            .collect()
    }

    pub fn lift_data(&self) -> LiftData {
        match &self.global_lift {
            Some(g) => LiftData::Global(g.clone()),
            None => LiftData::Boundary(
                self.boundary
                    .iter()
                    .filter_map(|(&l, c)| match c {
                        BoundaryCondition::Dirichlet(g) => Some((l, g.clone())),
                        BoundaryCondition::DoNothing => None,
                    })
                    .collect(),
            ),
        }
    }

    /// Sets up the discrete problem on `mesh`.
    pub fn discretize(&self, mesh: Mesh, rule: TriangleRule) -> Result<Problem> {
        let labels = mesh.boundary_labels();
        for l in &labels {
            if !self.boundary.contains_key(l) {
                return Err(Error::Config(format!("boundary label {l} has no condition")));
            }
        }
        let layout = build_layout(&mesh, &self.dirichlet_labels(), self.gauge)?;
        let coeffs = CoefficientSet::new(
            &mesh,
            self.epsilon.clone(),
            self.alpha.clone(),
            self.beta.clone(),
            self.reynolds,
            self.eps0,
        )?;
        let lift = dirichlet_lift(&self.lift_data(), &layout, &mesh);
        Ok(Problem::new(mesh, coeffs, layout, lift, self.forcing.clone(), rule))
    }
}

const VORTEX_DECAY: f64 = 30.0;

/// Stream function `ψ = exp(−30 r²)` around the center of the unit square
/// with its derivatives up to third order.
struct StreamFunction {
    d1: [f64; 2],
    /// `[ψ_xx, ψ_xy, ψ_yy]`
    d2: [f64; 3],
    /// `[ψ_xxx, ψ_xxy, ψ_xyy, ψ_yyy]`
    d3: [f64; 4],
}

fn stream_function(p: [f64; 2]) -> StreamFunction {
    let a = VORTEX_DECAY;
    let (dx, dy) = (p[0] - 0.5, p[1] - 0.5);
    let psi = (-a * (dx * dx + dy * dy)).exp();
    let qx = 4.0 * a * a * dx * dx - 2.0 * a;
    let qy = 4.0 * a * a * dy * dy - 2.0 * a;
    StreamFunction {
        d1: [-2.0 * a * dx * psi, -2.0 * a * dy * psi],
        d2: [qx * psi, 4.0 * a * a * dx * dy * psi, qy * psi],
        d3: [
            (12.0 * a * a * dx - 8.0 * a * a * a * dx * dx * dx) * psi,
            qx * (-2.0 * a * dy) * psi,
            qy * (-2.0 * a * dx) * psi,
            (12.0 * a * a * dy - 8.0 * a * a * a * dy * dy * dy) * psi,
        ],
    }
}

fn vortex_porosity(p: [f64; 2]) -> f64 {
    (1.0 + (p[0] + p[1]).exp()) / 10.0
}

/// Exact fields of the manufactured case at one point.
#[derive(Clone, Copy, Debug)]
pub struct VortexFields {
    pub velocity: [f64; 2],
    pub gradient: [[f64; 2]; 2],
    /// Componentwise Laplacian of the velocity.
    pub laplacian: [f64; 2],
    pub pressure: f64,
    pub pressure_gradient: [f64; 2],
    pub epsilon: f64,
    pub epsilon_gradient: [f64; 2],
}

/// Closed-form evaluation of `u = curl ψ / ε`, `p = cos πx cos πy` and their
/// derivatives.
pub fn vortex_fields(p: [f64; 2]) -> VortexFields {
    let s = stream_function(p);
    let e = vortex_porosity(p);
    let de = (p[0] + p[1]).exp() / 10.0;
    let ge = [de, de];
    // m = 1/ε and its derivatives; all second derivatives of ε equal `de`.
    let m = 1.0 / e;
    let gm = [-ge[0] / (e * e), -ge[1] / (e * e)];
    let lap_m = -2.0 * de / (e * e) + 2.0 * (ge[0] * ge[0] + ge[1] * ge[1]) / (e * e * e);
    // curl ψ = (ψ_y, −ψ_x)
    let [pxx, pxy, pyy] = s.d2;
    let [pxxx, pxxy, pxyy, pyyy] = s.d3;
    let c = [s.d1[1], -s.d1[0]];
    let gc = [[pxy, pyy], [-pxx, -pxy]];
    let lap_c = [pxxy + pyyy, -(pxxx + pxyy)];
    let mut gradient = [[0.0; 2]; 2];
    let mut laplacian = [0.0; 2];
    for k in 0..2 {
        for d in 0..2 {
            gradient[k][d] = gm[d] * c[k] + m * gc[k][d];
        }
        laplacian[k] = lap_m * c[k] + 2.0 * (gm[0] * gc[k][0] + gm[1] * gc[k][1]) + m * lap_c[k];
    }
    let (cx, sx) = ((PI * p[0]).cos(), (PI * p[0]).sin());
    let (cy, sy) = ((PI * p[1]).cos(), (PI * p[1]).sin());
    VortexFields {
        velocity: [m * c[0], m * c[1]],
        gradient,
        laplacian,
        pressure: cx * cy,
        pressure_gradient: [-PI * sx * cy, -PI * cx * sy],
        epsilon: e,
        epsilon_gradient: ge,
    }
}

fn vortex_alpha(e: f64) -> f64 {
    (1.0 - e) * (1.0 - e)
}

fn vortex_beta(e: f64) -> f64 {
    1.0 + e
}

/// Forcing that makes the vortex an exact solution at Reynolds number `re`.
pub fn vortex_forcing(p: [f64; 2], re: f64) -> [f64; 2] {
    let v = vortex_fields(p);
    let u = v.velocity;
    let speed = (u[0] * u[0] + u[1] * u[1]).sqrt();
    let (a, b) = (vortex_alpha(v.epsilon), vortex_beta(v.epsilon));
    let mut f = [0.0; 2];
    for c in 0..2 {
        let g = v.gradient[c];
        let viscous = (v.epsilon_gradient[0] * g[0] + v.epsilon_gradient[1] * g[1] + v.epsilon * v.laplacian[c]) / re;
        // div(ε u) = 0, so div(ε u ⊗ u) reduces to ε (u·∇) u
        let transport = v.epsilon * (u[0] * g[0] + u[1] * g[1]);
        let rhs = -viscous + transport + a * u[c] + b * speed * u[c] + v.epsilon * v.pressure_gradient[c];
        f[c] = rhs / v.epsilon;
    }
    f
}

/// Gaussian-vortex problem on the unit square with homogeneous Dirichlet
/// data and a zero-mean pressure.
pub fn manufactured_case(reynolds: f64) -> ProblemSpec {
    let zero: VectorFn = Arc::new(|_| [0.0, 0.0]);
    let boundary = [side::BOTTOM, side::RIGHT, side::TOP, side::LEFT]
        .into_iter()
        .map(|l| (l, BoundaryCondition::Dirichlet(zero.clone())))
        .collect();
    ProblemSpec {
        name: "manufactured",
        domain: Rect::unit_square(),
        cells_per_n: [1, 1],
        epsilon: Arc::new(vortex_porosity),
        alpha: Arc::new(vortex_alpha),
        beta: Arc::new(vortex_beta),
        eps0: 0.2,
        reynolds,
        forcing: Arc::new(move |p| vortex_forcing(p, reynolds)),
        boundary,
        global_lift: None,
        gauge: Gauge::ZeroMean,
        exact: Some(ExactSolution {
            velocity: Arc::new(|p| vortex_fields(p).velocity),
            velocity_gradient: Arc::new(|p| vortex_fields(p).gradient),
            pressure: Arc::new(|p| vortex_fields(p).pressure),
        }),
    }
}

const BED_EPS_REF: f64 = 0.45;

/// Porosity of the packed bed, rising from the bottom wall to 1 at the top.
pub fn bed_porosity(y: f64) -> f64 {
    BED_EPS_REF * (1.0 + (1.0 - BED_EPS_REF) / BED_EPS_REF * (-(1.0 - y)).exp())
}

/// Ergun-type Darcy coefficient.
pub fn bed_alpha(e: f64, reynolds: f64) -> f64 {
    let r = (1.0 - e) / e;
    150.0 / reynolds * r * r
}

/// Ergun-type Forchheimer coefficient.
pub fn bed_beta(e: f64) -> f64 {
    1.75 * (1.0 - e) / e
}

/// Packed-bed channel: inlet on the left, do-nothing outlet on the right,
/// no-slip walls. The inlet profile extended constantly in x serves as lift.
pub fn packed_bed_case(reynolds: f64, c_in: f64) -> ProblemSpec {
    let inflow: VectorFn = Arc::new(move |p| [c_in * (1.0 - p[1]) * p[1], 0.0]);
    let wall: VectorFn = Arc::new(|_| [0.0, 0.0]);
    let boundary = BTreeMap::from([
        (side::BOTTOM, BoundaryCondition::Dirichlet(wall.clone())),
        (side::RIGHT, BoundaryCondition::DoNothing),
        (side::TOP, BoundaryCondition::Dirichlet(wall)),
        (side::LEFT, BoundaryCondition::Dirichlet(inflow.clone())),
    ]);
    ProblemSpec {
        name: "packed_bed",
        domain: Rect::new(0.0, 0.0, 2.0, 1.0),
        cells_per_n: [2, 1],
        epsilon: Arc::new(|p| bed_porosity(p[1])),
        alpha: Arc::new(move |e| bed_alpha(e, reynolds)),
        beta: Arc::new(bed_beta),
        eps0: bed_porosity(0.0),
        reynolds,
        forcing: Arc::new(|_| [0.0, 0.0]),
        boundary,
        global_lift: Some(inflow),
        gauge: Gauge::None,
        exact: None,
    }
}

/// Case lookup by name.
pub fn case_by_name(name: &str, reynolds: f64, c_in: f64) -> Result<ProblemSpec> {
    match name {
        "manufactured" => Ok(manufactured_case(reynolds)),
        "packed_bed" => Ok(packed_bed_case(reynolds, c_in)),
        other => Err(Error::Config(format!("unknown case `{other}`"))),
    }
}
