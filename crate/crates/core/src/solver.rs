//! Picard iterations on a fixed mesh.
//!
//! Both schemes solve for the homogeneous part `w` of the velocity; the full
//! velocity is `u = w + G_h`. The plain scheme freezes the transport and the
//! Forchheimer weight at `w^i + G_h`. The relaxed scheme transports with the
//! running average `ũ^i = (ū^i + ũ^{i−1})/2` and keeps `|ū^i|` in the
//! Forchheimer weight.

use crate::assembly::{
    apply_constraints, assemble_a, assemble_b, assemble_load, assemble_picard_matrix, picard_rhs, AssemblyContext,
};
use crate::coeffs::{cellwise_averages, CellAverages, CoefficientSet};
use crate::error::{Error, Result};
use crate::estimators::{compute_eta_d, compute_eta_l, BetaSlot, IndicatorField};
use crate::fespace::FeLayout;
use crate::fields::VectorFn;
use crate::mesh::Mesh;
use crate::quadrature::{EdgeRule, TriangleRule};
use crate::sparse::{CsrMatrix, DirectSolver};

/// Largest accepted relative residual of a linear solve.
pub const LINEAR_TOLERANCE: f64 = 1e-10;
/// Growth of `η^L` over its first value that counts as divergence.
pub const DIVERGENCE_FACTOR: f64 = 1e6;

/// A discretized problem on one mesh. The parts of the Picard system that do
/// not depend on the iterate are assembled once.
pub struct Problem {
    pub mesh: Mesh,
    pub coeffs: CoefficientSet,
    pub layout: FeLayout,
    pub averages: CellAverages,
    /// Velocity coefficients of the discrete lift `G_h`.
    pub lift: Vec<f64>,
    pub forcing: VectorFn,
    pub rule: TriangleRule,
    pub edge_rule: EdgeRule,
    pub beta_slot: BetaSlot,
    a: CsrMatrix,
    b: CsrMatrix,
    load: Vec<f64>,
}

impl Problem {
    pub fn new(
        mesh: Mesh,
        coeffs: CoefficientSet,
        layout: FeLayout,
        lift: Vec<f64>,
        forcing: VectorFn,
        rule: TriangleRule,
    ) -> Self {
        let averages = cellwise_averages(&mesh, &coeffs, &forcing, &rule);
        let ctx = AssemblyContext { mesh: &mesh, coeffs: &coeffs, layout: &layout, rule: &rule };
        let a = assemble_a(&ctx);
        let b = assemble_b(&ctx);
        let load = assemble_load(&ctx, &forcing);
        Problem {
            mesh,
            coeffs,
            layout,
            averages,
            lift,
            forcing,
            rule,
            edge_rule: EdgeRule::default(),
            beta_slot: BetaSlot::default(),
            a,
            b,
            load,
        }
    }

    pub fn context(&self) -> AssemblyContext<'_> {
        AssemblyContext { mesh: &self.mesh, coeffs: &self.coeffs, layout: &self.layout, rule: &self.rule }
    }

    /// Matrix of `a_h` over the full velocity space.
    pub fn a_matrix(&self) -> &CsrMatrix {
        &self.a
    }

    /// Matrix of `b_h`, rows indexed by pressure DOFs.
    pub fn b_matrix(&self) -> &CsrMatrix {
        &self.b
    }

    pub fn load(&self) -> &[f64] {
        &self.load
    }

    /// `w + G_h`.
    pub fn total_velocity(&self, w: &[f64]) -> Vec<f64> {
        w.iter().zip(&self.lift).map(|(a, b)| a + b).collect()
    }

    pub fn initial_state(&self, scheme: Scheme) -> DiscreteState {
        let w = vec![0.0; self.layout.n_velocity()];
        let u_tilde = (scheme == Scheme::Relaxed).then(|| self.total_velocity(&w));
        DiscreteState { w, p: vec![0.0; self.layout.n_pressure()], iterate: 0, u_tilde }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    Plain,
    Relaxed,
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plain" => Ok(Scheme::Plain),
            "relaxed" => Ok(Scheme::Relaxed),
            other => Err(Error::Config(format!("unknown scheme `{other}`"))),
        }
    }
}

/// One Picard iterate.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteState {
    /// Homogeneous velocity part, zero on Dirichlet DOFs.
    pub w: Vec<f64>,
    pub p: Vec<f64>,
    pub iterate: usize,
    /// Relaxed transport iterate `ũ^{i−1}` (full velocity), relaxed scheme only.
    pub u_tilde: Option<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StopMode {
    /// `η^L ≤ tol_abs`.
    Absolute,
    /// `η^L ≤ γ̃ η^D`.
    Balance,
}

impl std::str::FromStr for StopMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "abs" => Ok(StopMode::Absolute),
            "balance" => Ok(StopMode::Balance),
            other => Err(Error::Config(format!("unknown stop mode `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StopCriteria {
    pub mode: StopMode,
    pub tol_abs: f64,
    pub gamma_tilde: f64,
    pub max_iter: usize,
}

impl Default for StopCriteria {
    fn default() -> Self {
        StopCriteria { mode: StopMode::Balance, tol_abs: 1e-6, gamma_tilde: 0.01, max_iter: 200 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TerminationReason {
    AbsTol,
    Balance,
    MaxIter,
    Diverged,
}

impl TerminationReason {
    pub fn as_str(self) -> &'static str {
        match self {
            TerminationReason::AbsTol => "abs-tol",
            TerminationReason::Balance => "balance-criterion",
            TerminationReason::MaxIter => "max-iter",
            TerminationReason::Diverged => "diverged",
        }
    }

    pub fn converged(self) -> bool {
        matches!(self, TerminationReason::AbsTol | TerminationReason::Balance)
    }
}

impl std::fmt::Display for TerminationReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterationRecord {
    /// Index `i` of the step producing iterate `i + 1`.
    pub i: usize,
    pub eta_l: f64,
    pub eta_d: f64,
    pub linear_residual: f64,
}

#[derive(Clone, Debug)]
pub struct SolveHistory {
    pub records: Vec<IterationRecord>,
    pub reason: TerminationReason,
    /// Indicators of the last step, absent when no step was taken.
    pub indicators: Option<IndicatorField>,
}

impl SolveHistory {
    pub fn iterations(&self) -> usize {
        self.records.len()
    }
}

/// Result of one linearized solve together with the frozen fields it used.
#[derive(Clone, Debug)]
pub struct StepOutput {
    pub state: DiscreteState,
    pub linear_residual: f64,
    /// Transport field of the step (full velocity).
    pub transport: Vec<f64>,
}

fn solve_linearized(
    problem: &Problem,
    state: &DiscreteState,
    transport: Vec<f64>,
    drag: &[f64],
    u_tilde: Option<Vec<f64>>,
    solver: &mut DirectSolver,
) -> Result<StepOutput> {
    let expected = problem.layout.n_velocity();
    if state.w.len() != expected {
        return Err(Error::Shape { expected, actual: state.w.len() });
    }
    let k = assemble_picard_matrix(&problem.context(), &transport, drag);
    let rhs = picard_rhs(&problem.load, &k, &problem.lift);
    let system = apply_constraints(&k, &problem.b, &rhs, &problem.layout, &problem.mesh);
    let singular = |detail: String| Error::SingularSystem { iterate: state.iterate, detail };
    let (x, residual) = system.solve(solver).map_err(|e| singular(e.0))?;
    if !(residual <= LINEAR_TOLERANCE) {
        return Err(singular(format!("relative residual {residual:e} above {LINEAR_TOLERANCE:e}")));
    }
    let (w, p, _) = system.expand(&x);
    Ok(StepOutput {
        state: DiscreteState { w, p, iterate: state.iterate + 1, u_tilde },
        linear_residual: residual,
        transport,
    })
}

/// One step of the plain scheme.
pub fn picard_step(problem: &Problem, state: &DiscreteState, solver: &mut DirectSolver) -> Result<StepOutput> {
    let u = problem.total_velocity(&state.w);
    solve_linearized(problem, state, u.clone(), &u, None, solver)
}

/// One step of the relaxed scheme; `state.u_tilde` holds `ũ^{i−1}` and is
/// seeded with `ū^0` when absent.
pub fn relaxed_picard_step(problem: &Problem, state: &DiscreteState, solver: &mut DirectSolver) -> Result<StepOutput> {
    let u_bar = problem.total_velocity(&state.w);
    let previous = state.u_tilde.as_deref().unwrap_or(&u_bar);
    if previous.len() != u_bar.len() {
        return Err(Error::Shape { expected: u_bar.len(), actual: previous.len() });
    }
    let u_tilde: Vec<f64> = u_bar.iter().zip(previous).map(|(a, b)| 0.5 * (a + b)).collect();
    solve_linearized(problem, state, u_tilde.clone(), &u_bar, Some(u_tilde), solver)
}

/// Iterates the chosen scheme from `w⁰ = 0` until the stopping rule fires.
pub fn run_fixed_mesh(problem: &Problem, scheme: Scheme, stop: &StopCriteria) -> Result<(DiscreteState, SolveHistory)> {
    run_from(problem, scheme, stop, problem.initial_state(scheme))
}

/// As [`run_fixed_mesh`] from a given initial state.
pub fn run_from(
    problem: &Problem,
    scheme: Scheme,
    stop: &StopCriteria,
    initial: DiscreteState,
) -> Result<(DiscreteState, SolveHistory)> {
    run_with_solver(problem, scheme, stop, initial, &mut DirectSolver::new())
}

/// As [`run_from`] with a caller-provided linear solver.
pub fn run_with_solver(
    problem: &Problem,
    scheme: Scheme,
    stop: &StopCriteria,
    initial: DiscreteState,
    solver: &mut DirectSolver,
) -> Result<(DiscreteState, SolveHistory)> {
    let mut state = initial;
    let mut records = Vec::new();
    let mut indicators = None;
    let mut first_eta_l = None;
    let reason = loop {
        if records.len() >= stop.max_iter {
            break TerminationReason::MaxIter;
        }
        let step = match scheme {
            Scheme::Plain => picard_step(problem, &state, solver)?,
            Scheme::Relaxed => relaxed_picard_step(problem, &state, solver)?,
        };
        let eta_l = compute_eta_l(&problem.mesh, &problem.layout, &state.w, &step.state.w, &problem.rule)?;
        let field = IndicatorField::new(eta_l, compute_eta_d(problem, &state.w, &step.state, &step.transport)?);
        let (eta_l, eta_d) = (field.eta_l_total(), field.eta_d_total());
        records.push(IterationRecord { i: state.iterate, eta_l, eta_d, linear_residual: step.linear_residual });
        state = step.state;
        indicators = Some(field);

        let first = *first_eta_l.get_or_insert(eta_l);
        if !eta_l.is_finite() || !eta_d.is_finite() || eta_l > DIVERGENCE_FACTOR * first {
            break TerminationReason::Diverged;
        }
        match stop.mode {
            StopMode::Absolute if eta_l <= stop.tol_abs => break TerminationReason::AbsTol,
            StopMode::Balance if eta_l <= stop.gamma_tilde * eta_d => break TerminationReason::Balance,
            _ => {}
        }
    };
    Ok((state, SolveHistory { records, reason, indicators }))
}
