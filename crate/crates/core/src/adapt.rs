//! Dörfler marking and the solve → estimate → mark → refine loop.

use std::time::Instant;

use crate::cases::ProblemSpec;
use crate::error::{Error, Result};
use crate::estimators::{compute_metrics, IndicatorField, RunMetrics};
use crate::mesh::{Mesh, DEFAULT_TRIANGLE_BUDGET};
use crate::quadrature::TriangleRule;
use crate::sparse::DirectSolver;
use crate::solver::{run_with_solver, DiscreteState, Problem, Scheme, SolveHistory, StopCriteria, TerminationReason};

/// Smallest set of elements, taken by decreasing indicator (ties by index),
/// whose squared indicators sum to at least `theta²` of the total.
pub fn mark(indicators: &[f64], theta: f64) -> Result<Vec<usize>> {
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(Error::InvalidInput(format!("marking fraction {theta} outside (0, 1]")));
    }
    if let Some(bad) = indicators.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::InvalidInput(format!("indicator {bad} is {}", indicators[bad])));
    }
    let total: f64 = indicators.iter().map(|v| v * v).sum();
    if total == 0.0 {
        return Ok(Vec::new());
    }
    let mut order: Vec<usize> = (0..indicators.len()).collect();
    order.sort_by(|&a, &b| indicators[b].total_cmp(&indicators[a]).then(a.cmp(&b)));
    let target = theta * theta * total;
    let mut acc = 0.0;
    let mut marked = Vec::new();
    for t in order {
        if acc >= target || indicators[t] == 0.0 {
            break;
        }
        acc += indicators[t] * indicators[t];
        marked.push(t);
    }
    Ok(marked)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RefinementMode {
    Adaptive,
    Uniform,
}

impl RefinementMode {
    pub fn as_str(self) -> &'static str {
        match self {
            RefinementMode::Adaptive => "adaptive",
            RefinementMode::Uniform => "uniform",
        }
    }
}

impl std::str::FromStr for RefinementMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "adaptive" => Ok(RefinementMode::Adaptive),
            "uniform" => Ok(RefinementMode::Uniform),
            other => Err(Error::Config(format!("unknown refinement mode `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdaptConfig {
    pub theta: f64,
    pub max_levels: usize,
    pub mode: RefinementMode,
    pub scheme: Scheme,
    pub stop: StopCriteria,
    pub quad_degree: usize,
    /// Refinement stops once a mesh would exceed this many triangles.
    pub triangle_budget: usize,
    /// Worker threads for the sparse factorization.
    pub threads: usize,
}

impl Default for AdaptConfig {
    fn default() -> Self {
        AdaptConfig {
            theta: 0.5,
            max_levels: 5,
            mode: RefinementMode::Adaptive,
            scheme: Scheme::Relaxed,
            stop: StopCriteria::default(),
            quad_degree: crate::quadrature::DEFAULT_DEGREE,
            triangle_budget: DEFAULT_TRIANGLE_BUDGET,
            threads: 1,
        }
    }
}

impl AdaptConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return Err(Error::Config(format!("theta = {} outside (0, 1]", self.theta)));
        }
        if self.max_levels == 0 {
            return Err(Error::Config("max_levels must be at least 1".into()));
        }
        if self.quad_degree < 1 {
            return Err(Error::Config("quad_degree must be positive".into()));
        }
        let s = &self.stop;
        if !(s.tol_abs > 0.0) || !(s.gamma_tilde > 0.0) {
            return Err(Error::Config("tol_abs and gamma_tilde must be positive".into()));
        }
        Ok(())
    }
}

/// Summary of one level.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelRecord {
    pub level: usize,
    pub n_triangles: usize,
    pub stu: usize,
    pub iterations: usize,
    pub reason: TerminationReason,
    pub eta_l: f64,
    pub eta_d: f64,
    pub e_total: f64,
    pub err: Option<f64>,
    pub ei: Option<f64>,
    pub wall_s: f64,
}

#[derive(Clone, Debug)]
pub struct RunReport {
    pub mode: RefinementMode,
    pub levels: Vec<LevelRecord>,
    /// False when an error cut the run short; `failure` then says why.
    pub complete: bool,
    pub failure: Option<String>,
}

/// Everything known about a finished level, handed to the observer.
pub struct LevelOutput<'a> {
    pub record: &'a LevelRecord,
    pub problem: &'a Problem,
    pub state: &'a DiscreteState,
    pub history: &'a SolveHistory,
    pub indicators: Option<&'a IndicatorField>,
    pub metrics: &'a RunMetrics,
}

/// Runs the level loop from the case's initial grid with parameter `n0`.
pub fn adaptive_solve(
    spec: &ProblemSpec,
    n0: usize,
    config: &AdaptConfig,
    observer: impl FnMut(&LevelOutput) -> Result<()>,
) -> Result<RunReport> {
    config.validate()?;
    let mesh = spec.initial_mesh(n0)?;
    Ok(adaptive_solve_from(spec, mesh, config, observer))
}

/// Runs the level loop from a given mesh. Errors after validation end the
/// run with an incomplete report holding the finished levels.
pub fn adaptive_solve_from(
    spec: &ProblemSpec,
    mesh: Mesh,
    config: &AdaptConfig,
    mut observer: impl FnMut(&LevelOutput) -> Result<()>,
) -> RunReport {
    let mut report = RunReport { mode: config.mode, levels: Vec::new(), complete: true, failure: None };
    let mut mesh = Some(mesh);
    for level in 0..config.max_levels {
        let current = mesh.take().expect("mesh for the next level");
        match run_level(spec, current, level, config, &mut observer) {
            Ok((record, next)) => {
                report.levels.push(record);
                mesh = next;
            }
            Err(e) => {
                report.complete = false;
                report.failure = Some(e.to_string());
                break;
            }
        }
        if mesh.is_none() {
            break;
        }
    }
    report
}

fn run_level(
    spec: &ProblemSpec,
    mesh: Mesh,
    level: usize,
    config: &AdaptConfig,
    observer: &mut impl FnMut(&LevelOutput) -> Result<()>,
) -> Result<(LevelRecord, Option<Mesh>)> {
    let start = Instant::now();
    let problem = spec.discretize(mesh, TriangleRule::with_degree(config.quad_degree))?;
    let mut solver = DirectSolver::with_threads(config.threads);
    let initial = problem.initial_state(config.scheme);
    let (state, history) = run_with_solver(&problem, config.scheme, &config.stop, initial, &mut solver)?;
    let indicators = history.indicators.as_ref();
    let eta_d = indicators.map_or(0.0, |f| f.eta_d_total());
    let eta_l = indicators.map_or(0.0, |f| f.eta_l_total());
    let metrics = compute_metrics(&problem, &state, spec.exact.as_ref(), eta_d)?;
    let record = LevelRecord {
        level,
        n_triangles: problem.mesh.n_triangles(),
        stu: problem.layout.stu(),
        iterations: history.iterations(),
        reason: history.reason,
        eta_l,
        eta_d,
        e_total: metrics.e_total,
        err: metrics.err().ok(),
        ei: metrics.ei().ok(),
        wall_s: start.elapsed().as_secs_f64(),
    };
    observer(&LevelOutput { record: &record, problem: &problem, state: &state, history: &history, indicators, metrics: &metrics })?;
    if level + 1 == config.max_levels {
        return Ok((record, None));
    }
    let next = match config.mode {
        RefinementMode::Uniform => problem.mesh.refine_uniform_with_budget(config.triangle_budget)?,
        RefinementMode::Adaptive => {
            let eta = indicators.map(|f| f.eta_d.as_slice()).unwrap_or(&[]);
            let marked = mark(eta, config.theta)?;
            problem.mesh.refine_with_budget(&marked, config.triangle_budget)?
        }
    };
    Ok((record, Some(next)))
}
