//! Acceptance suite P1–P10. Runs as a plain binary (no libtest harness) so
//! that it can print one verdict line per criterion; it exits non-zero when
//! any criterion fails.

mod common;

use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use bdf_core::adapt::{adaptive_solve, AdaptConfig, LevelRecord, RefinementMode};
use bdf_core::assembly::{assemble_a, assemble_b, assemble_convection, assemble_load, AssemblyContext};
use bdf_core::cases::{manufactured_case, packed_bed_case, ProblemSpec};
use bdf_core::coeffs::CoefficientSet;
use bdf_core::estimators::exact_errors;
use bdf_core::fespace::{build_layout, Gauge};
use bdf_core::fields::{Closure1, ScalarFn, VectorFn};
use bdf_core::mesh::Point;
use bdf_core::quadrature::TriangleRule;
use bdf_core::solver::{run_fixed_mesh, Problem, Scheme, StopCriteria, StopMode, TerminationReason};
use common::{random_free_vector, relative_difference, relative_vector_difference, small_meshes, Oracle};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Verdict = Result<String, String>;

fn check(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn fail(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn discretize(spec: &ProblemSpec, n: usize) -> Result<Problem, String> {
    let mesh = spec.initial_mesh(n).map_err(fail)?;
    spec.discretize(mesh, TriangleRule::default()).map_err(fail)
}

fn absolute_stop(max_iter: usize) -> StopCriteria {
    StopCriteria { mode: StopMode::Absolute, tol_abs: 1e-6, max_iter, ..StopCriteria::default() }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn p1_skew_identity() -> Verdict {
    let problem = discretize(&manufactured_case(100.0), 8)?;
    let fixed = problem.layout.dirichlet_mask();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let u: Vec<f64> = (0..fixed.len()).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let v = random_free_vector(&mut rng, &fixed);
        let d = assemble_convection(&problem.context(), &u, &u).transport;
        let ratio = d.bilinear(&v, &v).abs() / (d.frobenius_norm() * norm(&v).powi(2));
        worst = worst.max(ratio);
    }
    check(worst <= 1e-10, format!("max |vᵀDv| / (‖D‖_F ‖v‖²) = {worst:.2e} (limit 1e-10)"))
}

fn p2_zero_data() -> Verdict {
    let mut spec = manufactured_case(100.0);
    spec.forcing = Arc::new(|_| [0.0, 0.0]);
    let problem = discretize(&spec, 8)?;
    let (state, history) = run_fixed_mesh(&problem, Scheme::Relaxed, &absolute_stop(1)).map_err(fail)?;
    let size = (norm(&state.w).powi(2) + norm(&state.p).powi(2)).sqrt();
    let eta_d = history.records.first().ok_or("no iterate")?.eta_d;
    check(size <= 1e-9 && eta_d <= 1e-9, format!("‖(w, p)‖ = {size:.2e}, η^D = {eta_d:.2e} (limit 1e-9)"))
}

fn p3_mass_conservation() -> Verdict {
    let problem = discretize(&manufactured_case(100.0), 8)?;
    let fixed = problem.layout.dirichlet_mask();
    let ones = vec![1.0; problem.layout.n_pressure()];
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let v = random_free_vector(&mut rng, &fixed);
        worst = worst.max(problem.b_matrix().bilinear(&ones, &v).abs() / norm(&v));
    }
    check(worst <= 1e-12, format!("max |b_h(v, 1)| / ‖v‖ = {worst:.2e} (limit 1e-12)"))
}

/// Error `|u − u_h|_1 + ‖p − p_h‖` and `η^D` at Re = 100 on the N = 8, 16, 32 grids.
fn convergence_study() -> Result<Vec<(usize, f64, f64, usize)>, String> {
    let spec = manufactured_case(100.0);
    let exact = spec.exact.clone().ok_or("no exact solution")?;
    let mut rows = Vec::new();
    for n in [8, 16, 32] {
        let problem = discretize(&spec, n)?;
        let (state, history) = run_fixed_mesh(&problem, Scheme::Relaxed, &absolute_stop(1000)).map_err(fail)?;
        if !history.reason.converged() {
            return Err(format!("N = {n}: Picard iteration ended with {}", history.reason));
        }
        let u = problem.total_velocity(&state.w);
        let err = exact_errors(&problem, &exact, &u, &state.p).map_err(fail)?.absolute();
        let eta_d = history.records.last().map_or(f64::NAN, |r| r.eta_d);
        rows.push((n, err, eta_d, history.iterations()));
    }
    Ok(rows)
}

fn p4_convergence_rate(rows: &[(usize, f64, f64, usize)]) -> Verdict {
    let orders: Vec<f64> = rows.windows(2).map(|w| (w[0].1 / w[1].1).ln() / 2f64.ln()).collect();
    let errs: Vec<String> = rows.iter().map(|r| format!("N={} err={:.4e} ({} its)", r.0, r.1, r.3)).collect();
    let listed: Vec<String> = orders.iter().map(|o| format!("{o:.3}")).collect();
    check(
        orders.iter().all(|&o| o >= 0.8),
        format!("{}; orders [{}] (need ≥ 0.8)", errs.join(", "), listed.join(", ")),
    )
}

fn p5_estimator_two_sided(rows: &[(usize, f64, f64, usize)]) -> Verdict {
    let ratios: Vec<f64> = rows.iter().map(|r| r.2 / r.1).collect();
    let (lo, hi) = ratios.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &r| (a.min(r), b.max(r)));
    let listed: Vec<String> = ratios.iter().map(|r| format!("{r:.3}")).collect();
    check(
        lo >= 0.05 && hi <= 20.0 && hi / lo < 4.0,
        format!("η^D / err = [{}], spread ×{:.2} (need within [0.05, 20], spread < 4)", listed.join(", "), hi / lo),
    )
}

fn p6_scheme_robustness() -> Verdict {
    let stop = absolute_stop(200);
    let mut parts = Vec::new();
    let mut ok = true;
    for (scheme, re, expect_converged) in
        [(Scheme::Plain, 100.0, true), (Scheme::Relaxed, 1000.0, true), (Scheme::Plain, 500.0, false)]
    {
        let problem = discretize(&manufactured_case(re), 40)?;
        let (_, history) = run_fixed_mesh(&problem, scheme, &stop).map_err(fail)?;
        let reason = history.reason;
        let good = if expect_converged {
            reason == TerminationReason::AbsTol
        } else {
            matches!(reason, TerminationReason::MaxIter | TerminationReason::Diverged)
        };
        ok &= good;
        let eta_l = history.records.last().map_or(f64::NAN, |r| r.eta_l);
        parts.push(format!(
            "{:?} Re={re}: {reason} after {} its, η^L {eta_l:.2e} [{}]",
            scheme,
            history.iterations(),
            if good { "ok" } else { "bad" }
        ));
    }
    check(ok, parts.join("; "))
}

fn run_levels(spec: &ProblemSpec, n0: usize, config: &AdaptConfig) -> Result<Vec<LevelRecord>, String> {
    let report = adaptive_solve(spec, n0, config, |_| Ok(())).map_err(fail)?;
    match report.failure {
        Some(f) => Err(format!("{} run failed: {f}", config.mode.as_str())),
        None => Ok(report.levels),
    }
}

/// Number of uniform levels from the grid with parameter `n0` until the STU
/// reaches `target_stu`.
fn uniform_levels_needed(spec: &ProblemSpec, n0: usize, target_stu: usize) -> usize {
    let gauge = usize::from(spec.gauge == Gauge::ZeroMean);
    let mut k = 0;
    loop {
        let (nx, ny) = (spec.cells_per_n[0] * n0 << k, spec.cells_per_n[1] * n0 << k);
        let nv = (nx + 1) * (ny + 1);
        let nt = 2 * nx * ny;
        if 2 * (nv + nt) + nv + gauge >= target_stu {
            return k + 1;
        }
        k += 1;
    }
}

/// Log-log interpolation of `curve` (sorted by STU) at `stu`.
fn interpolate(curve: &[(usize, f64)], stu: usize) -> Option<f64> {
    let x = (stu as f64).ln();
    curve.windows(2).find_map(|w| {
        let (x0, x1) = ((w[0].0 as f64).ln(), (w[1].0 as f64).ln());
        (x0 <= x && x <= x1).then(|| {
            let s = (x - x0) / (x1 - x0);
            ((1.0 - s) * w[0].1.ln() + s * w[1].1.ln()).exp()
        })
    })
}

fn curve(levels: &[LevelRecord], value: impl Fn(&LevelRecord) -> Option<f64>) -> Result<Vec<(usize, f64)>, String> {
    levels
        .iter()
        .map(|r| value(r).map(|v| (r.stu, v)).ok_or_else(|| format!("level {} lacks the metric", r.level)))
        .collect()
}

fn p7_adaptive_beats_uniform() -> Verdict {
    let spec = manufactured_case(500.0);
    let n0 = 20;
    let adaptive = run_levels(&spec, n0, &AdaptConfig { max_levels: 5, ..AdaptConfig::default() })?;
    let final_stu = adaptive.last().ok_or("no adaptive level")?.stu;
    let uniform_config = AdaptConfig {
        mode: RefinementMode::Uniform,
        max_levels: uniform_levels_needed(&spec, n0, final_stu),
        ..AdaptConfig::default()
    };
    let uniform = run_levels(&spec, n0, &uniform_config)?;
    let a = curve(&adaptive, |r| r.err)?;
    let u = curve(&uniform, |r| r.err)?;

    let mut ok = true;
    let mut pairs = Vec::new();
    for &(sa, ea) in &a {
        for &(su, eu) in &u {
            if (sa as f64 / su as f64 - 1.0).abs() <= 0.2 {
                ok &= ea <= eu;
                pairs.push(format!("{sa}/{su}: {:.3}", ea / eu));
            }
        }
    }
    let (sa, ea) = *a.last().ok_or("no adaptive level")?;
    let eu = interpolate(&u, sa).ok_or("uniform curve does not reach the final adaptive STU")?;
    ok &= ea <= 0.8 * eu;
    check(
        ok,
        format!(
            "matched err ratios [{}] (need ≤ 1); final STU {sa}: adaptive {ea:.4e} vs uniform {eu:.4e}, ratio {:.3} (need ≤ 0.8)",
            pairs.join(", "),
            ea / eu
        ),
    )
}

fn p8_marking_degeneracy() -> Verdict {
    let spec = manufactured_case(100.0);
    let capture = |mode: RefinementMode, theta: f64| -> Result<Vec<(Vec<Point>, Vec<[usize; 3]>)>, String> {
        let mut meshes = Vec::new();
        let config = AdaptConfig { mode, theta, max_levels: 4, ..AdaptConfig::default() };
        let report = adaptive_solve(&spec, 4, &config, |level| {
            let mesh = &level.problem.mesh;
            meshes.push((mesh.vertices().to_vec(), mesh.triangles().to_vec()));
            Ok(())
        })
        .map_err(fail)?;
        match report.failure {
            Some(f) => Err(f),
            None => Ok(meshes),
        }
    };
    let adaptive = capture(RefinementMode::Adaptive, 1.0)?;
    let uniform = capture(RefinementMode::Uniform, 0.5)?;
    let counts: Vec<String> = adaptive.iter().map(|m| m.1.len().to_string()).collect();
    check(
        adaptive.len() == uniform.len() && adaptive == uniform,
        format!("{} levels, triangles [{}], sequences identical: {}", adaptive.len(), counts.join(", "), adaptive == uniform),
    )
}

fn p9_packed_bed() -> Verdict {
    let spec = packed_bed_case(100.0, 0.2);
    let n0 = 60;
    let adaptive = run_levels(&spec, n0, &AdaptConfig { max_levels: 3, ..AdaptConfig::default() })?;
    let converged = adaptive.iter().all(|r| r.reason.converged());
    let decreasing = adaptive.windows(2).all(|w| w[1].e_total < w[0].e_total);
    let final_stu = adaptive.last().ok_or("no adaptive level")?.stu;
    let uniform_config = AdaptConfig {
        mode: RefinementMode::Uniform,
        max_levels: uniform_levels_needed(&spec, n0, final_stu),
        ..AdaptConfig::default()
    };
    let uniform = run_levels(&spec, n0, &uniform_config)?;
    let u = curve(&uniform, |r| Some(r.e_total))?;
    let last = adaptive.last().ok_or("no adaptive level")?;
    let eu = interpolate(&u, last.stu).ok_or("uniform curve does not reach the final adaptive STU")?;
    let e: Vec<String> = adaptive.iter().map(|r| format!("{:.4e}", r.e_total)).collect();
    check(
        converged && decreasing && last.e_total < eu,
        format!(
            "converged {converged}; adaptive E_total [{}] decreasing {decreasing}; final STU {}: {:.4e} vs uniform {eu:.4e}",
            e.join(", "),
            last.stu,
            last.e_total
        ),
    )
}

fn p10_oracle_equivalence() -> Verdict {
    let rule = TriangleRule::default();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let epsilon: ScalarFn = Arc::new(|p: Point| 0.4 + 0.3 * p[0] + 0.2 * p[1] * p[1]);
    let alpha: Closure1 = Arc::new(|e| (1.0 - e).powi(2) + 0.1);
    let beta: Closure1 = Arc::new(|e| 1.0 + e);
    let forcing: VectorFn = Arc::new(|p: Point| [(3.0 * p[0]).sin() + p[1], p[0] * p[1] - 1.0]);
    let mut worst = 0.0f64;
    let meshes = small_meshes();
    for mesh in &meshes {
        let coeffs = CoefficientSet::new(mesh, epsilon.clone(), alpha.clone(), beta.clone(), 7.0, 0.2).map_err(fail)?;
        let layout = build_layout(mesh, &[], Gauge::None).map_err(fail)?;
        let ctx = AssemblyContext { mesh, coeffs: &coeffs, layout: &layout, rule: &rule };
        let oracle = Oracle::new(mesh, &coeffs.eps_h, alpha.clone(), beta.clone(), 7.0, &rule);
        let n = layout.n_velocity();
        let t: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let u: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let conv = assemble_convection(&ctx, &t, &u);
        for diff in [
            relative_difference(&assemble_a(&ctx), &oracle.a()),
            relative_difference(&assemble_b(&ctx), &oracle.b()),
            relative_difference(&conv.transport, &oracle.d(&t)),
            relative_difference(&conv.forchheimer, &oracle.forchheimer(&u)),
            relative_vector_difference(&assemble_load(&ctx, &forcing), &oracle.load(&forcing)),
        ] {
            worst = worst.max(diff);
        }
    }
    check(worst <= 1e-12, format!("{} meshes, max relative deviation {worst:.2e} (limit 1e-12)", meshes.len()))
}

fn main() -> ExitCode {
    let mut failures = 0;
    let mut report = |id: &str, title: &str, run: &dyn Fn() -> Verdict| {
        let start = Instant::now();
        let verdict = run();
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail) = match verdict {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failures += 1;
                ("FAIL", d)
            }
        };
        println!("{id} {tag} {title} ({secs:.1} s): {detail}");
    };
    report("P1", "skew identity", &p1_skew_identity);
    report("P2", "zero-data fixed point", &p2_zero_data);
    report("P3", "mass conservation", &p3_mass_conservation);
    let start = Instant::now();
    let rows = convergence_study();
    println!("    shared N = 8, 16, 32 runs for P4 and P5 took {:.1} s", start.elapsed().as_secs_f64());
    report("P4", "manufactured convergence rate", &|| rows.clone().and_then(|r| p4_convergence_rate(&r)));
    report("P5", "estimator two-sidedness", &|| rows.clone().and_then(|r| p5_estimator_two_sided(&r)));
    report("P6", "scheme robustness", &p6_scheme_robustness);
    report("P7", "adaptive beats uniform", &p7_adaptive_beats_uniform);
    report("P8", "marking degeneracy", &p8_marking_degeneracy);
    report("P9", "packed-bed smoke", &p9_packed_bed);
    report("P10", "oracle equivalence", &p10_oracle_equivalence);
    if failures == 0 {
        println!("acceptance: all criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failures} criteria failed");
        ExitCode::FAILURE
    }
}
