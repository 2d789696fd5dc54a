//! `bdf-adapt`: runs fixed-mesh, adaptive and uniform studies of the
//! Brinkman-Darcy-Forchheimer benchmarks and writes meshes, VTK snapshots and
//! CSV reports.

mod config;
mod output;

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bdf_core::adapt::{adaptive_solve, LevelOutput, RefinementMode, RunReport};
use bdf_core::cases::case_by_name;
use bdf_core::mesh::write_mesh;
use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use config::{ConfigError, RunConfig};

#[derive(Parser)]
#[command(name = "bdf-adapt", version, about = "Adaptive mini-element solver for porous-medium flow")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one refinement sequence (the configured `mode`) and write its artifacts.
    Solve(Overrides),
    /// Run both the uniform and the adaptive sequence and write `study.csv`.
    Study(Overrides),
}

/// Config file plus per-key overrides; flags carry the config key names.
#[derive(Args)]
struct Overrides {
    /// Flat `key = value` file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    case: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    re: Option<String>,
    #[arg(long = "c_in", alias = "c-in", allow_hyphen_values = true)]
    c_in: Option<String>,
    #[arg(long)]
    n0: Option<String>,
    #[arg(long)]
    scheme: Option<String>,
    #[arg(long = "stop_mode", alias = "stop-mode")]
    stop_mode: Option<String>,
    #[arg(long = "tol_abs", alias = "tol-abs", allow_hyphen_values = true)]
    tol_abs: Option<String>,
    #[arg(long = "gamma_tilde", alias = "gamma-tilde", allow_hyphen_values = true)]
    gamma_tilde: Option<String>,
    #[arg(long = "max_iter", alias = "max-iter")]
    max_iter: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    theta: Option<String>,
    #[arg(long = "max_levels", alias = "max-levels")]
    max_levels: Option<String>,
    #[arg(long)]
    mode: Option<String>,
    #[arg(long = "quad_degree", alias = "quad-degree")]
    quad_degree: Option<String>,
    #[arg(long = "output_dir", alias = "output-dir")]
    output_dir: Option<String>,
    #[arg(long)]
    deterministic: Option<String>,
}

impl Overrides {
    fn pairs(&self) -> [(&'static str, &Option<String>); 15] {
        [
            ("case", &self.case),
            ("re", &self.re),
            ("c_in", &self.c_in),
            ("n0", &self.n0),
            ("scheme", &self.scheme),
            ("stop_mode", &self.stop_mode),
            ("tol_abs", &self.tol_abs),
            ("gamma_tilde", &self.gamma_tilde),
            ("max_iter", &self.max_iter),
            ("theta", &self.theta),
            ("max_levels", &self.max_levels),
            ("mode", &self.mode),
            ("quad_degree", &self.quad_degree),
            ("output_dir", &self.output_dir),
            ("deterministic", &self.deterministic),
        ]
    }

    fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut config = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|source| ConfigError::Read { path: path.clone(), source })?;
                RunConfig::from_text(&text)?
            }
            None => RunConfig::default(),
        };
        for (key, value) in self.pairs() {
            if let Some(v) = value {
                config.set(key, v)?;
            }
        }
        config.validate()?;
        Ok(config)
    }
}

#[derive(Debug, Error)]
enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),

    #[error(transparent)]
    Core(#[from] bdf_core::Error),

    #[error("run stopped early: {0}")]
    Incomplete(String),

    #[error("cannot write {path}: {message}")]
    Output { path: PathBuf, message: String },
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Core(e) if e.is_numerical() => "numerical",
            CliError::Core(bdf_core::Error::Io(_)) => "io",
            CliError::Core(_) => "config",
            CliError::Incomplete(_) => "numerical",
            CliError::Output { .. } => "io",
        }
    }

    fn exit_code(&self) -> u8 {
        match self.kind() {
            "config" => 2,
            "numerical" => 3,
            _ => 1,
        }
    }
}

fn output_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Output { path: path.to_path_buf(), message: e.to_string() }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(|e| output_error(path, e))
}

/// Worker threads allowed by `BDF_ADAPT_THREADS`, capped by the machine.
fn thread_budget() -> Result<usize, CliError> {
    let available = std::thread::available_parallelism().map_or(1, |n| n.get());
    match std::env::var("BDF_ADAPT_THREADS") {
        Ok(v) => {
            let n: usize = v.trim().parse().map_err(|_| ConfigError::InvalidValue {
                key: "BDF_ADAPT_THREADS".into(),
                value: v.clone(),
                reason: "expected a positive integer".into(),
            })?;
            Ok(n.clamp(1, available))
        }
        Err(_) => Ok(1),
    }
}

fn log_level(mode: RefinementMode, level: &LevelOutput) {
    let r = level.record;
    println!(
        "{} level {}: {} triangles, {} unknowns, {} iterations ({}), eta_L {:.3e}, eta_D {:.3e}, E_total {:.3e}",
        mode.as_str(),
        r.level,
        r.n_triangles,
        r.stu,
        r.iterations,
        r.reason,
        r.eta_l,
        r.eta_d,
        r.e_total
    );
}

fn run_sequence(
    config: &RunConfig,
    mode: RefinementMode,
    threads: usize,
    mut write_level: impl FnMut(&LevelOutput) -> Result<(), CliError>,
) -> Result<RunReport, CliError> {
    let spec = case_by_name(&config.case, config.re, config.c_in)?;
    let adapt = config.adapt_config(mode, threads);
    let mut write_failure = None;
    let report = adaptive_solve(&spec, config.n0, &adapt, |level| {
        log_level(mode, level);
        write_level(level).map_err(|e| {
            let message = e.to_string();
            write_failure = Some(e);
            bdf_core::Error::InvalidInput(message)
        })
    })?;
    if let Some(e) = write_failure {
        return Err(e);
    }
    Ok(report)
}

fn write_level_files(dir: &Path, level: &LevelOutput) -> Result<(), CliError> {
    let n = level.record.level;
    let mesh_path = dir.join(format!("mesh_{n}.bdfmesh"));
    write_mesh(&level.problem.mesh, create(&mesh_path)?).map_err(|e| output_error(&mesh_path, e))?;
    let vtk_path = dir.join(format!("solution_{n}.vtk"));
    output::write_vtk(create(&vtk_path)?, level).map_err(|e| output_error(&vtk_path, e))
}

fn write_table(path: &Path, groups: &[(RefinementMode, &RunReport)]) -> Result<(), CliError> {
    let rows: Vec<_> = groups.iter().map(|(m, r)| (*m, r.levels.as_slice())).collect();
    output::write_csv(create(path)?, &rows).map_err(|e| output_error(path, e))
}

fn check_complete(reports: &[&RunReport]) -> Result<(), CliError> {
    match reports.iter().find_map(|r| r.failure.clone()) {
        Some(message) => Err(CliError::Incomplete(message)),
        None => Ok(()),
    }
}

fn solve(config: &RunConfig) -> Result<(), CliError> {
    let dir = &config.output_dir;
    fs::create_dir_all(dir).map_err(|e| output_error(dir, e))?;
    let report = run_sequence(config, config.mode, thread_budget()?, |level| write_level_files(dir, level))?;
    let path = dir.join("report.csv");
    write_table(&path, &[(config.mode, &report)])?;
    println!("wrote {}", path.display());
    check_complete(&[&report])
}

fn study(config: &RunConfig) -> Result<(), CliError> {
    let dir = &config.output_dir;
    fs::create_dir_all(dir).map_err(|e| output_error(dir, e))?;
    let threads = thread_budget()?;
    let uniform = run_sequence(config, RefinementMode::Uniform, threads, |_| Ok(()))?;
    let adaptive = run_sequence(config, RefinementMode::Adaptive, threads, |_| Ok(()))?;
    let path = dir.join("study.csv");
    write_table(&path, &[(RefinementMode::Uniform, &uniform), (RefinementMode::Adaptive, &adaptive)])?;
    println!("wrote {}", path.display());
    check_complete(&[&uniform, &adaptive])
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Solve(o) => o.resolve().and_then(|c| solve(&c)),
        Command::Study(o) => o.resolve().and_then(|c| study(&c)),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error kind={} code={} message={:?}", e.kind(), e.exit_code(), e.to_string());
            ExitCode::from(e.exit_code())
        }
    }
}
