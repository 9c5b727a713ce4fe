//! Batch front end: configuration, solve/study/verify runners and file output.

pub mod config;
pub mod verify;
pub mod vtk;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use log::{info, warn};
use monge_mixed::analysis::{run_convergence_study, StudyOptions};
use monge_mixed::fe_space::LagrangeSpace;
use monge_mixed::forms::FormQuadrature;
use monge_mixed::mesh::build_structured_mesh;
use monge_mixed::solver::{initial_guess, solve_from, MongeAmpereSystem, Termination};
use serde::Serialize;

pub use config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("no convergence: {0}")]
    NoConvergence(String),
    #[error("verification failed: {0}")]
    Verify(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Solver(monge_mixed::Error),
}

impl From<monge_mixed::Error> for CliError {
    fn from(e: monge_mixed::Error) -> Self {
        use monge_mixed::Error as E;
        match e {
            E::InvalidArgument(msg) => CliError::Config(msg),
            E::NonPositiveData { .. } => CliError::Config(e.to_string()),
            E::NoConvergence { .. }
            | E::SingularJacobian(_)
            | E::Diverged { .. }
            | E::NotConvex { .. } => CliError::NoConvergence(e.to_string()),
            other => CliError::Solver(other),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::NoConvergence(_) => 2,
            CliError::Verify(_) => 3,
            _ => 1,
        }
    }
}

/// Writes through a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let io = |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io)?;
    }
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(format!(".tmp{}", std::process::id()));
    let tmp = path.with_file_name(name);
    let result = std::fs::File::create(&tmp)
        .and_then(|mut f| f.write_all(bytes).and_then(|_| f.sync_all()))
        .and_then(|_| std::fs::rename(&tmp, path));
    if result.is_err() {
        let _ = std::fs::remove_file(&tmp);
    }
    result.map_err(io)
}

#[derive(Serialize)]
struct SolveSummary<'a> {
    problem: &'a str,
    n: usize,
    degree: usize,
    dofs: usize,
    method: String,
    iterations: usize,
    converged: bool,
    termination: Termination,
    initial_residual: f64,
    final_residual: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    nu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    err_u_h1: Option<f64>,
}

/// Solves on the finest configured level. Writes `solution.vtk`,
/// `iterations.jsonl` and `summary.json` into `out`, and streams one JSON
/// record per iteration to `stream`.
pub fn run_solve(config: &RunConfig, out: &Path, stream: &mut dyn Write) -> Result<(), CliError> {
    let problem = config.problem.build()?;
    let n = config.finest_level();
    let degree = config.discretization.degree;
    let mesh = Arc::new(build_structured_mesh(n, &config.domain)?);
    let space = LagrangeSpace::new(mesh, degree)?;
    let quad = FormQuadrature::for_degree(degree)?.with_threads(config.output.threads);
    let system = MongeAmpereSystem::new(&problem, &space, &quad)?;
    let u0 = initial_guess(&config.solver, &system)?;

    let mut lines = String::new();
    let mut stream_error = None;
    let result = solve_from(&system, &config.solver, u0, |record| {
        let line = serde_json::to_string(record).expect("record serializes");
        if let Err(e) = writeln!(stream, "{line}") {
            stream_error.get_or_insert(e);
        }
        lines.push_str(&line);
        lines.push('\n');
    })?;
    if let Some(e) = stream_error {
        warn!("could not stream iteration records: {e}");
    }

    let err_u_h1 = match problem.exact() {
        Some(exact) => {
            let rule = monge_mixed::analysis::error_quadrature(degree)?;
            Some(monge_mixed::analysis::error_norm(
                &result.u,
                exact,
                monge_mixed::analysis::Norm::H1,
                &rule,
            ))
        }
        None => None,
    };
    let summary = SolveSummary {
        problem: problem.name(),
        n,
        degree,
        dofs: space.num_dofs(),
        method: config.solver.method.to_string(),
        iterations: result.iterations,
        converged: result.converged,
        termination: result.termination,
        initial_residual: result.initial_residual,
        final_residual: result.final_residual(),
        nu: result.nu,
        err_u_h1,
    };
    let summary_json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    write_atomic(&out.join("iterations.jsonl"), lines.as_bytes())?;
    write_atomic(&out.join("summary.json"), format!("{summary_json}\n").as_bytes())?;
    vtk::export_vtk(&result.u, &result.sigma, &out.join("solution.vtk"))?;
    info!("wrote solution to {}", out.display());

    if result.converged {
        Ok(())
    } else {
        Err(CliError::NoConvergence(format!(
            "solve stopped after {} iterations ({:?}), residual {:e}",
            result.iterations,
            result.termination,
            result.final_residual()
        )))
    }
}

/// Runs the convergence study over all configured levels and writes
/// `report.csv` and `report.json` into `out`.
pub fn run_study(config: &RunConfig, out: &Path) -> Result<(), CliError> {
    let problem = config.problem.build()?;
    if problem.exact().is_none() {
        return Err(CliError::Config(
            "problem.exact (or a preset) is required for a study".into(),
        ));
    }
    let options = StudyOptions {
        domain: config.domain.clone(),
        levels: config.discretization.levels.clone(),
        degree: config.discretization.degree,
        threads: config.output.threads,
    };
    let report = run_convergence_study(&problem, &options, &config.solver)?;
    write_atomic(&out.join("report.csv"), report.to_csv()?.as_bytes())?;
    write_atomic(&out.join("report.json"), report.to_json()?.as_bytes())?;
    info!("wrote report to {}", out.display());
    match report.failure {
        Some(f) if !report.complete => Err(CliError::NoConvergence(f)),
        _ => Ok(()),
    }
}

/// Runs the invariant suite, printing one line per property.
pub fn run_verify(stream: &mut dyn Write) -> Result<(), CliError> {
    let outcomes = verify::run_suite()?;
    let mut failed = Vec::new();
    for o in &outcomes {
        let status = if o.passed { "PASS" } else { "FAIL" };
        let _ = writeln!(stream, "{status} {} {}", o.name, o.detail);
        if !o.passed {
            failed.push(o.name);
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Verify(failed.join(", ")))
    }
}
