//! Run configuration, read from TOML.

use std::path::{Path, PathBuf};

use monge_mixed::expr::Expr;
use monge_mixed::mesh::Domain;
use monge_mixed::problem::{Preset, Problem};
use monge_mixed::solver::SolverConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_domain")]
    pub domain: Domain,
    pub discretization: Discretization,
    pub problem: ProblemConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_domain() -> Domain {
    Domain::UnitSquare
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Discretization {
    #[serde(default = "default_degree")]
    pub degree: usize,
    /// Subdivisions per side; `solve` uses the last entry.
    pub levels: Vec<usize>,
}

fn default_degree() -> usize {
    2
}

/// Either a preset, a manufactured solution `exact`, or data `f` and `g`
/// (optionally with `exact` for error reporting).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<Preset>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub threads: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            threads: 1,
        }
    }
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn parse_expr(field: &str, src: &str) -> Result<Expr, CliError> {
    Expr::parse(src).map_err(|e| invalid(format!("problem.{field}: {e}")))
}

impl ProblemConfig {
    pub fn build(&self) -> Result<Problem, CliError> {
        match (self.preset, &self.exact, &self.f, &self.g) {
            (Some(p), None, None, None) => Ok(Problem::preset(p)),
            (Some(_), ..) => Err(invalid(
                "problem.preset cannot be combined with problem.exact, problem.f or problem.g",
            )),
            (None, Some(u), None, None) => {
                let u = parse_expr("exact", u)?;
                Problem::manufactured("manufactured", u).map_err(|e| invalid(format!("problem.exact: {e}")))
            }
            (None, exact, Some(f), Some(g)) => {
                let p = Problem::new("data", parse_expr("f", f)?, parse_expr("g", g)?);
                match exact {
                    Some(u) => p
                        .with_exact(parse_expr("exact", u)?)
                        .map_err(|e| invalid(format!("problem.exact: {e}"))),
                    None => Ok(p),
                }
            }
            (None, _, Some(_), None) => Err(invalid("problem.g is required when problem.f is given")),
            (None, _, None, Some(_)) => Err(invalid("problem.f is required when problem.g is given")),
            (None, None, None, None) => Err(invalid(
                "problem needs a preset, an exact solution, or f and g",
            )),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let config: RunConfig = toml::from_str(text).map_err(|e| invalid(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.solver.validate().map_err(|e| invalid(format!("solver.{}", strip(e))))?;
        self.domain
            .validate()
            .map_err(|e| invalid(format!("domain: {e}")))?;
        let d = &self.discretization;
        if d.degree < 2 {
            return Err(invalid(format!(
                "discretization.degree must be at least 2, got {}",
                d.degree
            )));
        }
        if d.levels.is_empty() || d.levels.contains(&0) {
            return Err(invalid("discretization.levels must be a non-empty list of positive integers"));
        }
        if d.levels.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("discretization.levels must be increasing"));
        }
        if self.output.threads == 0 {
            return Err(invalid("output.threads must be at least 1"));
        }
        self.problem.build()?;
        Ok(())
    }

    /// Mesh size used by `solve`.
    pub fn finest_level(&self) -> usize {
        *self.discretization.levels.last().expect("validated non-empty")
    }
}

/// Drops the error-kind prefix so the message starts with the field name.
fn strip(e: monge_mixed::Error) -> String {
    match e {
        monge_mixed::Error::InvalidArgument(msg) => msg,
        other => other.to_string(),
    }
}
