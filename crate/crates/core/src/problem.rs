//! Problem data: right-hand side `f`, boundary data `g` and, for manufactured
//! problems, the exact solution with its derivatives.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{Expr, Var};
use crate::linalg::Sym2x2;

/// Built-in manufactured solutions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// `u = (x² + y²)/2`, `f = 1`.
    Quadratic,
    /// `u = exp((x² + y²)/2)`, `f = (1 + x² + y²) exp(x² + y²)`.
    Exponential,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::Quadratic => "quadratic",
            Preset::Exponential => "exponential",
        }
    }

    pub fn exact_source(self) -> &'static str {
        match self {
            Preset::Quadratic => "(x^2 + y^2) / 2",
            Preset::Exponential => "exp((x^2 + y^2) / 2)",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Preset> {
        match s {
            "quadratic" => Ok(Preset::Quadratic),
            "exponential" => Ok(Preset::Exponential),
            _ => Err(Error::InvalidArgument(format!(
                "unknown preset {s:?} (expected quadratic or exponential)"
            ))),
        }
    }
}

/// An exact solution `u` together with its gradient and Hessian.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactSolution {
    u: Expr,
    gradient: [Expr; 2],
    hessian: [Expr; 3],
}

impl ExactSolution {
    pub fn new(u: Expr) -> Result<Self> {
        let ux = u.diff(Var::X)?;
        let uy = u.diff(Var::Y)?;
        let uxx = ux.diff(Var::X)?;
        let uxy = ux.diff(Var::Y)?;
        let uyy = uy.diff(Var::Y)?;
        Ok(ExactSolution {
            u,
            gradient: [ux, uy],
            hessian: [uxx, uxy, uyy],
        })
    }

    pub fn expr(&self) -> &Expr {
        &self.u
    }

    pub fn value(&self, x: f64, y: f64) -> f64 {
        self.u.eval(x, y)
    }

    pub fn gradient(&self, x: f64, y: f64) -> [f64; 2] {
        [self.gradient[0].eval(x, y), self.gradient[1].eval(x, y)]
    }

    /// `σ = D²u`.
    pub fn hessian(&self, x: f64, y: f64) -> Sym2x2 {
        Sym2x2::new(
            self.hessian[0].eval(x, y),
            self.hessian[1].eval(x, y),
            self.hessian[2].eval(x, y),
        )
    }

    /// Symbolic `det D²u`.
    pub fn monge_ampere(&self) -> Expr {
        let [a, b, c] = self.hessian.clone();
        Expr::Sub(
            Box::new(Expr::Mul(Box::new(a), Box::new(c))),
            Box::new(Expr::Mul(Box::new(b.clone()), Box::new(b))),
        )
        .simplify()
    }
}

/// `det D²u = f` in Ω, `u = g` on ∂Ω.
#[derive(Clone, Debug, PartialEq)]
pub struct Problem {
    name: String,
    f: Expr,
    g: Expr,
    exact: Option<ExactSolution>,
}

impl Problem {
    pub fn new(name: impl Into<String>, f: Expr, g: Expr) -> Self {
        Problem {
            name: name.into(),
            f,
            g,
            exact: None,
        }
    }

    /// Manufactured problem with `f = det D²u` and `g = u`.
    pub fn manufactured(name: impl Into<String>, u: Expr) -> Result<Self> {
        let exact = ExactSolution::new(u.clone())?;
        Ok(Problem {
            name: name.into(),
            f: exact.monge_ampere(),
            g: u,
            exact: Some(exact),
        })
    }

    pub fn preset(preset: Preset) -> Self {
        let u = Expr::parse(preset.exact_source()).expect("preset source parses");
        Problem::manufactured(preset.name(), u).expect("preset is differentiable")
    }

    /// Attach an exact solution to a problem given by `f` and `g`.
    pub fn with_exact(mut self, u: Expr) -> Result<Self> {
        self.exact = Some(ExactSolution::new(u)?);
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn f(&self, x: f64, y: f64) -> f64 {
        self.f.eval(x, y)
    }

    pub fn g(&self, x: f64, y: f64) -> f64 {
        self.g.eval(x, y)
    }

    pub fn f_expr(&self) -> &Expr {
        &self.f
    }

    pub fn g_expr(&self) -> &Expr {
        &self.g
    }

    pub fn exact(&self) -> Option<&ExactSolution> {
        self.exact.as_ref()
    }

    pub(crate) fn require_exact(&self) -> Result<&ExactSolution> {
        self.exact.as_ref().ok_or_else(|| {
            Error::InvalidArgument(format!("problem {:?} has no exact solution", self.name))
        })
    }
}
