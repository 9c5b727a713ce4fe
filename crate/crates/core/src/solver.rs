//! Nonlinear solvers for the discrete mixed Monge–Ampère system.
//!
//! Every iterate is kept in `Z_h`: `u` carries the boundary data and
//! `σ = H(u)`. The remaining equation is the interior residual
//! `F_i = (det σ − f, φ_i)`.

use std::fmt;
use std::sync::Arc;

use log::{debug, info, warn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fe_space::{interpolate, LagrangeSpace, MatrixField, ScalarField};
use crate::forms::{
    assemble_cofactor_stiffness, assemble_det_load, assemble_load_with, assemble_mixed_operators,
    assemble_newton_jacobian_block, FormQuadrature, MixedOperators,
};
use crate::hessian::{discrete_hessian_stacked, hessian_equation_residual};
use crate::linalg::{gmres, norm2, CholeskyFactor, GmresOptions, SparseMatrix};
use crate::problem::Problem;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    TimeMarching,
    Newton,
}

impl Method {
    pub fn default_max_iterations(self) -> usize {
        match self {
            Method::TimeMarching => 500,
            Method::Newton => 25,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::TimeMarching => "time_marching",
            Method::Newton => "newton",
        })
    }
}

/// Relaxation parameter of the time-marching iteration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Nu {
    /// Estimated from cofactor eigenvalues of the current iterate.
    Auto,
    Fixed(f64),
}

impl Serialize for Nu {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Nu::Auto => s.serialize_str("auto"),
            Nu::Fixed(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for Nu {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Value(f64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Value(v) => Ok(Nu::Fixed(v)),
            Repr::Text(s) if s == "auto" => Ok(Nu::Auto),
            Repr::Text(s) => Err(serde::de::Error::custom(format!(
                "nu must be \"auto\" or a number, got {s:?}"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialGuess {
    /// `I_h u` of the exact solution; needs a manufactured problem.
    InterpolantOfExact,
    /// `(Du⁰, Dv) = −(2√f, v)` with `u⁰ = g_h` on the boundary.
    PoissonSqrtF,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub method: Method,
    pub nu: Nu,
    /// Stop threshold for the `H¹` norm of the update.
    pub tol_increment: f64,
    /// Stop threshold for the Euclidean norm of the interior residual.
    pub tol_residual: f64,
    /// Defaults to 500 for time marching and 25 for Newton.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_iterations: Option<usize>,
    pub initial_guess: InitialGuess,
    pub damping: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            method: Method::Newton,
            nu: Nu::Auto,
            tol_increment: 1e-10,
            tol_residual: 1e-10,
            max_iterations: None,
            initial_guess: InitialGuess::PoissonSqrtF,
            damping: 1.0,
        }
    }
}

impl SolverConfig {
    pub fn newton() -> Self {
        Self::default()
    }

    pub fn time_marching() -> Self {
        Self {
            method: Method::TimeMarching,
            ..Self::default()
        }
    }

    pub fn max_iterations(&self) -> usize {
        self.max_iterations
            .unwrap_or_else(|| self.method.default_max_iterations())
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidArgument(format!(
                    "{name} must be a positive number, got {v}"
                )))
            }
        };
        positive("tol_increment", self.tol_increment)?;
        positive("tol_residual", self.tol_residual)?;
        if let Nu::Fixed(v) = self.nu {
            positive("nu", v)?;
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "damping must lie in (0, 1], got {}",
                self.damping
            )));
        }
        if self.max_iterations == Some(0) {
            return Err(Error::InvalidArgument("max_iterations must be at least 1".into()));
        }
        Ok(())
    }
}

/// The discrete problem on one mesh: operators, data loads and boundary values.
#[derive(Debug)]
pub struct MongeAmpereSystem {
    ops: MixedOperators,
    problem: Problem,
    boundary_values: Vec<f64>,
    f_load: Vec<f64>,
    stiffness_ii: SparseMatrix,
    stiffness_ib: SparseMatrix,
    stiffness_factor: CholeskyFactor,
}

impl MongeAmpereSystem {
    /// Assembles the operators and loads. Rejects `f ≤ 0` at any load quadrature point.
    pub fn new(problem: &Problem, space: &Arc<LagrangeSpace>, quadrature: &FormQuadrature) -> Result<Self> {
        check_positive_data(problem, space, quadrature)?;
        let ops = assemble_mixed_operators(space, quadrature)?;
        let coords = space.dof_coordinates();
        let boundary_values: Vec<f64> = space
            .boundary_dofs()
            .iter()
            .map(|&i| problem.g(coords[i][0], coords[i][1]))
            .collect();
        if let Some(&bad) = boundary_values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("boundary data evaluates to {bad}")));
        }
        let f_load = assemble_load_with(
            &|x, y| problem.f(x, y),
            space,
            &quadrature.load,
            quadrature.threads,
        );
        let interior = space.interior_dofs();
        let stiffness_ii = ops.stiffness.select(interior, interior).with_symmetric(true);
        let stiffness_ib = ops.stiffness.select(interior, space.boundary_dofs());
        let stiffness_factor = CholeskyFactor::new(&stiffness_ii)?;
        Ok(Self {
            ops,
            problem: problem.clone(),
            boundary_values,
            f_load,
            stiffness_ii,
            stiffness_ib,
            stiffness_factor,
        })
    }

    pub fn operators(&self) -> &MixedOperators {
        &self.ops
    }

    pub fn space(&self) -> &Arc<LagrangeSpace> {
        self.ops.space()
    }

    pub fn problem(&self) -> &Problem {
        &self.problem
    }

    /// `g` at the boundary DOFs, in the order of [`LagrangeSpace::boundary_dofs`].
    pub fn boundary_values(&self) -> &[f64] {
        &self.boundary_values
    }

    /// `σ = H(u)`.
    pub fn hessian(&self, u: &ScalarField) -> Result<MatrixField> {
        MatrixField::from_stacked(
            self.space().clone(),
            &discrete_hessian_stacked(u.coefficients(), &self.ops),
        )
    }

    /// `(det σ − f, φ_i)` for interior DOFs `i`.
    pub fn residual_vector(&self, sigma: &MatrixField) -> Vec<f64> {
        let det = assemble_det_load(sigma, self.ops.quadrature());
        self.space()
            .interior_dofs()
            .iter()
            .map(|&i| det[i] - self.f_load[i])
            .collect()
    }

    pub fn residual(&self, sigma: &MatrixField) -> f64 {
        norm2(&self.residual_vector(sigma))
    }

    /// Relative defect of `M σ + (B − G) u = 0`; zero up to round-off on `Z_h`.
    pub fn hessian_defect(&self, u: &ScalarField, sigma: &MatrixField) -> f64 {
        hessian_equation_residual(u.coefficients(), &sigma.stacked(), &self.ops)
    }

    /// Copy of `u` with boundary DOFs set to `g_h`.
    pub fn with_boundary_values(&self, u: &ScalarField) -> ScalarField {
        let mut out = u.clone();
        let c = out.coefficients_mut();
        for (&i, &g) in self.space().boundary_dofs().iter().zip(&self.boundary_values) {
            c[i] = g;
        }
        out
    }

    /// `g_h − u` on boundary DOFs.
    fn boundary_lift(&self, u: &ScalarField) -> Vec<f64> {
        let c = u.coefficients();
        self.space()
            .boundary_dofs()
            .iter()
            .zip(&self.boundary_values)
            .map(|(&i, &g)| g - c[i])
            .collect()
    }

    /// Full update vector from interior values and the boundary lift.
    fn assemble_update(&self, interior: &[f64], lift: &[f64]) -> Vec<f64> {
        let space = self.space();
        let mut d = vec![0.0; space.num_dofs()];
        for (&i, &v) in space.interior_dofs().iter().zip(interior) {
            d[i] = v;
        }
        for (&i, &v) in space.boundary_dofs().iter().zip(lift) {
            d[i] = v;
        }
        d
    }

    /// `u + d` with boundary DOFs set to `g_h` exactly.
    fn apply_update(&self, u: &ScalarField, d: &[f64]) -> Result<ScalarField> {
        let mut c: Vec<f64> = u.coefficients().iter().zip(d).map(|(a, b)| a + b).collect();
        for (&i, &g) in self.space().boundary_dofs().iter().zip(&self.boundary_values) {
            c[i] = g;
        }
        ScalarField::new(self.space().clone(), c)
    }
}

fn check_positive_data(problem: &Problem, space: &Arc<LagrangeSpace>, quadrature: &FormQuadrature) -> Result<()> {
    let rule = &quadrature.load;
    for t in 0..space.mesh().num_triangles() {
        let geo = space.geometry(t);
        for p in &rule.points {
            let [x, y] = geo.map(*p);
            let value = problem.f(x, y);
            if !(value > 0.0) {
                return Err(Error::NonPositiveData { x, y, value });
            }
        }
    }
    Ok(())
}

pub fn initial_guess(config: &SolverConfig, system: &MongeAmpereSystem) -> Result<ScalarField> {
    match config.initial_guess {
        InitialGuess::InterpolantOfExact => {
            let exact = system.problem().require_exact()?;
            let u = interpolate(|x, y| exact.value(x, y), system.space())?;
            Ok(system.with_boundary_values(&u))
        }
        InitialGuess::PoissonSqrtF => poisson_sqrt_f(system),
    }
}

/// Solves `(Du⁰, Dv) = −(2√f, v)` for interior `v`, `u⁰ = g_h` on the boundary.
pub fn poisson_sqrt_f(system: &MongeAmpereSystem) -> Result<ScalarField> {
    let space = system.space();
    let problem = system.problem();
    let q = system.ops.quadrature();
    let load = assemble_load_with(&|x, y| 2.0 * problem.f(x, y).sqrt(), space, &q.load, q.threads);
    let lift = system.stiffness_ib.mul_vec(&system.boundary_values);
    let rhs: Vec<f64> = space
        .interior_dofs()
        .iter()
        .zip(&lift)
        .map(|(&i, l)| -load[i] - l)
        .collect();
    let interior = system.stiffness_factor.solve_refined(&system.stiffness_ii, &rhs)?;
    let mut c = vec![0.0; space.num_dofs()];
    for (&i, v) in space.interior_dofs().iter().zip(interior) {
        c[i] = v;
    }
    let u = ScalarField::new(space.clone(), c)?;
    Ok(system.with_boundary_values(&u))
}

/// Extreme eigenvalues of `cof H(u)` over the cell quadrature points.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CofactorBounds {
    pub min: f64,
    pub max: f64,
    /// Point where the minimum is attained.
    pub argmin: [f64; 2],
}

pub fn cofactor_bounds(u: &ScalarField, ops: &MixedOperators) -> Result<CofactorBounds> {
    bounds_over_cells(u, ops, false)
}

/// [`cofactor_bounds`] restricted to cells with no DOF on the boundary.
///
/// The discrete Hessian is least accurate in the cells touching `∂Ω`, and in
/// corner cells it can lose definiteness even for the interpolant of a convex
/// function.
pub fn interior_cofactor_bounds(u: &ScalarField, ops: &MixedOperators) -> Result<CofactorBounds> {
    bounds_over_cells(u, ops, true)
}

fn bounds_over_cells(u: &ScalarField, ops: &MixedOperators, skip_boundary: bool) -> Result<CofactorBounds> {
    let space = ops.space();
    let sigma = MatrixField::from_stacked(
        space.clone(),
        &discrete_hessian_stacked(u.coefficients(), ops),
    )?;
    let rule = &ops.quadrature().cell;
    let tab = space.reference().tabulate(rule);
    let mut bounds = CofactorBounds {
        min: f64::INFINITY,
        max: f64::NEG_INFINITY,
        argmin: [0.0; 2],
    };
    for t in 0..space.mesh().num_triangles() {
        if skip_boundary && space.cell_dofs(t).iter().any(|&i| space.is_boundary(i)) {
            continue;
        }
        let geo = space.geometry(t);
        for (q, basis) in tab.iter().enumerate() {
            let (lo, hi) = sigma.evaluate_with(t, basis).cof().eig();
            if lo < bounds.min {
                bounds.min = lo;
                bounds.argmin = geo.map(rule.points[q]);
            }
            bounds.max = bounds.max.max(hi);
        }
    }
    if bounds.min > bounds.max {
        return Err(Error::InvalidMesh("no cell away from the boundary".into()));
    }
    Ok(bounds)
}

/// `ν = (m̂ + M̂)/2` from [`cofactor_bounds`]; fails unless `m̂ > 0`.
pub fn estimate_nu(u: &ScalarField, ops: &MixedOperators) -> Result<f64> {
    nu_from_bounds(cofactor_bounds(u, ops)?)
}

/// The relaxation parameter used by `ν = auto`: [`estimate_nu`], falling back
/// to [`interior_cofactor_bounds`] when boundary cells are not convex.
pub fn auto_nu(u: &ScalarField, ops: &MixedOperators) -> Result<f64> {
    match estimate_nu(u, ops) {
        Err(Error::NotConvex { x, y, min_eigenvalue }) => {
            let nu = interior_cofactor_bounds(u, ops).and_then(nu_from_bounds);
            if let Ok(v) = nu {
                warn!(
                    "cofactor eigenvalue {min_eigenvalue:.3e} at ({x:.4}, {y:.4}); nu = {v:.4} from interior cells"
                );
            }
            nu
        }
        other => other,
    }
}

fn nu_from_bounds(b: CofactorBounds) -> Result<f64> {
    if !(b.min > 0.0) {
        return Err(Error::NotConvex {
            x: b.argmin[0],
            y: b.argmin[1],
            min_eigenvalue: b.min,
        });
    }
    Ok(0.5 * (b.min + b.max))
}

/// Outcome of one nonlinear step.
#[derive(Clone, Debug)]
pub struct Step {
    pub u: ScalarField,
    pub sigma: MatrixField,
    /// The coefficient update that was applied.
    pub update: Vec<f64>,
    pub linear_iterations: usize,
}

/// One step of `ν(Du_{r+1}, Dv) = ν(Du_r, Dv) + (det σ_r − f, v)` followed by
/// `σ_{r+1} = H(u_{r+1})`.
pub fn time_marching_step(
    u: &ScalarField,
    sigma: &MatrixField,
    nu: f64,
    system: &MongeAmpereSystem,
) -> Result<Step> {
    if !(nu.is_finite() && nu > 0.0) {
        return Err(Error::InvalidArgument(format!("nu must be positive, got {nu}")));
    }
    let f = system.residual_vector(sigma);
    let lift = system.boundary_lift(u);
    let k_lift = system.stiffness_ib.mul_vec(&lift);
    let rhs: Vec<f64> = f.iter().zip(&k_lift).map(|(fi, kl)| fi / nu - kl).collect();
    let interior = system.stiffness_factor.solve_refined(&system.stiffness_ii, &rhs)?;
    let update = system.assemble_update(&interior, &lift);
    let u_next = system.apply_update(u, &update)?;
    let sigma_next = system.hessian(&u_next)?;
    Ok(Step {
        u: u_next,
        sigma: sigma_next,
        update,
        linear_iterations: 1,
    })
}

/// One damped Newton step for the system linearized at `(u, σ)`.
///
/// The update `δu` solves `(cof σ : H(δu), φ_i) = −F_i` for interior `i`,
/// with the reduced Jacobian applied matrix-free inside GMRES and the
/// divergence-form operator `−(cof σ Dδu, Dφ_i)` as preconditioner.
pub fn newton_step(
    u: &ScalarField,
    sigma: &MatrixField,
    system: &MongeAmpereSystem,
    damping: f64,
) -> Result<Step> {
    if !(damping > 0.0 && damping <= 1.0) {
        return Err(Error::InvalidArgument(format!("damping must lie in (0, 1], got {damping}")));
    }
    let space = system.space();
    let ops = &system.ops;
    let q = ops.quadrature();
    let interior = space.interior_dofs();
    let n = space.num_dofs();

    let c_full = assemble_newton_jacobian_block(sigma, q);
    let all: Vec<usize> = (0..3 * n).collect();
    let c = c_full.select(interior, &all);

    // δσ = H(δu) + (H(u) − σ); the second term vanishes on Z_h
    let lift = system.boundary_lift(u);
    let d0 = system.assemble_update(&vec![0.0; interior.len()], &lift);
    let mut sigma_offset = discrete_hessian_stacked(&d0, ops);
    let h_u = discrete_hessian_stacked(u.coefficients(), ops);
    for ((s, h), cur) in sigma_offset.iter_mut().zip(&h_u).zip(sigma.stacked()) {
        *s += h - cur;
    }
    let f = system.residual_vector(sigma);
    let c_off = c.mul_vec(&sigma_offset);
    let rhs: Vec<f64> = f.iter().zip(&c_off).map(|(fi, ci)| -fi - ci).collect();

    let apply = |x: &[f64]| -> Vec<f64> {
        let mut full = vec![0.0; n];
        for (&i, &v) in interior.iter().zip(x) {
            full[i] = v;
        }
        c.mul_vec(&discrete_hessian_stacked(&full, ops))
    };

    let a = assemble_cofactor_stiffness(sigma, q)
        .select(interior, interior)
        .with_symmetric(true);
    let cof_factor = match CholeskyFactor::new(&a) {
        Ok(factor) => Some(factor),
        Err(e) => {
            warn!("cofactor stiffness not positive definite ({e}); preconditioning with the Laplacian");
            None
        }
    };
    let precondition = |r: &[f64]| -> Vec<f64> {
        let z = match &cof_factor {
            Some(factor) => factor.solve(r),
            None => system.stiffness_factor.solve(r),
        };
        z.into_iter().map(|v| -v).collect()
    };

    let options = GmresOptions {
        rel_tol: 1e-12,
        abs_tol: 1e-15 * (1.0 + norm2(&system.f_load)),
        restart: 80,
        max_iterations: 800,
    };
    let (delta, stats) = gmres(apply, precondition, &rhs, options).map_err(|e| match e {
        Error::NoConvergence { iterations, residual, .. } => Error::SingularJacobian(format!(
            "GMRES stalled at relative residual {residual:.3e} after {iterations} iterations"
        )),
        Error::Singular { .. } => Error::SingularJacobian("Krylov basis broke down".into()),
        other => other,
    })?;
    debug!(
        "newton linear solve: {} GMRES iterations, relative residual {:.3e}",
        stats.iterations, stats.relative_residual
    );

    let scaled: Vec<f64> = delta.iter().map(|d| damping * d).collect();
    let update = system.assemble_update(&scaled, &lift);
    let u_next = system.apply_update(u, &update)?;
    let sigma_next = system.hessian(&u_next)?;
    Ok(Step {
        u: u_next,
        sigma: sigma_next,
        update,
        linear_iterations: stats.iterations,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Residual of the new iterate.
    pub residual: f64,
    /// `H¹` norm of the applied update.
    pub increment: f64,
    /// Relaxation parameter used by this step (time marching only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
    pub linear_iterations: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    MaxIterations,
    Diverged,
}

#[derive(Clone, Debug)]
pub struct SolveResult {
    pub u: ScalarField,
    pub sigma: MatrixField,
    pub iterations: usize,
    pub initial_residual: f64,
    pub residual_history: Vec<f64>,
    pub increment_history: Vec<f64>,
    pub records: Vec<IterationRecord>,
    pub converged: bool,
    pub termination: Termination,
    /// Last relaxation parameter used by time marching.
    pub nu: Option<f64>,
}

impl SolveResult {
    pub fn final_residual(&self) -> f64 {
        self.residual_history.last().copied().unwrap_or(self.initial_residual)
    }
}

/// Steps of growth beyond the divergence threshold tolerated before aborting.
const DIVERGENCE_STREAK: usize = 5;
const DIVERGENCE_FACTOR: f64 = 10.0;
const NU_REFRESH: usize = 25;

/// Assembles the system with default quadrature, builds the configured
/// initial guess and iterates.
pub fn solve(problem: &Problem, space: &Arc<LagrangeSpace>, config: &SolverConfig) -> Result<SolveResult> {
    config.validate()?;
    let system = MongeAmpereSystem::new(problem, space, &FormQuadrature::for_degree(space.degree())?)?;
    let u0 = initial_guess(config, &system)?;
    solve_from(&system, config, u0, |_| {})
}

/// Iterates from `u0` (its boundary values are replaced by `g_h`), reporting
/// every step to `observer`.
pub fn solve_from<O>(
    system: &MongeAmpereSystem,
    config: &SolverConfig,
    u0: ScalarField,
    mut observer: O,
) -> Result<SolveResult>
where
    O: FnMut(&IterationRecord),
{
    config.validate()?;
    let ops = system.operators();
    let mut u = system.with_boundary_values(&u0);
    let mut sigma = system.hessian(&u)?;
    let initial_residual = system.residual(&sigma);
    let max_iterations = config.max_iterations();

    let mut nu = match (config.method, config.nu) {
        (Method::TimeMarching, Nu::Auto) => Some(auto_nu(&u, ops)?),
        (Method::TimeMarching, Nu::Fixed(v)) => Some(v),
        (Method::Newton, _) => None,
    };
    info!(
        "solving {} with {} (dofs {}, initial residual {:.3e})",
        system.problem().name(),
        config.method,
        system.space().num_dofs(),
        initial_residual
    );

    let mut residual_history = Vec::new();
    let mut increment_history = Vec::new();
    let mut records = Vec::new();
    let mut best = (initial_residual, u.clone(), sigma.clone());
    let mut min_increment = f64::INFINITY;
    let mut streak = 0;
    let mut termination = Termination::MaxIterations;

    for it in 1..=max_iterations {
        if let (Method::TimeMarching, Nu::Auto) = (config.method, config.nu) {
            if it > 1 && (it - 1) % NU_REFRESH == 0 {
                match auto_nu(&u, ops) {
                    Ok(v) => nu = Some(v),
                    Err(e) => warn!("keeping nu = {:?}: {e}", nu),
                }
            }
        }
        let step = match config.method {
            Method::TimeMarching => {
                time_marching_step(&u, &sigma, nu.expect("time marching has nu"), system)?
            }
            Method::Newton => newton_step(&u, &sigma, system, config.damping)?,
        };
        let increment = ops.h1_norm(&step.update);
        let residual = system.residual(&step.sigma);
        let record = IterationRecord {
            iteration: it,
            residual,
            increment,
            nu,
            linear_iterations: step.linear_iterations,
        };
        debug!(
            "iteration {it}: residual {residual:.3e}, increment {increment:.3e}"
        );
        observer(&record);
        records.push(record);
        residual_history.push(residual);
        increment_history.push(increment);
        u = step.u;
        sigma = step.sigma;

        if !(residual.is_finite() && increment.is_finite()) {
            warn!("iteration {it} produced a non-finite iterate");
            termination = Termination::Diverged;
            break;
        }
        if residual < best.0 {
            best = (residual, u.clone(), sigma.clone());
        }
        if increment <= config.tol_increment && residual <= config.tol_residual {
            termination = Termination::Converged;
            break;
        }
        if increment > DIVERGENCE_FACTOR * min_increment {
            streak += 1;
            if streak >= DIVERGENCE_STREAK {
                warn!(
                    "aborting after iteration {it}: increment {increment:.3e} exceeds {DIVERGENCE_FACTOR}x the smallest increment {min_increment:.3e} for {DIVERGENCE_STREAK} steps"
                );
                termination = Termination::Diverged;
                break;
            }
        } else {
            streak = 0;
        }
        min_increment = min_increment.min(increment);
    }

    let converged = termination == Termination::Converged;
    if !converged {
        u = best.1;
        sigma = best.2;
        warn!(
            "no convergence after {} iterations ({:?}); returning the iterate with residual {:.3e}",
            records.len(),
            termination,
            best.0
        );
    } else {
        info!("converged in {} iterations", records.len());
    }
    Ok(SolveResult {
        u,
        sigma,
        iterations: records.len(),
        initial_residual,
        residual_history,
        increment_history,
        records,
        converged,
        termination,
        nu,
    })
}
