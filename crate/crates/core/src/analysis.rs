//! Error norms, observed convergence rates and convergence studies.

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fe_space::{interpolate, interpolate_matrix, LagrangeSpace, MatrixField, ScalarField};
use crate::forms::FormQuadrature;
use crate::hessian::discrete_hessian_stacked;
use crate::linalg::Sym2x2;
use crate::mesh::{build_structured_mesh, Domain};
use crate::problem::{ExactSolution, Problem};
use crate::quadrature::{make_quadrature, QuadratureRule};
use crate::solver::{initial_guess, solve_from, MongeAmpereSystem, SolverConfig};

/// Errors below this value carry no rate information.
pub const ERROR_FLOOR: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Norm {
    L2,
    H1Semi,
    H1,
    Linf,
    /// Element-wise `H²` norm summed over the triangulation.
    BrokenH2,
}

impl Norm {
    pub fn name(self) -> &'static str {
        match self {
            Norm::L2 => "l2",
            Norm::H1Semi => "h1_semi",
            Norm::H1 => "h1",
            Norm::Linf => "linf",
            Norm::BrokenH2 => "broken_h2",
        }
    }
}

impl fmt::Display for Norm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Norm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Norm> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "l2" => Norm::L2,
            "h1_semi" | "h1semi" => Norm::H1Semi,
            "h1" => Norm::H1,
            "linf" => Norm::Linf,
            "broken_h2" | "brokenh2" => Norm::BrokenH2,
            _ => return Err(Error::InvalidArgument(format!("unknown norm {s:?}"))),
        })
    }
}

/// Quadrature used for error measurement: exactness `2k + 6`.
pub fn error_quadrature(degree: usize) -> Result<QuadratureRule> {
    make_quadrature(2 * degree + 6)
}

/// `‖u_h − u‖` in the requested norm, integrated with `rule`.
pub fn error_norm(field: &ScalarField, exact: &ExactSolution, norm: Norm, rule: &QuadratureRule) -> f64 {
    let space = field.space();
    let tab = space.reference().tabulate(rule);
    let (mut l2, mut semi, mut second, mut sup) = (0.0, 0.0, 0.0, 0.0f64);
    for t in 0..space.mesh().num_triangles() {
        let geo = space.geometry(t);
        for (q, basis) in tab.iter().enumerate() {
            let [x, y] = geo.map(rule.points[q]);
            let w = rule.weights[q] * geo.area;
            let uh = field.evaluate_with(t, basis);
            let e = uh.value - exact.value(x, y);
            sup = sup.max(e.abs());
            l2 += w * e * e;
            if matches!(norm, Norm::H1Semi | Norm::H1 | Norm::BrokenH2) {
                let g = exact.gradient(x, y);
                let (ex, ey) = (uh.gradient[0] - g[0], uh.gradient[1] - g[1]);
                semi += w * (ex * ex + ey * ey);
            }
            if norm == Norm::BrokenH2 {
                second += w * {
                    let d = uh.hessian - exact.hessian(x, y);
                    d.frobenius(&d)
                };
            }
        }
    }
    match norm {
        Norm::L2 => l2.sqrt(),
        Norm::H1Semi => semi.sqrt(),
        Norm::H1 => (l2 + semi).sqrt(),
        Norm::Linf => sup,
        Norm::BrokenH2 => (l2 + semi + second).sqrt(),
    }
}

/// `‖η_h − η‖` for a matrix field in the Frobenius norm. Only `L2` and `Linf`
/// are available; derivative norms of matrix fields are measured on discrete
/// differences with [`broken_h1_norm`].
pub fn matrix_error_norm<F>(field: &MatrixField, exact: F, norm: Norm, rule: &QuadratureRule) -> Result<f64>
where
    F: Fn(f64, f64) -> Sym2x2,
{
    if !matches!(norm, Norm::L2 | Norm::Linf) {
        return Err(Error::InvalidArgument(format!(
            "norm {norm} needs derivatives of the exact matrix field"
        )));
    }
    let space = field.space();
    let tab = space.reference().tabulate(rule);
    let (mut l2, mut sup) = (0.0, 0.0f64);
    for t in 0..space.mesh().num_triangles() {
        let geo = space.geometry(t);
        for (q, basis) in tab.iter().enumerate() {
            let [x, y] = geo.map(rule.points[q]);
            let e = field.evaluate_with(t, basis) - exact(x, y);
            l2 += rule.weights[q] * geo.area * e.frobenius(&e);
            sup = sup.max(e.frobenius_norm());
        }
    }
    Ok(if norm == Norm::L2 { l2.sqrt() } else { sup })
}

/// Element-wise `H¹` norm of a discrete matrix field.
pub fn broken_h1_norm(field: &MatrixField, rule: &QuadratureRule) -> f64 {
    let space = field.space();
    let tab = space.reference().tabulate(rule);
    let weights = crate::forms::COMPONENT_WEIGHTS;
    let mut total = 0.0;
    for t in 0..space.mesh().num_triangles() {
        let geo = space.geometry(t);
        for (q, basis) in tab.iter().enumerate() {
            let w = rule.weights[q] * geo.area;
            let v = field.evaluate_with(t, basis);
            let g = field.gradients_with(t, basis);
            total += w * v.frobenius(&v);
            for c in 0..3 {
                total += w * weights[c] * (g[c][0] * g[c][0] + g[c][1] * g[c][1]);
            }
        }
    }
    total.sqrt()
}

/// Pairwise and least-squares rates of an error sequence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateSummary {
    /// `log(e_i / e_{i+1}) / log(h_i / h_{i+1})`; `None` when either error is at floor.
    pub pairs: Vec<Option<f64>>,
    /// Least-squares slope of `log e` against `log h`; needs three usable levels.
    pub fit: Option<f64>,
    /// Errors below the floor, excluded from all rates.
    pub at_floor: Vec<bool>,
}

pub fn observed_rate(errors: &[f64], hs: &[f64]) -> Result<RateSummary> {
    observed_rate_with_floor(errors, hs, ERROR_FLOOR)
}

/// [`observed_rate`] with a custom floor.
pub fn observed_rate_with_floor(errors: &[f64], hs: &[f64], floor: f64) -> Result<RateSummary> {
    if errors.len() != hs.len() || errors.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least two (error, h) pairs of equal length, got {} errors and {} mesh sizes",
            errors.len(),
            hs.len()
        )));
    }
    if hs.iter().any(|h| !(h.is_finite() && *h > 0.0)) || hs.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidArgument("mesh sizes must be positive and strictly decreasing".into()));
    }
    if let Some(e) = errors.iter().find(|e| !(e.is_finite() && **e >= 0.0)) {
        return Err(Error::InvalidArgument(format!("error values must be nonnegative, got {e}")));
    }
    let at_floor: Vec<bool> = errors.iter().map(|&e| e < floor).collect();
    let pairs = (0..errors.len() - 1)
        .map(|i| {
            if at_floor[i] || at_floor[i + 1] {
                None
            } else {
                Some((errors[i] / errors[i + 1]).ln() / (hs[i] / hs[i + 1]).ln())
            }
        })
        .collect();
    let pts: Vec<(f64, f64)> = errors
        .iter()
        .zip(hs)
        .zip(&at_floor)
        .filter(|(_, floor)| !**floor)
        .map(|((e, h), _)| (h.ln(), e.ln()))
        .collect();
    let fit = (pts.len() >= 3).then(|| {
        let m = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
        sxy / sxx
    });
    Ok(RateSummary { pairs, fit, at_floor })
}

/// One mesh level of a convergence study.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelRecord {
    pub n: usize,
    pub h: f64,
    /// DOFs of `V_h`; `Σ_h` has three times as many.
    pub dofs: usize,
    /// `‖u_h − I_h u‖_{H¹}`
    pub err_u_h1_interp: f64,
    /// `‖u_h − u‖_{L²}`
    pub err_u_l2: f64,
    /// `‖σ_h − I_h σ‖_{L²}`
    pub err_sigma_l2_interp: f64,
    /// `‖σ_h − σ‖_{L²}`
    pub err_sigma_l2: f64,
    /// `‖σ_h − I_h σ‖` in the broken `H¹` norm.
    pub err_sigma_h1_broken: f64,
    /// `‖H(I_h u) − I_h σ‖_{L²}`
    pub err_hessian_of_interp: f64,
    pub iterations: usize,
    pub converged: bool,
    pub wall_time_s: f64,
}

/// Names of the error columns, in report order.
pub const ERROR_COLUMNS: [&str; 6] = [
    "err_u_h1_interp",
    "err_u_l2",
    "err_sigma_l2_interp",
    "err_sigma_l2",
    "err_sigma_h1_broken",
    "err_hessian_of_interp",
];

impl LevelRecord {
    pub fn errors(&self) -> [f64; 6] {
        [
            self.err_u_h1_interp,
            self.err_u_l2,
            self.err_sigma_l2_interp,
            self.err_sigma_l2,
            self.err_sigma_h1_broken,
            self.err_hessian_of_interp,
        ]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnRates {
    pub column: String,
    #[serde(flatten)]
    pub rates: RateSummary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub problem: String,
    pub degree: usize,
    /// Errors below this value are reported as at floor.
    pub floor: f64,
    pub levels: Vec<LevelRecord>,
    /// One entry per error column; pair rates exist only between levels whose `n` doubles.
    pub rates: Vec<ColumnRates>,
    /// `false` when a level failed to converge; `levels` then stops before it.
    pub complete: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

impl ConvergenceReport {
    pub fn rates_for(&self, column: &str) -> Option<&RateSummary> {
        self.rates.iter().find(|r| r.column == column).map(|r| &r.rates)
    }

    fn compute_rates(levels: &[LevelRecord], floor: f64) -> Vec<ColumnRates> {
        if levels.len() < 2 {
            return Vec::new();
        }
        let hs: Vec<f64> = levels.iter().map(|l| l.h).collect();
        ERROR_COLUMNS
            .iter()
            .enumerate()
            .filter_map(|(c, name)| {
                let errors: Vec<f64> = levels.iter().map(|l| l.errors()[c]).collect();
                let mut rates = observed_rate_with_floor(&errors, &hs, floor).ok()?;
                for (i, p) in rates.pairs.iter_mut().enumerate() {
                    if levels[i + 1].n != 2 * levels[i].n {
                        *p = None;
                    }
                }
                Some(ColumnRates {
                    column: name.to_string(),
                    rates,
                })
            })
            .collect()
    }

    /// CSV with one row per level. Wall time is left out so that the file
    /// only depends on the computation; it is kept in the JSON form.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["n".to_string(), "h".into(), "dofs".into(), "iterations".into(), "converged".into()];
        header.extend(ERROR_COLUMNS.iter().map(|c| c.to_string()));
        header.extend(ERROR_COLUMNS.iter().map(|c| format!("rate_{c}")));
        w.write_record(&header)?;
        for (i, l) in self.levels.iter().enumerate() {
            let mut row = vec![
                l.n.to_string(),
                num(l.h),
                l.dofs.to_string(),
                l.iterations.to_string(),
                l.converged.to_string(),
            ];
            row.extend(l.errors().iter().map(|&e| num(e)));
            for c in ERROR_COLUMNS {
                let cell = match self.rates_for(c) {
                    Some(r) if r.at_floor[i] => "at_floor".to_string(),
                    Some(r) if i > 0 => r.pairs[i - 1].map(num).unwrap_or_default(),
                    _ => String::new(),
                };
                row.push(cell);
            }
            w.write_record(&row)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Shortest representation that reads back to the same value.
fn num(v: f64) -> String {
    format!("{v:?}")
}

/// Mesh family and discretization of a study.
#[derive(Clone, Debug, PartialEq)]
pub struct StudyOptions {
    pub domain: Domain,
    /// Subdivisions per level, increasing.
    pub levels: Vec<usize>,
    pub degree: usize,
    /// Levels solved concurrently; results do not depend on it.
    pub threads: usize,
}

fn run_level(problem: &Problem, options: &StudyOptions, config: &SolverConfig, n: usize) -> Result<LevelRecord> {
    let exact = problem.require_exact()?;
    let start = Instant::now();
    let mesh = Arc::new(build_structured_mesh(n, &options.domain)?);
    let space = LagrangeSpace::new(mesh.clone(), options.degree)?;
    let system = MongeAmpereSystem::new(problem, &space, &FormQuadrature::for_degree(options.degree)?)?;
    let u0 = initial_guess(config, &system)?;
    let result = solve_from(&system, config, u0, |_| {})?;
    let wall_time_s = start.elapsed().as_secs_f64();

    let ops = system.operators();
    let rule = error_quadrature(options.degree)?;
    let iu = interpolate(|x, y| exact.value(x, y), &space)?;
    let isigma = interpolate_matrix(|x, y| exact.hessian(x, y), &space)?.stacked();
    let du: Vec<f64> = result.u.coefficients().iter().zip(iu.coefficients()).map(|(a, b)| a - b).collect();
    let dsigma: Vec<f64> = result.sigma.stacked().iter().zip(&isigma).map(|(a, b)| a - b).collect();
    let h_iu = discrete_hessian_stacked(iu.coefficients(), ops);
    let dh: Vec<f64> = h_iu.iter().zip(&isigma).map(|(a, b)| a - b).collect();

    let record = LevelRecord {
        n,
        h: mesh.h,
        dofs: space.num_dofs(),
        err_u_h1_interp: ops.h1_norm(&du),
        err_u_l2: error_norm(&result.u, exact, Norm::L2, &rule),
        err_sigma_l2_interp: ops.sigma_l2_norm(&dsigma),
        err_sigma_l2: matrix_error_norm(&result.sigma, |x, y| exact.hessian(x, y), Norm::L2, &rule)?,
        err_sigma_h1_broken: broken_h1_norm(&MatrixField::from_stacked(space.clone(), &dsigma)?, &rule),
        err_hessian_of_interp: ops.sigma_l2_norm(&dh),
        iterations: result.iterations,
        converged: result.converged,
        wall_time_s,
    };
    info!(
        "level n = {n}: {} iterations, |u_h - I_h u|_H1 = {:.3e}, |sigma_h - I_h sigma|_L2 = {:.3e}",
        record.iterations, record.err_u_h1_interp, record.err_sigma_l2_interp
    );
    Ok(record)
}

/// Solves `problem` on every level with a shared configuration and collects errors and rates.
///
/// A level that fails to converge ends the study: the report keeps the
/// levels before it and is marked incomplete.
pub fn run_convergence_study(
    problem: &Problem,
    options: &StudyOptions,
    config: &SolverConfig,
) -> Result<ConvergenceReport> {
    config.validate()?;
    problem.require_exact()?;
    if options.levels.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "a study needs at least 3 levels, got {}",
            options.levels.len()
        )));
    }
    if options.levels.windows(2).any(|w| w[1] <= w[0]) || options.levels[0] == 0 {
        return Err(Error::InvalidArgument("levels must be positive and increasing".into()));
    }
    if options.degree < 2 {
        return Err(Error::InvalidArgument(format!(
            "degree must be at least 2, got {}",
            options.degree
        )));
    }
    options.domain.validate()?;

    let count = options.levels.len();
    let slots: Vec<Mutex<Option<Result<LevelRecord>>>> = (0..count).map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = options.threads.clamp(1, count);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= count {
                    break;
                }
                let r = run_level(problem, options, config, options.levels[i]);
                *slots[i].lock().expect("level slot") = Some(r);
            });
        }
    });

    let mut levels = Vec::with_capacity(count);
    let mut failure = None;
    for (slot, &n) in slots.into_iter().zip(&options.levels) {
        let r = slot.into_inner().expect("level slot").expect("every level ran");
        match r {
            Ok(rec) if rec.converged => levels.push(rec),
            Ok(rec) => {
                failure = Some(format!("level n = {n} did not converge in {} iterations", rec.iterations));
                break;
            }
            Err(e) => {
                failure = Some(format!("level n = {n}: {e}"));
                break;
            }
        }
    }
    if let Some(f) = &failure {
        warn!("study aborted: {f}");
    }
    // u_h is only resolved to the solver tolerance
    let floor = ERROR_FLOOR.max(config.tol_increment);
    Ok(ConvergenceReport {
        problem: problem.name().to_string(),
        degree: options.degree,
        floor,
        rates: ConvergenceReport::compute_rates(&levels, floor),
        levels,
        complete: failure.is_none(),
        failure,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Expr;
    use crate::problem::Preset;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn space(n: usize, k: usize) -> Arc<LagrangeSpace> {
        let mesh = Arc::new(build_structured_mesh(n, &Domain::UnitSquare).unwrap());
        LagrangeSpace::new(mesh, k).unwrap()
    }

    fn exact(src: &str) -> ExactSolution {
        ExactSolution::new(Expr::parse(src).unwrap()).unwrap()
    }

    #[test]
    fn norms_of_x() {
        let s = space(4, 2);
        let rule = error_quadrature(2).unwrap();
        let zero = exact("0");
        let v = interpolate(|x, _| x, &s).unwrap();
        assert!((error_norm(&v, &zero, Norm::H1Semi, &rule) - 1.0).abs() < 1e-13);
        assert!((error_norm(&v, &zero, Norm::L2, &rule) - (1.0f64 / 3.0).sqrt()).abs() < 1e-13);
        assert!((error_norm(&v, &zero, Norm::H1, &rule) - (4.0f64 / 3.0).sqrt()).abs() < 1e-13);
        assert!((error_norm(&v, &zero, Norm::BrokenH2, &rule) - (4.0f64 / 3.0).sqrt()).abs() < 1e-13);
        assert!(error_norm(&v, &zero, Norm::Linf, &rule) <= 1.0);
    }

    #[test]
    fn interpolants_of_polynomials_are_exact() {
        let rule = error_quadrature(3).unwrap();
        let s = space(3, 3);
        let u = exact("x^3 - 2 * x * y^2 + y + 1");
        let iu = interpolate(|x, y| u.value(x, y), &s).unwrap();
        for norm in [Norm::L2, Norm::H1Semi, Norm::H1, Norm::Linf, Norm::BrokenH2] {
            assert!(error_norm(&iu, &u, norm, &rule) <= 1e-12, "{norm}");
        }
        let sig = interpolate_matrix(|x, y| u.hessian(x, y), &s).unwrap();
        assert!(matrix_error_norm(&sig, |x, y| u.hessian(x, y), Norm::L2, &rule).unwrap() <= 1e-12);
        assert!(matrix_error_norm(&sig, |x, y| u.hessian(x, y), Norm::H1, &rule).is_err());
    }

    #[test]
    fn norm_tags() {
        for n in [Norm::L2, Norm::H1Semi, Norm::H1, Norm::Linf, Norm::BrokenH2] {
            assert_eq!(n.name().parse::<Norm>().unwrap(), n);
        }
        assert!("w1p".parse::<Norm>().is_err());
    }

    #[test]
    fn triangle_inequality_on_random_fields() {
        let s = space(3, 2);
        let rule = error_quadrature(2).unwrap();
        let zero = exact("0");
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let mut a = ScalarField::zeros(s.clone());
            let mut b = ScalarField::zeros(s.clone());
            a.coefficients_mut().iter_mut().for_each(|c| *c = rng.gen_range(-1.0..1.0));
            b.coefficients_mut().iter_mut().for_each(|c| *c = rng.gen_range(-1.0..1.0));
            let sum = a.axpy(1.0, &b);
            for norm in [Norm::L2, Norm::H1Semi, Norm::H1, Norm::Linf, Norm::BrokenH2] {
                let lhs = error_norm(&sum, &zero, norm, &rule);
                let rhs = error_norm(&a, &zero, norm, &rule) + error_norm(&b, &zero, norm, &rule);
                assert!(lhs <= rhs + 1e-12, "{norm}");
            }
        }
    }

    #[test]
    fn interpolation_error_rate_for_exponential() {
        let u = Problem::preset(Preset::Exponential).exact().unwrap().clone();
        let rule = error_quadrature(2).unwrap();
        let (mut errs, mut hs) = (vec![], vec![]);
        for n in [4, 8, 16, 32] {
            let s = space(n, 2);
            let iu = interpolate(|x, y| u.value(x, y), &s).unwrap();
            errs.push(error_norm(&iu, &u, Norm::H1, &rule));
            hs.push(s.mesh().h);
        }
        let r = observed_rate(&errs, &hs).unwrap();
        assert!(r.fit.unwrap() >= 2.0 - 0.1, "{r:?}");
    }

    #[test]
    fn rates() {
        let r = observed_rate(&[0.4, 0.1], &[0.2, 0.1]).unwrap();
        assert!((r.pairs[0].unwrap() - 2.0).abs() < 1e-14);
        assert_eq!(r.fit, None);
        let r = observed_rate(&[8e-3, 1e-3, 1.25e-4], &[0.25, 0.125, 0.0625]).unwrap();
        for p in &r.pairs {
            assert!((p.unwrap() - 3.0).abs() < 1e-12);
        }
        assert!((r.fit.unwrap() - 3.0).abs() < 1e-12);
        let r = observed_rate(&[0.3, 0.3, 0.3], &[0.25, 0.125, 0.0625]).unwrap();
        assert_eq!(r.pairs, vec![Some(0.0), Some(0.0)]);
        assert_eq!(r.fit, Some(0.0));
    }

    #[test]
    fn rates_flag_floor_and_reject_bad_input() {
        let r = observed_rate(&[1e-3, 1e-15, 0.0], &[0.4, 0.2, 0.1]).unwrap();
        assert_eq!(r.at_floor, vec![false, true, true]);
        assert_eq!(r.pairs, vec![None, None]);
        assert!(observed_rate(&[-1.0, 1.0], &[0.2, 0.1]).is_err());
        assert!(observed_rate(&[1.0, 1.0], &[0.1, 0.2]).is_err());
        assert!(observed_rate(&[1.0], &[0.1]).is_err());
    }

    #[test]
    fn rates_are_scale_invariant() {
        let errs = [3.1e-2, 8.3e-3, 2.2e-3, 5.4e-4];
        let hs = [0.5, 0.25, 0.125, 0.0625];
        let base = observed_rate(&errs, &hs).unwrap();
        let scaled: Vec<f64> = errs.iter().map(|e| e * 4.0).collect();
        assert_eq!(observed_rate(&scaled, &hs).unwrap(), base);
    }

    #[test]
    fn quadratic_study_sits_at_floor() {
        let p = Problem::preset(Preset::Quadratic);
        let options = StudyOptions {
            domain: Domain::UnitSquare,
            levels: vec![2, 4, 8],
            degree: 2,
            threads: 2,
        };
        let report = run_convergence_study(&p, &options, &SolverConfig::newton()).unwrap();
        assert!(report.complete);
        for l in &report.levels {
            assert!(l.errors().iter().all(|&e| e < report.floor));
        }
        for c in ERROR_COLUMNS {
            let r = report.rates_for(c).unwrap();
            assert!(r.at_floor.iter().all(|f| *f));
            assert_eq!(r.fit, None);
        }
        assert!(report.to_csv().unwrap().contains("at_floor"));
    }

    #[test]
    fn study_rejects_short_level_lists() {
        let p = Problem::preset(Preset::Quadratic);
        let options = StudyOptions {
            domain: Domain::UnitSquare,
            levels: vec![2, 4],
            degree: 2,
            threads: 1,
        };
        assert!(run_convergence_study(&p, &options, &SolverConfig::newton()).is_err());
    }

    #[test]
    fn study_is_thread_count_independent() {
        let p = Problem::preset(Preset::Exponential);
        let mk = |threads| StudyOptions {
            domain: Domain::UnitSquare,
            levels: vec![2, 4, 8],
            degree: 2,
            threads,
        };
        let a = run_convergence_study(&p, &mk(1), &SolverConfig::newton()).unwrap();
        let b = run_convergence_study(&p, &mk(3), &SolverConfig::newton()).unwrap();
        assert_eq!(a.to_csv().unwrap(), b.to_csv().unwrap());
        let csv = a.to_csv().unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[0].starts_with("n,h,dofs,iterations,converged,err_u_h1_interp"));
        let json: serde_json::Value = serde_json::from_str(&a.to_json().unwrap()).unwrap();
        assert_eq!(json["levels"].as_array().unwrap().len(), 3);
    }
}
