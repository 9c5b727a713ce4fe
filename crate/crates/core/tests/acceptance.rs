//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::sync::Arc;
use std::time::{Duration, Instant};

use monge_mixed::analysis::{run_convergence_study, ConvergenceReport, StudyOptions};
use monge_mixed::fe_space::{interpolate, interpolate_matrix, LagrangeSpace, MatrixField, ScalarField};
use monge_mixed::forms::{
    assemble_det_load, assemble_mixed_operators, assemble_newton_jacobian_block, identity_embedding,
    FormQuadrature, MixedOperators,
};
use monge_mixed::hessian::{discrete_hessian, trace_identity_residual};
use monge_mixed::linalg::{dot, Sym2x2};
use monge_mixed::mesh::{build_structured_mesh, Domain};
use monge_mixed::problem::{Preset, Problem};
use monge_mixed::solver::{solve_from, InitialGuess, Method, MongeAmpereSystem, Nu, SolverConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn system(preset: Preset, n: usize) -> Result<MongeAmpereSystem, String> {
    let mesh = Arc::new(build_structured_mesh(n, &Domain::UnitSquare).map_err(err)?);
    let space = LagrangeSpace::new(mesh, 2).map_err(err)?;
    MongeAmpereSystem::new(&Problem::preset(preset), &space, &FormQuadrature::for_degree(2).map_err(err)?)
        .map_err(err)
}

fn interpolant(sys: &MongeAmpereSystem) -> Result<(ScalarField, MatrixField), String> {
    let exact = sys.problem().exact().ok_or("preset without exact solution")?;
    let u = interpolate(|x, y| exact.value(x, y), sys.space()).map_err(err)?;
    let sigma = interpolate_matrix(|x, y| exact.hessian(x, y), sys.space()).map_err(err)?;
    Ok((u, sigma))
}

/// `u + amplitude sin(aπx) sin(bπy)`, interpolated.
fn perturbed(u: &ScalarField, amplitude: f64, (a, b): (f64, f64)) -> Result<ScalarField, String> {
    use std::f64::consts::PI;
    let bump = interpolate(|x, y| (a * PI * x).sin() * (b * PI * y).sin(), u.space()).map_err(err)?;
    Ok(u.axpy(amplitude, &bump))
}

fn difference(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn quadratic_exactness() -> Outcome {
    let start = Instant::now();
    let sys = system(Preset::Quadratic, 8)?;
    let (iu, isigma) = interpolant(&sys)?;
    let u0 = perturbed(&iu, 1e-2, (1.0, 1.0))?;
    let result = solve_from(&sys, &SolverConfig::newton(), u0, |_| {}).map_err(err)?;
    let ops = sys.operators();
    let eu = ops.h1_norm(&difference(result.u.coefficients(), iu.coefficients()));
    let es = ops.sigma_l2_norm(&difference(&result.sigma.stacked(), &isigma.stacked()));
    let elapsed = start.elapsed();
    check(
        result.converged && eu <= 1e-9 && es <= 1e-9 && elapsed < Duration::from_secs(5),
        format!(
            "converged {} in {} iterations, |u_h - I_h u|_H1 = {eu:.2e}, |sigma_h - I_h sigma|_L2 = {es:.2e}, {:.2}s",
            result.converged,
            result.iterations,
            elapsed.as_secs_f64()
        ),
    )
}

fn exponential_study() -> Result<(ConvergenceReport, Duration), String> {
    let start = Instant::now();
    let options = StudyOptions {
        domain: Domain::UnitSquare,
        levels: vec![8, 16, 32, 64],
        degree: 2,
        threads: 1,
    };
    let report = run_convergence_study(&Problem::preset(Preset::Exponential), &options, &SolverConfig::default())
        .map_err(err)?;
    Ok((report, start.elapsed()))
}

fn fit(report: &ConvergenceReport, column: &str) -> f64 {
    report.rates_for(column).and_then(|r| r.fit).unwrap_or(f64::NAN)
}

fn convergence_rates(report: &ConvergenceReport, elapsed: Duration) -> Outcome {
    let ru = fit(report, "err_u_h1_interp");
    let rs = fit(report, "err_sigma_l2_interp");
    check(
        report.complete && ru >= 1.7 && rs >= 0.8 && elapsed < Duration::from_secs(300),
        format!(
            "rate |u_h - I_h u|_H1 = {ru:.3} (>= 1.7), rate |sigma_h - I_h sigma|_L2 = {rs:.3} (>= 0.8), {:.1}s",
            elapsed.as_secs_f64()
        ),
    )
}

fn hessian_estimate(report: &ConvergenceReport) -> Outcome {
    let r = fit(report, "err_hessian_of_interp");
    check(
        report.complete && r >= 0.8,
        format!("rate |H(I_h u) - I_h sigma|_L2 = {r:.3} (>= 0.8)"),
    )
}

struct Fixture {
    space: Arc<LagrangeSpace>,
    ops: MixedOperators,
    quad: FormQuadrature,
    rng: ChaCha8Rng,
}

impl Fixture {
    fn new(seed: u64) -> Result<Self, String> {
        let mesh = Arc::new(build_structured_mesh(4, &Domain::UnitSquare).map_err(err)?);
        let space = LagrangeSpace::new(mesh, 2).map_err(err)?;
        let quad = FormQuadrature::for_degree(2).map_err(err)?;
        let ops = assemble_mixed_operators(&space, &quad).map_err(err)?;
        Ok(Self {
            space,
            ops,
            quad,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    fn field(&mut self) -> ScalarField {
        let mut f = ScalarField::zeros(self.space.clone());
        for c in f.coefficients_mut() {
            *c = self.rng.gen_range(-1.0..1.0);
        }
        f
    }

    fn matrix_field(&mut self) -> MatrixField {
        let c = [self.field(), self.field(), self.field()].map(ScalarField::into_coefficients);
        MatrixField::new(self.space.clone(), c).expect("component sizes match")
    }

    fn sym(&mut self) -> Sym2x2 {
        Sym2x2::new(
            self.rng.gen_range(-2.0..2.0),
            self.rng.gen_range(-2.0..2.0),
            self.rng.gen_range(-2.0..2.0),
        )
    }

    fn hessian(&self, v: &ScalarField) -> Vec<f64> {
        discrete_hessian(v, &self.ops).expect("field on fixture space").stacked()
    }
}

fn max_rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / scale
}

fn identity_suite() -> Outcome {
    let start = Instant::now();
    let mut fx = Fixture::new(7)?;
    let (mut lin, mut hom, mut trace, mut embed) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let (mut det_mid, mut cof_lin, mut euler) = (0.0f64, 0.0f64, 0.0f64);
    let interior = fx.space.interior_dofs().to_vec();
    for _ in 0..50 {
        let (v, w) = (fx.field(), fx.field());
        let (a, b) = (fx.rng.gen_range(-3.0..3.0), fx.rng.gen_range(-3.0..3.0));
        let (hv, hw) = (fx.hessian(&v), fx.hessian(&w));
        let combo: Vec<f64> = hv.iter().zip(&hw).map(|(x, y)| a * x + b * y).collect();
        lin = lin.max(max_rel_diff(&fx.hessian(&v.scaled(a).axpy(b, &w)), &combo));
        let scaled: Vec<f64> = hv.iter().map(|x| a * x).collect();
        hom = hom.max(max_rel_diff(&fx.hessian(&v.scaled(a)), &scaled));

        let eta = discrete_hessian(&v, &fx.ops).expect("field on fixture space");
        trace = trace.max(trace_identity_residual(&v, &eta, &fx.ops));

        // (div(vI), Dw) - <Dw, vI n> = (Dv, Dw) for v vanishing on the boundary
        let mut v0 = vec![0.0; fx.space.num_dofs()];
        for &i in &interior {
            v0[i] = v.coefficients()[i];
        }
        let lhs = dot(&identity_embedding(&v0), &fx.ops.coupling_apply(w.coefficients()));
        let rhs = dot(&v0, &fx.ops.stiffness.mul_vec(w.coefficients()));
        embed = embed.max((lhs - rhs).abs());

        let (p, q) = (fx.sym(), fx.sym());
        det_mid = det_mid.max((p.det() - q.det() - ((p + q) * 0.5).cof().frobenius(&(p - q))).abs());
        cof_lin = cof_lin.max((p.cof() - q.cof() - (p - q).cof()).frobenius_norm());
        euler = euler.max((p.cof().frobenius(&p) - 2.0 * p.det()).abs());
    }
    let elapsed = start.elapsed();
    check(
        lin <= 1e-12
            && hom <= 1e-12
            && trace <= 1e-11
            && embed <= 1e-11
            && det_mid <= 1e-13
            && cof_lin <= 1e-13
            && euler <= 1e-13
            && elapsed < Duration::from_secs(10),
        format!(
            "linearity {lin:.1e}, homogeneity {hom:.1e}, trace {trace:.1e}, embedding {embed:.1e}, \
             det midpoint {det_mid:.1e}, cof linearity {cof_lin:.1e}, cof:A = 2 det A {euler:.1e}, {:.2}s",
            elapsed.as_secs_f64()
        ),
    )
}

fn jacobian_correctness() -> Outcome {
    let mut fx = Fixture::new(11)?;
    let mut worst = f64::INFINITY;
    for _ in 0..10 {
        let (eta, dir) = (fx.matrix_field(), fx.matrix_field());
        let base = assemble_det_load(&eta, &fx.quad);
        let jd = assemble_newton_jacobian_block(&eta, &fx.quad).mul_vec(&dir.stacked());
        let remainder = |eps: f64| {
            let moved = assemble_det_load(&eta.axpy(eps, &dir), &fx.quad);
            moved
                .iter()
                .zip(&base)
                .zip(&jd)
                .map(|((m, b), j)| (m - b - eps * j).powi(2))
                .sum::<f64>()
                .sqrt()
        };
        worst = worst.min((remainder(1e-5) / remainder(1e-6)).log10());
    }
    check(worst >= 1.9, format!("worst consistency order {worst:.3} over 10 states (>= 1.9)"))
}

fn method_agreement() -> Outcome {
    let sys = system(Preset::Exponential, 16)?;
    let guess = monge_mixed::solver::poisson_sqrt_f(&sys).map_err(err)?;
    let newton = solve_from(&sys, &SolverConfig::newton(), guess.clone(), |_| {}).map_err(err)?;
    let marching = solve_from(&sys, &SolverConfig::time_marching(), guess, |_| {}).map_err(err)?;
    let gap = sys
        .operators()
        .h1_norm(&difference(newton.u.coefficients(), marching.u.coefficients()));

    let quad = system(Preset::Quadratic, 8)?;
    let (iu, _) = interpolant(&quad)?;
    let config = SolverConfig {
        method: Method::TimeMarching,
        nu: Nu::Auto,
        initial_guess: InitialGuess::InterpolantOfExact,
        ..SolverConfig::default()
    };
    let mut monotone = true;
    let mut runs = Vec::new();
    for (amplitude, modes) in [(1e-2, (1.0, 1.0)), (1e-2, (2.0, 1.0)), (1e-3, (3.0, 2.0))] {
        let r = solve_from(&quad, &config, perturbed(&iu, amplitude, modes)?, |_| {}).map_err(err)?;
        let inc = &r.increment_history;
        monotone &= r.converged && inc.windows(2).skip(1).all(|w| w[1] <= w[0]);
        runs.push(format!("{}", r.iterations));
    }
    check(
        newton.converged && marching.converged && gap <= 1e-8 && monotone,
        format!(
            "|u_newton - u_marching|_H1 = {gap:.2e} (<= 1e-8; {} vs {} iterations), \
             quadratic marching increments non-increasing: {monotone} ({} iterations)",
            newton.iterations,
            marching.iterations,
            runs.join("/")
        ),
    )
}

fn determinism(first: &ConvergenceReport) -> Outcome {
    let (second, _) = exponential_study()?;
    let (a, b) = (first.to_csv().map_err(err)?, second.to_csv().map_err(err)?);
    check(a == b, format!("{} byte CSV, identical: {}", a.len(), a == b))
}

fn main() {
    let study = exponential_study();
    let criteria: Vec<(&str, Outcome)> = vec![
        ("1 quadratic exactness", quadratic_exactness()),
        (
            "2 convergence rates",
            study.as_ref().map_err(Clone::clone).and_then(|(r, t)| convergence_rates(r, *t)),
        ),
        (
            "3 discrete Hessian estimate",
            study.as_ref().map_err(Clone::clone).and_then(|(r, _)| hessian_estimate(r)),
        ),
        ("4 identity suite", identity_suite()),
        ("5 Jacobian correctness", jacobian_correctness()),
        ("6 method agreement", method_agreement()),
        (
            "7 determinism",
            study.as_ref().map_err(Clone::clone).and_then(|(r, _)| determinism(r)),
        ),
    ];
    let mut failed = 0;
    for (name, outcome) in &criteria {
        match outcome {
            Ok(detail) => println!("PASS criterion {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {name}: {detail}");
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
