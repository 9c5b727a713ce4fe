//! Built-in invariant suite run by `monge-mixed verify`.

use std::sync::Arc;

use monge_mixed::fe_space::{interpolate, LagrangeSpace, MatrixField, ScalarField};
use monge_mixed::forms::{
    assemble_det_load, assemble_mixed_operators, assemble_newton_jacobian_block, identity_embedding,
    FormQuadrature, MixedOperators,
};
use monge_mixed::hessian::{discrete_hessian, trace_identity_residual};
use monge_mixed::linalg::{dot, Sym2x2};
use monge_mixed::mesh::{build_structured_mesh, Domain};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub name: &'static str,
    pub passed: bool,
    /// Worst observed value against its limit.
    pub detail: String,
}

const SAMPLES: usize = 50;

struct Fixture {
    space: Arc<LagrangeSpace>,
    ops: MixedOperators,
    quad: FormQuadrature,
    rng: ChaCha8Rng,
}

impl Fixture {
    fn new() -> monge_mixed::Result<Self> {
        let mesh = Arc::new(build_structured_mesh(4, &Domain::UnitSquare)?);
        let space = LagrangeSpace::new(mesh, 2)?;
        let quad = FormQuadrature::for_degree(2)?;
        let ops = assemble_mixed_operators(&space, &quad)?;
        Ok(Self {
            space,
            ops,
            quad,
            rng: ChaCha8Rng::seed_from_u64(2024),
        })
    }

    fn random_field(&mut self) -> ScalarField {
        let mut f = ScalarField::zeros(self.space.clone());
        f.coefficients_mut()
            .iter_mut()
            .for_each(|c| *c = self.rng.gen_range(-1.0..1.0));
        f
    }

    fn random_sym(&mut self) -> Sym2x2 {
        Sym2x2::new(
            self.rng.gen_range(-2.0..2.0),
            self.rng.gen_range(-2.0..2.0),
            self.rng.gen_range(-2.0..2.0),
        )
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn outcome(name: &'static str, worst: f64, limit: f64) -> Outcome {
    Outcome {
        name,
        passed: worst <= limit,
        detail: format!("{worst:.3e} (limit {limit:.0e})"),
    }
}

fn hessian_linearity(fx: &mut Fixture) -> Outcome {
    let mut worst = 0.0f64;
    for _ in 0..SAMPLES {
        let v = fx.random_field();
        let w = fx.random_field();
        let (a, b) = (fx.rng.gen_range(-3.0..3.0), fx.rng.gen_range(-3.0..3.0));
        let combo = v.scaled(a).axpy(b, &w);
        let lhs = discrete_hessian(&combo, &fx.ops).expect("same space").stacked();
        let hv = discrete_hessian(&v, &fx.ops).expect("same space").stacked();
        let hw = discrete_hessian(&w, &fx.ops).expect("same space").stacked();
        let rhs: Vec<f64> = hv.iter().zip(&hw).map(|(x, y)| a * x + b * y).collect();
        let scale = rhs.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        worst = worst.max(max_abs_diff(&lhs, &rhs) / scale);
    }
    outcome("hessian_linearity", worst, 1e-12)
}

fn hessian_homogeneity(fx: &mut Fixture) -> Outcome {
    let mut worst = 0.0f64;
    for _ in 0..SAMPLES {
        let v = fx.random_field();
        let alpha = fx.rng.gen_range(-5.0..5.0);
        let lhs = discrete_hessian(&v.scaled(alpha), &fx.ops).expect("same space").stacked();
        let hv = discrete_hessian(&v, &fx.ops).expect("same space").stacked();
        let rhs: Vec<f64> = hv.iter().map(|x| alpha * x).collect();
        let scale = rhs.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        worst = worst.max(max_abs_diff(&lhs, &rhs) / scale);
    }
    outcome("hessian_homogeneity", worst, 1e-12)
}

fn hessian_of_quadratic(fx: &mut Fixture) -> Outcome {
    let v = interpolate(|x, y| 0.5 * x * x + 2.0 * x * y - 1.5 * y * y, &fx.space).expect("finite");
    let h = discrete_hessian(&v, &fx.ops).expect("same space");
    let want = MatrixField::constant(fx.space.clone(), Sym2x2::new(1.0, 2.0, -3.0));
    outcome("hessian_of_quadratic", max_abs_diff(&h.stacked(), &want.stacked()), 1e-11)
}

fn trace_identity(fx: &mut Fixture) -> Outcome {
    let mut worst = 0.0f64;
    for _ in 0..SAMPLES {
        let v = fx.random_field();
        let h = discrete_hessian(&v, &fx.ops).expect("same space");
        worst = worst.max(trace_identity_residual(&v, &h, &fx.ops));
    }
    outcome("trace_identity", worst, 1e-11)
}

fn embedding_identity(fx: &mut Fixture) -> Outcome {
    let n = fx.space.num_dofs();
    let interior = fx.space.interior_dofs().to_vec();
    let mut worst = 0.0f64;
    for _ in 0..SAMPLES {
        let mut v = vec![0.0; n];
        for &i in &interior {
            v[i] = fx.rng.gen_range(-1.0..1.0);
        }
        let w = fx.random_field();
        let lhs = dot(&identity_embedding(&v), &fx.ops.coupling_apply(w.coefficients()));
        let rhs = dot(&v, &fx.ops.stiffness.mul_vec(w.coefficients()));
        worst = worst.max((lhs - rhs).abs());
    }
    outcome("embedding_identity", worst, 1e-11)
}

fn det_midpoint(fx: &mut Fixture) -> Outcome {
    let mut worst = 0.0f64;
    for _ in 0..SAMPLES {
        let (a, b) = (fx.random_sym(), fx.random_sym());
        let mid = ((a + b) * 0.5).cof();
        worst = worst.max((a.det() - b.det() - mid.frobenius(&(a - b))).abs());
    }
    outcome("det_midpoint_identity", worst, 1e-13)
}

fn cof_linearity(fx: &mut Fixture) -> Outcome {
    let mut worst = 0.0f64;
    for _ in 0..SAMPLES {
        let (a, b) = (fx.random_sym(), fx.random_sym());
        worst = worst.max((a.cof() - b.cof() - (a - b).cof()).frobenius_norm());
    }
    outcome("cofactor_linearity", worst, 1e-13)
}

fn cof_euler(fx: &mut Fixture) -> Outcome {
    let mut worst = 0.0f64;
    for _ in 0..SAMPLES {
        let a = fx.random_sym();
        worst = worst.max((a.cof().frobenius(&a) - 2.0 * a.det()).abs());
    }
    outcome("cofactor_euler_identity", worst, 1e-13)
}

fn jacobian_consistency(fx: &mut Fixture) -> Outcome {
    let mut worst_order = f64::INFINITY;
    for _ in 0..10 {
        let eta = {
            let c: [Vec<f64>; 3] = std::array::from_fn(|_| fx.random_field().into_coefficients());
            MatrixField::new(fx.space.clone(), c).expect("sizes match")
        };
        let dir = {
            let c: [Vec<f64>; 3] = std::array::from_fn(|_| fx.random_field().into_coefficients());
            MatrixField::new(fx.space.clone(), c).expect("sizes match")
        };
        let base = assemble_det_load(&eta, &fx.quad);
        let jd = assemble_newton_jacobian_block(&eta, &fx.quad).mul_vec(&dir.stacked());
        let remainder = |eps: f64| {
            let moved = assemble_det_load(&eta.axpy(eps, &dir), &fx.quad);
            moved
                .iter()
                .zip(&base)
                .zip(&jd)
                .map(|((m, b0), j)| (m - b0 - eps * j).powi(2))
                .sum::<f64>()
                .sqrt()
        };
        let (r1, r2) = (remainder(1e-5), remainder(1e-6));
        worst_order = worst_order.min((r1 / r2).log10());
    }
    Outcome {
        name: "jacobian_consistency",
        passed: worst_order >= 1.9,
        detail: format!("order {worst_order:.3} (limit 1.9)"),
    }
}

/// Runs every property on a 4×4 mesh with `k = 2`.
pub fn run_suite() -> monge_mixed::Result<Vec<Outcome>> {
    let mut fx = Fixture::new()?;
    let checks: [fn(&mut Fixture) -> Outcome; 9] = [
        hessian_linearity,
        hessian_homogeneity,
        hessian_of_quadratic,
        trace_identity,
        embedding_identity,
        det_midpoint,
        cof_linearity,
        cof_euler,
        jacobian_consistency,
    ];
    Ok(checks.iter().map(|check| check(&mut fx)).collect())
}

#[cfg(test)]
mod tests {
    #[test]
    fn suite_passes() {
        let outcomes = super::run_suite().unwrap();
        for o in &outcomes {
            assert!(o.passed, "{}: {}", o.name, o.detail);
        }
        assert_eq!(outcomes.len(), 9);
    }
}
