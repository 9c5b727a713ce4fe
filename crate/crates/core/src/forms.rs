//! Assembly of the bilinear and linear forms of the mixed system.
//!
//! Matrix-valued test/trial functions live in `Σ_h` with the stacked layout
//! `c * N + i`, components `c = 0, 1, 2` for `(11, 12, 22)`. The off-diagonal
//! component stands for both `τ12` and `τ21`, so it carries weight 2 in every
//! Frobenius product.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fe_space::{BasisPoint, LagrangeSpace, MatrixField};
use crate::linalg::{CholeskyFactor, SparseMatrix, TripletBuilder};
use crate::quadrature::{make_line_quadrature, make_quadrature, LineRule, QuadratureRule};

/// Quadrature rules used by assembly and the number of assembly threads.
#[derive(Clone, Debug)]
pub struct FormQuadrature {
    /// Cell rule for mass, coupling and nonlinear terms.
    pub cell: QuadratureRule,
    /// Boundary edge rule.
    pub edge: LineRule,
    /// Cell rule for loads of non-polynomial data `f`.
    pub load: QuadratureRule,
    pub threads: usize,
}

impl FormQuadrature {
    /// Exactness `3k` on cells, `2k` on edges and `3k + 4` for data loads.
    pub fn for_degree(k: usize) -> Result<Self> {
        Ok(Self {
            cell: make_quadrature(3 * k)?,
            edge: make_line_quadrature(2 * k),
            load: make_quadrature(3 * k + 4)?,
            threads: 1,
        })
    }

    pub fn with_threads(mut self, threads: usize) -> Self {
        self.threads = threads.max(1);
        self
    }
}

/// Runs `f` on every cell, in parallel chunks when `threads > 1`, and
/// concatenates the contributions in cell order. The result does not depend on
/// the thread count.
pub(crate) fn collect_cells<T, F>(ncells: usize, threads: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, &mut Vec<T>) + Sync,
{
    let threads = threads.max(1).min(ncells.max(1));
    if threads == 1 {
        let mut out = Vec::new();
        for t in 0..ncells {
            f(t, &mut out);
        }
        return out;
    }
    let chunk = ncells.div_ceil(threads);
    let parts: Vec<Vec<T>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..threads)
            .map(|p| {
                let f = &f;
                scope.spawn(move || {
                    let mut out = Vec::new();
                    for t in p * chunk..((p + 1) * chunk).min(ncells) {
                        f(t, &mut out);
                    }
                    out
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("assembly worker panicked")).collect()
    });
    parts.into_iter().flatten().collect()
}

fn to_matrix(nrows: usize, ncols: usize, entries: Vec<(usize, usize, f64)>) -> SparseMatrix {
    let mut b = TripletBuilder::with_capacity(nrows, ncols, entries.len());
    for (i, j, v) in entries {
        b.push(i, j, v);
    }
    b.build()
}

fn to_vector(n: usize, entries: Vec<(usize, f64)>) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for (i, v) in entries {
        out[i] += v;
    }
    out
}

/// The linear operators of the mixed system on one mesh.
#[derive(Debug)]
pub struct MixedOperators {
    space: Arc<LagrangeSpace>,
    quadrature: FormQuadrature,
    /// Scalar mass matrix `(φ_j, φ_i)`.
    pub scalar_mass: SparseMatrix,
    /// `Σ_h` mass `(η, τ)`: block diagonal with weights 1, 2, 1.
    pub mass: SparseMatrix,
    /// `(div τ_i, D φ_j)`, rows in `Σ_h`, columns in `V_h`.
    pub divergence: SparseMatrix,
    /// `⟨D φ_j, τ_i n⟩` over `∂Ω`, rows in `Σ_h`, columns in `V_h`.
    pub boundary: SparseMatrix,
    /// `(D φ_j, D φ_i)`.
    pub stiffness: SparseMatrix,
    mass_factor: CholeskyFactor,
}

/// Component weights of the Frobenius product in stacked layout.
pub const COMPONENT_WEIGHTS: [f64; 3] = [1.0, 2.0, 1.0];

pub fn assemble_mixed_operators(
    space: &Arc<LagrangeSpace>,
    quadrature: &FormQuadrature,
) -> Result<MixedOperators> {
    let k = space.degree();
    if quadrature.cell.exactness_degree < 2 * k {
        return Err(Error::InvalidArgument(format!(
            "cell quadrature exactness {} is below the mass-matrix degree {}",
            quadrature.cell.exactness_degree,
            2 * k
        )));
    }
    if quadrature.edge.exactness_degree < 2 * k - 1 {
        return Err(Error::InvalidArgument(format!(
            "edge quadrature exactness {} is below the boundary-term degree {}",
            quadrature.edge.exactness_degree,
            2 * k - 1
        )));
    }
    let n = space.num_dofs();
    let mesh = space.mesh();
    let tab = space.reference().tabulate(&quadrature.cell);
    let rule = &quadrature.cell;

    let cell_entries = collect_cells(mesh.num_triangles(), quadrature.threads, |t, out| {
        let geo = space.geometry(t);
        let dofs = space.cell_dofs(t);
        let nb = dofs.len();
        let mut mass = vec![0.0; nb * nb];
        let mut stiff = vec![0.0; nb * nb];
        let mut div = vec![[0.0; 3]; nb * nb];
        for (q, basis) in tab.iter().enumerate() {
            let w = rule.weights[q] * geo.area;
            let grads: Vec<[f64; 2]> = basis.dlam.iter().map(|d| geo.gradient(d)).collect();
            for i in 0..nb {
                for j in 0..nb {
                    let (gi, gj) = (grads[i], grads[j]);
                    mass[i * nb + j] += w * basis.values[i] * basis.values[j];
                    stiff[i * nb + j] += w * (gi[0] * gj[0] + gi[1] * gj[1]);
                    let d = &mut div[i * nb + j];
                    d[0] += w * gi[0] * gj[0];
                    d[1] += w * (gi[1] * gj[0] + gi[0] * gj[1]);
                    d[2] += w * gi[1] * gj[1];
                }
            }
        }
        for i in 0..nb {
            for j in 0..nb {
                out.push((dofs[i], dofs[j], mass[i * nb + j], stiff[i * nb + j], div[i * nb + j]));
            }
        }
    });

    let mut scalar_mass = TripletBuilder::with_capacity(n, n, cell_entries.len());
    let mut stiffness = TripletBuilder::with_capacity(n, n, cell_entries.len());
    let mut divergence = TripletBuilder::with_capacity(3 * n, n, 3 * cell_entries.len());
    let mut mass = TripletBuilder::with_capacity(3 * n, 3 * n, 3 * cell_entries.len());
    for &(i, j, m, s, d) in &cell_entries {
        scalar_mass.push(i, j, m);
        stiffness.push(i, j, s);
        for c in 0..3 {
            mass.push(c * n + i, c * n + j, COMPONENT_WEIGHTS[c] * m);
            divergence.push(c * n + i, j, d[c]);
        }
    }

    let boundary = assemble_boundary(space, &quadrature.edge);
    let scalar_mass = scalar_mass.build().with_symmetric(true);
    let mass_factor = CholeskyFactor::new(&scalar_mass)?;
    Ok(MixedOperators {
        space: space.clone(),
        quadrature: quadrature.clone(),
        scalar_mass,
        mass: mass.build().with_symmetric(true),
        divergence: divergence.build(),
        boundary,
        stiffness: stiffness.build().with_symmetric(true),
        mass_factor,
    })
}

/// Reference tabulation at points of local edge `e` (from vertex `e` to `e+1`).
fn edge_tabulation(space: &LagrangeSpace, edge: &LineRule, e: usize) -> Vec<BasisPoint> {
    edge.points
        .iter()
        .map(|&s| {
            let mut lam = [0.0; 3];
            lam[e] = 1.0 - s;
            lam[(e + 1) % 3] = s;
            space.reference().evaluate(lam)
        })
        .collect()
}

fn assemble_boundary(space: &Arc<LagrangeSpace>, edge: &LineRule) -> SparseMatrix {
    let n = space.num_dofs();
    let mesh = space.mesh();
    let tabs: Vec<Vec<BasisPoint>> = (0..3).map(|e| edge_tabulation(space, edge, e)).collect();
    let mut b = TripletBuilder::new(3 * n, n);
    for be in &mesh.boundary_edges {
        let t = be.triangle;
        let geo = space.geometry(t);
        let dofs = space.cell_dofs(t);
        let [nx, ny] = be.normal;
        for (q, basis) in tabs[be.local_edge].iter().enumerate() {
            let w = edge.weights[q] * be.length;
            let grads: Vec<[f64; 2]> = basis.dlam.iter().map(|d| geo.gradient(d)).collect();
            for (i, &di) in dofs.iter().enumerate() {
                let phi = basis.values[i];
                if phi == 0.0 {
                    continue;
                }
                for (j, &dj) in dofs.iter().enumerate() {
                    let g = grads[j];
                    b.push(di, dj, w * phi * g[0] * nx);
                    b.push(n + di, dj, w * phi * (g[0] * ny + g[1] * nx));
                    b.push(2 * n + di, dj, w * phi * g[1] * ny);
                }
            }
        }
    }
    b.build()
}

impl MixedOperators {
    pub fn space(&self) -> &Arc<LagrangeSpace> {
        &self.space
    }

    pub fn quadrature(&self) -> &FormQuadrature {
        &self.quadrature
    }

    /// Cholesky factor of the scalar mass matrix, shared by all three
    /// components of every `Σ_h` mass solve.
    pub fn mass_factor(&self) -> &CholeskyFactor {
        &self.mass_factor
    }

    /// `(B - G) v`: the functional `τ ↦ (div τ, Dv) − ⟨Dv, τn⟩` in stacked layout.
    pub fn coupling_apply(&self, v: &[f64]) -> Vec<f64> {
        let mut out = self.divergence.mul_vec(v);
        let g = self.boundary.mul_vec(v);
        out.iter_mut().zip(&g).for_each(|(o, gi)| *o -= gi);
        out
    }

    /// `(B - G)ᵀ τ`.
    pub fn coupling_transpose_apply(&self, tau: &[f64]) -> Vec<f64> {
        let mut out = self.divergence.transpose_mul_vec(tau);
        let g = self.boundary.transpose_mul_vec(tau);
        out.iter_mut().zip(&g).for_each(|(o, gi)| *o -= gi);
        out
    }

    /// Solves `M η = rhs` for a stacked `Σ_h` right-hand side.
    pub fn mass_solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.space.num_dofs();
        assert_eq!(rhs.len(), 3 * n, "stacked right-hand side length");
        let mut out = Vec::with_capacity(3 * n);
        for c in 0..3 {
            let scaled: Vec<f64> = rhs[c * n..(c + 1) * n]
                .iter()
                .map(|v| v / COMPONENT_WEIGHTS[c])
                .collect();
            out.extend(self.mass_factor.solve(&scaled));
        }
        out
    }

    /// `(η, τ)` for stacked fields.
    pub fn sigma_inner(&self, a: &[f64], b: &[f64]) -> f64 {
        let ma = self.mass.mul_vec(a);
        ma.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    /// `‖v‖_{H¹}` of a `V_h` coefficient vector, computed from `K + M`.
    pub fn h1_norm(&self, v: &[f64]) -> f64 {
        let kv = self.stiffness.mul_vec(v);
        let mv = self.scalar_mass.mul_vec(v);
        kv.iter()
            .zip(&mv)
            .zip(v)
            .map(|((a, b), x)| (a + b) * x)
            .sum::<f64>()
            .max(0.0)
            .sqrt()
    }

    /// `‖η‖_{L²}` of a stacked `Σ_h` field.
    pub fn sigma_l2_norm(&self, eta: &[f64]) -> f64 {
        self.sigma_inner(eta, eta).max(0.0).sqrt()
    }
}

/// `∫ det(η) φ_i` for every DOF `i` (all DOFs; restrict to interior rows as needed).
pub fn assemble_det_load(eta: &MatrixField, quadrature: &FormQuadrature) -> Vec<f64> {
    let space = eta.space();
    let tab = space.reference().tabulate(&quadrature.cell);
    let rule = &quadrature.cell;
    let entries = collect_cells(space.mesh().num_triangles(), quadrature.threads, |t, out| {
        let geo = space.geometry(t);
        let dofs = space.cell_dofs(t);
        let mut local = vec![0.0; dofs.len()];
        for (q, basis) in tab.iter().enumerate() {
            let d = eta.evaluate_with(t, basis).det() * rule.weights[q] * geo.area;
            for (l, phi) in local.iter_mut().zip(&basis.values) {
                *l += d * phi;
            }
        }
        out.extend(dofs.iter().copied().zip(local));
    });
    to_vector(space.num_dofs(), entries)
}

/// The derivative of [`assemble_det_load`] at `η`: entry `(i, c·N + j)` is
/// `∫ (cof η : E_c φ_j) φ_i`.
pub fn assemble_newton_jacobian_block(eta: &MatrixField, quadrature: &FormQuadrature) -> SparseMatrix {
    let space = eta.space();
    let n = space.num_dofs();
    let tab = space.reference().tabulate(&quadrature.cell);
    let rule = &quadrature.cell;
    let entries = collect_cells(space.mesh().num_triangles(), quadrature.threads, |t, out| {
        let geo = space.geometry(t);
        let dofs = space.cell_dofs(t);
        let nb = dofs.len();
        let mut local = vec![[0.0; 3]; nb * nb];
        for (q, basis) in tab.iter().enumerate() {
            let cof = eta.evaluate_with(t, basis).cof();
            let w = rule.weights[q] * geo.area;
            // weights of (cof η : E_c) in the Frobenius product
            let coef = [cof.a11, 2.0 * cof.a12, cof.a22].map(|c| c * w);
            for i in 0..nb {
                for j in 0..nb {
                    let pp = basis.values[i] * basis.values[j];
                    let l = &mut local[i * nb + j];
                    for c in 0..3 {
                        l[c] += coef[c] * pp;
                    }
                }
            }
        }
        for i in 0..nb {
            for j in 0..nb {
                for c in 0..3 {
                    out.push((dofs[i], c * n + dofs[j], local[i * nb + j][c]));
                }
            }
        }
    });
    to_matrix(n, 3 * n, entries)
}

/// `(cof η Dφ_j, Dφ_i)`: the divergence-form linearization used to precondition Newton.
pub fn assemble_cofactor_stiffness(eta: &MatrixField, quadrature: &FormQuadrature) -> SparseMatrix {
    let space = eta.space();
    let n = space.num_dofs();
    let tab = space.reference().tabulate(&quadrature.cell);
    let rule = &quadrature.cell;
    let entries = collect_cells(space.mesh().num_triangles(), quadrature.threads, |t, out| {
        let geo = space.geometry(t);
        let dofs = space.cell_dofs(t);
        let nb = dofs.len();
        let mut local = vec![0.0; nb * nb];
        for (q, basis) in tab.iter().enumerate() {
            let cof = eta.evaluate_with(t, basis).cof();
            let w = rule.weights[q] * geo.area;
            let grads: Vec<[f64; 2]> = basis.dlam.iter().map(|d| geo.gradient(d)).collect();
            for i in 0..nb {
                for j in 0..nb {
                    let cg = cof.apply(grads[j]);
                    local[i * nb + j] += w * (cg[0] * grads[i][0] + cg[1] * grads[i][1]);
                }
            }
        }
        for i in 0..nb {
            for j in 0..nb {
                out.push((dofs[i], dofs[j], local[i * nb + j]));
            }
        }
    });
    to_matrix(n, n, entries).with_symmetric(true)
}

/// `∫ f φ_i` with the load rule.
pub fn assemble_scalar_load<F>(f: F, space: &Arc<LagrangeSpace>, quadrature: &FormQuadrature) -> Vec<f64>
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    assemble_load_with(&f, space, &quadrature.load, quadrature.threads)
}

pub(crate) fn assemble_load_with<F>(f: &F, space: &Arc<LagrangeSpace>, rule: &QuadratureRule, threads: usize) -> Vec<f64>
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    let tab = space.reference().tabulate(rule);
    let entries = collect_cells(space.mesh().num_triangles(), threads, |t, out| {
        let geo = space.geometry(t);
        let dofs = space.cell_dofs(t);
        let mut local = vec![0.0; dofs.len()];
        for (q, basis) in tab.iter().enumerate() {
            let [x, y] = geo.map(rule.points[q]);
            let v = f(x, y) * rule.weights[q] * geo.area;
            for (l, phi) in local.iter_mut().zip(&basis.values) {
                *l += v * phi;
            }
        }
        out.extend(dofs.iter().copied().zip(local));
    });
    to_vector(space.num_dofs(), entries)
}

/// Interior system after symmetric elimination of Dirichlet DOFs.
#[derive(Clone, Debug)]
pub struct ReducedSystem {
    pub matrix: SparseMatrix,
    pub rhs: Vec<f64>,
    pub interior: Vec<usize>,
    pub boundary: Vec<usize>,
    pub boundary_values: Vec<f64>,
}

impl ReducedSystem {
    /// Full coefficient vector from interior unknowns and the stored boundary values.
    pub fn expand(&self, interior_values: &[f64]) -> Vec<f64> {
        let n = self.interior.len() + self.boundary.len();
        let mut out = vec![0.0; n];
        for (&i, &v) in self.interior.iter().zip(interior_values) {
            out[i] = v;
        }
        for (&i, &v) in self.boundary.iter().zip(&self.boundary_values) {
            out[i] = v;
        }
        out
    }
}

/// Eliminates boundary DOFs: returns `A_II x_I = b_I − A_IB g`.
pub fn apply_dirichlet(
    matrix: &SparseMatrix,
    rhs: &[f64],
    space: &LagrangeSpace,
    boundary_values: &[f64],
) -> Result<ReducedSystem> {
    let boundary = space.boundary_dofs();
    if boundary_values.len() != boundary.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} boundary values supplied for {} boundary DOFs",
            boundary_values.len(),
            boundary.len()
        )));
    }
    if matrix.nrows() != space.num_dofs() || rhs.len() != space.num_dofs() {
        return Err(Error::DimensionMismatch(
            "system size differs from the space DOF count".into(),
        ));
    }
    let interior = space.interior_dofs();
    let a_ii = matrix.select(interior, interior);
    let a_ib = matrix.select(interior, boundary);
    let lift = a_ib.mul_vec(boundary_values);
    let reduced_rhs = interior
        .iter()
        .zip(&lift)
        .map(|(&i, l)| rhs[i] - l)
        .collect();
    Ok(ReducedSystem {
        matrix: a_ii,
        rhs: reduced_rhs,
        interior: interior.to_vec(),
        boundary: boundary.to_vec(),
        boundary_values: boundary_values.to_vec(),
    })
}

/// Stacked coefficients of `v I` for a scalar coefficient vector `v`.
pub fn identity_embedding(v: &[f64]) -> Vec<f64> {
    let n = v.len();
    let mut out = Vec::with_capacity(3 * n);
    out.extend_from_slice(v);
    out.extend(std::iter::repeat_n(0.0, n));
    out.extend_from_slice(v);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fe_space::interpolate;
    use crate::linalg::{dot, solve_spd, Sym2x2};
    use crate::mesh::{build_structured_mesh, Domain};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup(n: usize, k: usize) -> (Arc<LagrangeSpace>, FormQuadrature, MixedOperators) {
        let mesh = Arc::new(build_structured_mesh(n, &Domain::UnitSquare).unwrap());
        let space = LagrangeSpace::new(mesh, k).unwrap();
        let quad = FormQuadrature::for_degree(k).unwrap();
        let ops = assemble_mixed_operators(&space, &quad).unwrap();
        (space, quad, ops)
    }

    #[test]
    fn identity_field_mass() {
        let (space, _, ops) = setup(3, 2);
        let id = MatrixField::constant(space, Sym2x2::IDENTITY).stacked();
        assert!((ops.sigma_inner(&id, &id) - 2.0).abs() < 1e-13);
    }

    #[test]
    fn mass_is_spd_and_stiffness_has_constant_kernel() {
        let (space, _, ops) = setup(2, 2);
        assert!(ops.mass.is_symmetric(1e-12));
        assert!(ops.stiffness.is_symmetric(1e-12));
        assert!(CholeskyFactor::new(&ops.mass).is_ok());
        let ones = vec![1.0; space.num_dofs()];
        let k1 = ops.stiffness.mul_vec(&ones);
        assert!(k1.iter().all(|v| v.abs() < 1e-13));
    }

    #[test]
    fn rejects_low_exactness() {
        let mesh = Arc::new(build_structured_mesh(2, &Domain::UnitSquare).unwrap());
        let space = LagrangeSpace::new(mesh, 2).unwrap();
        let mut quad = FormQuadrature::for_degree(2).unwrap();
        quad.cell = make_quadrature(2).unwrap();
        assert!(assemble_mixed_operators(&space, &quad).is_err());
    }

    #[test]
    fn embedding_identity_at_matrix_level() {
        // rows c11 + c22 of (B - G) equal the stiffness rows for interior test DOFs
        let (space, _, ops) = setup(4, 2);
        let n = space.num_dofs();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let mut v = vec![0.0; n];
            for &i in space.interior_dofs() {
                v[i] = rng.gen_range(-1.0..1.0);
            }
            let w: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let tau = identity_embedding(&v);
            let lhs = dot(&tau, &ops.coupling_apply(&w));
            let rhs = dot(&v, &ops.stiffness.mul_vec(&w));
            assert!((lhs - rhs).abs() <= 1e-11, "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn det_load_of_identity_and_zero() {
        let (space, quad, _) = setup(3, 2);
        let id = MatrixField::constant(space.clone(), Sym2x2::IDENTITY);
        let load = assemble_det_load(&id, &quad);
        let ones = assemble_scalar_load(|_, _| 1.0, &space, &quad);
        for (a, b) in load.iter().zip(&ones) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!((ones.iter().sum::<f64>() - 1.0).abs() < 1e-13);
        let zero = MatrixField::zeros(space);
        assert!(assemble_det_load(&zero, &quad).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn det_load_is_quadratic() {
        let (space, quad, _) = setup(3, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = space.num_dofs();
        let comps = [0, 1, 2].map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<_>>());
        let eta = MatrixField::new(space, comps).unwrap();
        let base = assemble_det_load(&eta, &quad);
        let scale = base.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for alpha in [-2.0, 0.5, 3.0] {
            let scaled = assemble_det_load(&eta.scaled(alpha), &quad);
            for (a, b) in scaled.iter().zip(&base) {
                assert!((a - alpha * alpha * b).abs() <= 1e-12 * alpha * alpha * scale);
            }
        }
    }

    #[test]
    fn jacobian_block_at_identity_and_zero() {
        let (space, quad, ops) = setup(2, 2);
        let n = space.num_dofs();
        let id = MatrixField::constant(space.clone(), Sym2x2::IDENTITY);
        let jac = assemble_newton_jacobian_block(&id, &quad);
        // τ ↦ (tr τ, v): the 11 and 22 blocks are the scalar mass, 12 is zero
        for i in 0..n {
            for j in 0..n {
                let m = ops.scalar_mass.get(i, j);
                assert!((jac.get(i, j) - m).abs() < 1e-15);
                assert!(jac.get(i, n + j).abs() < 1e-15);
                assert!((jac.get(i, 2 * n + j) - m).abs() < 1e-15);
            }
        }
        let zero = assemble_newton_jacobian_block(&MatrixField::zeros(space), &quad);
        assert!(zero.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let (space, quad, _) = setup(3, 2);
        let n = space.num_dofs();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let rand_field = |rng: &mut ChaCha8Rng| {
            let comps = [0, 1, 2].map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<_>>());
            MatrixField::new(space.clone(), comps).unwrap()
        };
        let eta = rand_field(&mut rng);
        let delta = rand_field(&mut rng);
        let jac = assemble_newton_jacobian_block(&eta, &quad);
        let jd = jac.mul_vec(&delta.stacked());
        let base = assemble_det_load(&eta, &quad);
        let errs: Vec<f64> = [1e-5, 1e-6]
            .iter()
            .map(|&eps| {
                let pert = assemble_det_load(&eta.axpy(eps, &delta), &quad);
                pert.iter()
                    .zip(&base)
                    .zip(&jd)
                    .map(|((p, b), j)| ((p - b) - eps * j).abs())
                    .fold(0.0, f64::max)
            })
            .collect();
        // the remainder is exactly ε² det(δ) load: second order
        let order = (errs[0] / errs[1]).log10();
        assert!(order >= 1.9, "observed order {order}, errors {errs:?}");
    }

    #[test]
    fn poisson_reproduces_quadratic() {
        // -Δu = -2 for u = (x² + y²)/2, exact in V_h
        let (space, quad, ops) = setup(4, 2);
        let exact = interpolate(|x, y| 0.5 * (x * x + y * y), &space).unwrap();
        let load = assemble_scalar_load(|_, _| -2.0, &space, &quad);
        let g: Vec<f64> = space.boundary_dofs().iter().map(|&i| exact.coefficients()[i]).collect();
        let sys = apply_dirichlet(&ops.stiffness, &load, &space, &g).unwrap();
        let x = solve_spd(&sys.matrix, &sys.rhs).unwrap();
        let u = sys.expand(&x);
        for (a, b) in u.iter().zip(exact.coefficients()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(apply_dirichlet(&ops.stiffness, &load, &space, &g[1..]).is_err());
    }

    #[test]
    fn zero_dirichlet_only_removes_rows() {
        let (space, _, ops) = setup(2, 2);
        let rhs: Vec<f64> = (0..space.num_dofs()).map(|i| i as f64).collect();
        let zeros = vec![0.0; space.boundary_dofs().len()];
        let sys = apply_dirichlet(&ops.stiffness, &rhs, &space, &zeros).unwrap();
        for (r, &i) in sys.interior.iter().enumerate() {
            assert_eq!(sys.rhs[r], rhs[i]);
        }
        assert_eq!(sys.matrix, ops.stiffness.select(space.interior_dofs(), space.interior_dofs()));
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let (space, quad, ops) = setup(4, 2);
        let quad4 = quad.clone().with_threads(4);
        let ops4 = assemble_mixed_operators(&space, &quad4).unwrap();
        assert_eq!(ops.mass, ops4.mass);
        assert_eq!(ops.divergence, ops4.divergence);
        let f = |x: f64, y: f64| (x + 2.0 * y).exp();
        assert_eq!(
            assemble_scalar_load(f, &space, &quad),
            assemble_scalar_load(f, &space, &quad4)
        );
    }
}
