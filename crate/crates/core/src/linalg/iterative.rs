//! Krylov solvers: Jacobi-preconditioned CG for SPD matrices and restarted,
//! right-preconditioned GMRES for operators that are only available as a
//! matrix-vector product.

use super::sparse::{check_square, dot, norm2, SparseMatrix};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KrylovStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Conjugate gradients with diagonal preconditioning.
///
/// Converged when `‖b - Ax‖ ≤ rel_tol ‖b‖`; at most `10 · n` iterations.
pub fn cg_jacobi(a: &SparseMatrix, b: &[f64], rel_tol: f64) -> Result<(Vec<f64>, KrylovStats)> {
    check_square(a, b)?;
    let n = b.len();
    let inv_diag: Vec<f64> = a
        .diagonal()
        .iter()
        .enumerate()
        .map(|(i, &d)| {
            if d > 0.0 {
                Ok(1.0 / d)
            } else {
                Err(Error::NotPositiveDefinite { row: i, pivot: d })
            }
        })
        .collect::<Result<_>>()?;
    let b_norm = norm2(b);
    let mut x = vec![0.0; n];
    if b_norm == 0.0 {
        return Ok((
            x,
            KrylovStats {
                iterations: 0,
                relative_residual: 0.0,
            },
        ));
    }
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(ri, d)| ri * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let max_iter = 10 * n.max(1);
    for it in 1..=max_iter {
        a.mul_vec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::NotPositiveDefinite { row: it, pivot: pap });
        }
        let alpha = rz / pap;
        x.iter_mut().zip(&p).for_each(|(xi, pi)| *xi += alpha * pi);
        r.iter_mut().zip(&ap).for_each(|(ri, api)| *ri -= alpha * api);
        let rel = norm2(&r) / b_norm;
        if rel <= rel_tol {
            return Ok((
                x,
                KrylovStats {
                    iterations: it,
                    relative_residual: rel,
                },
            ));
        }
        z.iter_mut()
            .zip(r.iter().zip(&inv_diag))
            .for_each(|(zi, (ri, d))| *zi = ri * d);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        p.iter_mut().zip(&z).for_each(|(pi, zi)| *pi = zi + beta * *pi);
    }
    Err(Error::NoConvergence {
        method: "conjugate gradients",
        iterations: max_iter,
        residual: norm2(&r) / b_norm,
    })
}

#[derive(Clone, Copy, Debug)]
pub struct GmresOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub restart: usize,
    pub max_iterations: usize,
}

impl Default for GmresOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-12,
            abs_tol: 0.0,
            restart: 60,
            max_iterations: 600,
        }
    }
}

/// Restarted GMRES solving `A x = b` with right preconditioner `M⁻¹`.
///
/// `apply` computes `y = A x`; `precondition` computes `y = M⁻¹ x`.
pub fn gmres<A, P>(
    apply: A,
    precondition: P,
    b: &[f64],
    options: GmresOptions,
) -> Result<(Vec<f64>, KrylovStats)>
where
    A: Fn(&[f64]) -> Vec<f64>,
    P: Fn(&[f64]) -> Vec<f64>,
{
    let n = b.len();
    let b_norm = norm2(b);
    let mut x = vec![0.0; n];
    let target = (options.rel_tol * b_norm).max(options.abs_tol);
    if b_norm == 0.0 || b_norm <= target {
        return Ok((
            x,
            KrylovStats {
                iterations: 0,
                relative_residual: 0.0,
            },
        ));
    }
    let m = options.restart.max(1);
    let mut total = 0usize;

    while total < options.max_iterations {
        let ax = apply(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let beta = norm2(&r);
        let rel = beta / b_norm;
        if beta <= target {
            return Ok((
                x,
                KrylovStats {
                    iterations: total,
                    relative_residual: rel,
                },
            ));
        }
        let mut basis: Vec<Vec<f64>> = vec![r.iter().map(|v| v / beta).collect()];
        let mut hess: Vec<Vec<f64>> = Vec::with_capacity(m);
        let mut cs: Vec<f64> = Vec::with_capacity(m);
        let mut sn: Vec<f64> = Vec::with_capacity(m);
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut zs: Vec<Vec<f64>> = Vec::with_capacity(m);
        let mut k_used = 0;

        for k in 0..m {
            if total >= options.max_iterations {
                break;
            }
            total += 1;
            let z = precondition(&basis[k]);
            let mut w = apply(&z);
            zs.push(z);
            // modified Gram–Schmidt, applied twice for orthogonality
            let mut h = vec![0.0; k + 2];
            for _ in 0..2 {
                for (j, v) in basis.iter().enumerate() {
                    let c = dot(&w, v);
                    h[j] += c;
                    w.iter_mut().zip(v).for_each(|(wi, vi)| *wi -= c * vi);
                }
            }
            h[k + 1] = norm2(&w);
            for j in 0..k {
                let t = cs[j] * h[j] + sn[j] * h[j + 1];
                h[j + 1] = -sn[j] * h[j] + cs[j] * h[j + 1];
                h[j] = t;
            }
            let denom = h[k].hypot(h[k + 1]);
            let (c, s) = if denom == 0.0 { (1.0, 0.0) } else { (h[k] / denom, h[k + 1] / denom) };
            h[k] = c * h[k] + s * h[k + 1];
            h[k + 1] = 0.0;
            cs.push(c);
            sn.push(s);
            g[k + 1] = -s * g[k];
            g[k] *= c;
            let next_norm = norm2(&w);
            hess.push(h);
            k_used = k + 1;
            if g[k + 1].abs() <= target || next_norm == 0.0 {
                break;
            }
            basis.push(w.iter().map(|v| v / next_norm).collect());
        }

        // back substitution on the triangular Hessenberg factor
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let s: f64 = (i + 1..k_used).map(|j| hess[j][i] * y[j]).sum();
            if hess[i][i] == 0.0 {
                return Err(Error::Singular { row: i });
            }
            y[i] = (g[i] - s) / hess[i][i];
        }
        for (yi, z) in y.iter().zip(&zs) {
            x.iter_mut().zip(z).for_each(|(xi, zi)| *xi += yi * zi);
        }
    }

    let ax = apply(&x);
    let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let final_rel = norm2(&r) / b_norm;
    if norm2(&r) <= target {
        return Ok((
            x,
            KrylovStats {
                iterations: total,
                relative_residual: final_rel,
            },
        ));
    }
    Err(Error::NoConvergence {
        method: "GMRES",
        iterations: total,
        residual: final_rel,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::sparse::TripletBuilder;

    fn poisson_2d(m: usize) -> SparseMatrix {
        let n = m * m;
        let mut b = TripletBuilder::new(n, n);
        for i in 0..m {
            for j in 0..m {
                let k = i * m + j;
                b.push(k, k, 4.0);
                if i > 0 {
                    b.push(k, k - m, -1.0);
                }
                if i + 1 < m {
                    b.push(k, k + m, -1.0);
                }
                if j > 0 {
                    b.push(k, k - 1, -1.0);
                }
                if j + 1 < m {
                    b.push(k, k + 1, -1.0);
                }
            }
        }
        b.build().with_symmetric(true)
    }

    #[test]
    fn cg_solves_poisson() {
        let a = poisson_2d(12);
        let b: Vec<f64> = (0..144).map(|i| ((i * 7) % 11) as f64 - 5.0).collect();
        let (x, stats) = cg_jacobi(&a, &b, 1e-12).unwrap();
        let r: Vec<f64> = a.mul_vec(&x).iter().zip(&b).map(|(p, q)| p - q).collect();
        assert!(norm2(&r) <= 1e-12 * norm2(&b));
        assert!(stats.iterations <= 1440);
    }

    #[test]
    fn gmres_nonsymmetric() {
        // convection-diffusion style nonsymmetric perturbation of Poisson
        let p = poisson_2d(10);
        let mut t = TripletBuilder::new(100, 100);
        for i in 0..100 {
            for (j, v) in p.row(i) {
                t.push(i, j, v);
            }
            if i + 1 < 100 {
                t.push(i, i + 1, 0.7);
            }
        }
        let a = t.build();
        let b: Vec<f64> = (0..100).map(|i| (i as f64 * 0.3).cos()).collect();
        let diag = a.diagonal();
        let (x, stats) = gmres(
            |v| a.mul_vec(v),
            |v| v.iter().zip(&diag).map(|(a, d)| a / d).collect(),
            &b,
            GmresOptions {
                restart: 20,
                ..Default::default()
            },
        )
        .unwrap();
        let r: Vec<f64> = a.mul_vec(&x).iter().zip(&b).map(|(p, q)| p - q).collect();
        assert!(norm2(&r) <= 1.01e-12 * norm2(&b), "{stats:?}");
    }

    #[test]
    fn gmres_zero_rhs() {
        let (x, stats) = gmres(|v| v.to_vec(), |v| v.to_vec(), &[0.0; 4], Default::default()).unwrap();
        assert_eq!(x, vec![0.0; 4]);
        assert_eq!(stats.iterations, 0);
    }
}
