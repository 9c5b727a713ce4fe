//! Direct sparse factorizations.
//!
//! Both factorizations renumber the unknowns with reverse Cuthill–McKee first.
//! The SPD path is an envelope (skyline) Cholesky; the general path is a banded
//! LU with partial pivoting, which also covers symmetric indefinite systems.

use std::collections::VecDeque;

use super::sparse::{check_square, norm2, SparseMatrix};
use crate::error::{Error, Result};

/// Reverse Cuthill–McKee permutation: `perm[new] = old`.
pub fn reverse_cuthill_mckee(a: &SparseMatrix) -> Vec<usize> {
    let adj = a.symmetric_adjacency();
    let n = adj.len();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);

    while order.len() < n {
        // lowest-degree unvisited node seeds the next component
        let seed = (0..n)
            .filter(|&i| !visited[i])
            .min_by_key(|&i| (adj[i].len(), i))
            .unwrap();
        let start = pseudo_peripheral(&adj, seed, &visited);
        let mut queue = VecDeque::from([start]);
        visited[start] = true;
        while let Some(node) = queue.pop_front() {
            order.push(node);
            let mut next: Vec<usize> = adj[node].iter().copied().filter(|&j| !visited[j]).collect();
            next.sort_by_key(|&j| (adj[j].len(), j));
            for j in next {
                visited[j] = true;
                queue.push_back(j);
            }
        }
    }
    order.reverse();
    order
}

fn bfs_levels(adj: &[Vec<usize>], start: usize, blocked: &[bool]) -> Vec<Vec<usize>> {
    let mut seen = blocked.to_vec();
    seen[start] = true;
    let mut levels = vec![vec![start]];
    loop {
        let mut next = Vec::new();
        for &i in levels.last().unwrap() {
            for &j in &adj[i] {
                if !seen[j] {
                    seen[j] = true;
                    next.push(j);
                }
            }
        }
        if next.is_empty() {
            return levels;
        }
        levels.push(next);
    }
}

fn pseudo_peripheral(adj: &[Vec<usize>], seed: usize, blocked: &[bool]) -> usize {
    let mut current = seed;
    let mut depth = bfs_levels(adj, current, blocked).len();
    for _ in 0..8 {
        let levels = bfs_levels(adj, current, blocked);
        let candidate = *levels
            .last()
            .unwrap()
            .iter()
            .min_by_key(|&&j| (adj[j].len(), j))
            .unwrap();
        let cand_depth = bfs_levels(adj, candidate, blocked).len();
        if cand_depth <= depth {
            break;
        }
        current = candidate;
        depth = cand_depth;
    }
    current
}

fn inverse_permutation(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (new, &old) in perm.iter().enumerate() {
        inv[old] = new;
    }
    inv
}

/// Envelope Cholesky factor `P A Pᵀ = L Lᵀ`.
#[derive(Clone, Debug)]
pub struct CholeskyFactor {
    perm: Vec<usize>,
    /// first stored column of each row of `L` (permuted numbering)
    first: Vec<usize>,
    /// offset of row `i`'s envelope in `data`
    offset: Vec<usize>,
    data: Vec<f64>,
}

impl CholeskyFactor {
    pub fn new(a: &SparseMatrix) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::DimensionMismatch("Cholesky needs a square matrix".into()));
        }
        let n = a.nrows();
        let perm = reverse_cuthill_mckee(a);
        let iperm = inverse_permutation(&perm);

        let mut first: Vec<usize> = (0..n).collect();
        for (new_i, &old_i) in perm.iter().enumerate() {
            for (old_j, _) in a.row(old_i) {
                let new_j = iperm[old_j];
                let (r, c) = if new_j <= new_i { (new_i, new_j) } else { (new_j, new_i) };
                first[r] = first[r].min(c);
            }
        }
        let mut offset = vec![0usize; n + 1];
        for i in 0..n {
            offset[i + 1] = offset[i] + (i - first[i] + 1);
        }
        let mut data = vec![0.0; offset[n]];
        for (new_i, &old_i) in perm.iter().enumerate() {
            for (old_j, v) in a.row(old_i) {
                let new_j = iperm[old_j];
                if new_j <= new_i {
                    data[offset[new_i] + new_j - first[new_i]] = v;
                }
            }
        }

        for i in 0..n {
            let fi = first[i];
            for j in fi..=i {
                let fj = first[j];
                let start = fi.max(fj);
                let row_i = &data[offset[i] + start - fi..offset[i] + j - fi];
                let row_j = &data[offset[j] + start - fj..offset[j] + j - fj];
                let s: f64 = row_i.iter().zip(row_j).map(|(x, y)| x * y).sum();
                let idx = offset[i] + j - fi;
                let value = data[idx] - s;
                if j < i {
                    data[idx] = value / data[offset[j] + j - fj];
                } else {
                    if !(value > 0.0) {
                        return Err(Error::NotPositiveDefinite {
                            row: perm[i],
                            pivot: value,
                        });
                    }
                    data[idx] = value.sqrt();
                }
            }
        }
        Ok(Self {
            perm,
            first,
            offset,
            data,
        })
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    /// Stored entries of the factor.
    pub fn envelope_size(&self) -> usize {
        self.data.len()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        assert_eq!(b.len(), n, "right-hand side length");
        let mut y: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        // forward: L y = b
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.data[self.offset[i]..self.offset[i + 1]];
            let s: f64 = row[..i - fi].iter().zip(&y[fi..i]).map(|(l, x)| l * x).sum();
            y[i] = (y[i] - s) / row[i - fi];
        }
        // backward: Lᵀ x = y, column oriented over rows of L
        for i in (0..n).rev() {
            let fi = self.first[i];
            let row = &self.data[self.offset[i]..self.offset[i + 1]];
            y[i] /= row[i - fi];
            let xi = y[i];
            for (k, l) in (fi..i).zip(row) {
                y[k] -= l * xi;
            }
        }
        let mut x = vec![0.0; n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }

    /// [`solve`](Self::solve) followed by iterative refinement against `a`,
    /// the matrix this factor was built from.
    pub fn solve_refined(&self, a: &SparseMatrix, b: &[f64]) -> Result<Vec<f64>> {
        refine(a, b, |r| self.solve(r))
    }
}

/// Banded LU factorization with partial pivoting, `P A Pᵀ` reordered by RCM.
#[derive(Clone, Debug)]
pub struct BandedLu {
    perm: Vec<usize>,
    n: usize,
    lower: usize,
    /// upper bandwidth of `U` including pivoting fill
    upper: usize,
    width: usize,
    band: Vec<f64>,
    multipliers: Vec<f64>,
    pivots: Vec<usize>,
}

impl BandedLu {
    pub fn new(a: &SparseMatrix) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::DimensionMismatch("LU needs a square matrix".into()));
        }
        let n = a.nrows();
        let perm = reverse_cuthill_mckee(a);
        let iperm = inverse_permutation(&perm);
        let (mut lower, mut upper0) = (0usize, 0usize);
        for (new_i, &old_i) in perm.iter().enumerate() {
            for (old_j, _) in a.row(old_i) {
                let new_j = iperm[old_j];
                if new_j < new_i {
                    lower = lower.max(new_i - new_j);
                } else {
                    upper0 = upper0.max(new_j - new_i);
                }
            }
        }
        let upper = lower + upper0;
        let width = lower + upper + 1;
        let mut lu = Self {
            perm,
            n,
            lower,
            upper,
            width,
            band: vec![0.0; n * width],
            multipliers: vec![0.0; n * lower.max(1)],
            pivots: vec![0; n],
        };
        for (new_i, &old_i) in lu.perm.clone().iter().enumerate() {
            for (old_j, v) in a.row(old_i) {
                let idx = lu.index(new_i, iperm[old_j]);
                lu.band[idx] = v;
            }
        }
        lu.factor()?;
        Ok(lu)
    }

    /// Storage index of `(row, col)`; row `i` holds columns `i-lower ..= i+upper`.
    fn index(&self, row: usize, col: usize) -> usize {
        debug_assert!(col + self.lower >= row && col <= row + self.upper);
        row * self.width + col + self.lower - row
    }

    fn factor(&mut self) -> Result<()> {
        let n = self.n;
        let scale = self.band.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for k in 0..n {
            let last_row = (k + self.lower).min(n - 1);
            let mut piv = k;
            let mut best = self.band[self.index(k, k)].abs();
            for r in k + 1..=last_row {
                let v = self.band[self.index(r, k)].abs();
                if v > best {
                    best = v;
                    piv = r;
                }
            }
            if best <= f64::EPSILON * scale * n as f64 || best == 0.0 {
                return Err(Error::Singular { row: self.perm[k] });
            }
            self.pivots[k] = piv;
            let last_col = (k + self.upper).min(n - 1);
            if piv != k {
                for c in k..=last_col {
                    let (ia, ib) = (self.index(k, c), self.index(piv, c));
                    self.band.swap(ia, ib);
                }
            }
            let pivot = self.band[self.index(k, k)];
            for r in k + 1..=last_row {
                let ir = self.index(r, k);
                let m = self.band[ir] / pivot;
                self.band[ir] = 0.0;
                self.multipliers[k * self.lower.max(1) + (r - k - 1)] = m;
                if m != 0.0 {
                    for c in k + 1..=last_col {
                        let u = self.band[self.index(k, c)];
                        let idx = self.index(r, c);
                        self.band[idx] -= m * u;
                    }
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        assert_eq!(b.len(), n, "right-hand side length");
        let mut y: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        for k in 0..n {
            let piv = self.pivots[k];
            if piv != k {
                y.swap(k, piv);
            }
            let last_row = (k + self.lower).min(n - 1);
            let yk = y[k];
            for r in k + 1..=last_row {
                y[r] -= self.multipliers[k * self.lower.max(1) + (r - k - 1)] * yk;
            }
        }
        for k in (0..n).rev() {
            let last_col = (k + self.upper).min(n - 1);
            let s: f64 = (k + 1..=last_col)
                .map(|c| self.band[self.index(k, c)] * y[c])
                .sum();
            y[k] = (y[k] - s) / self.band[self.index(k, k)];
        }
        let mut x = vec![0.0; n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }
}

const SOLVE_TOLERANCE: f64 = 1e-12;

fn refine<F: Fn(&[f64]) -> Vec<f64>>(a: &SparseMatrix, b: &[f64], solve: F) -> Result<Vec<f64>> {
    let mut x = solve(b);
    let a_norm = a.frobenius_norm();
    let b_norm = norm2(b);
    let mut best = f64::INFINITY;
    for _ in 0..3 {
        let ax = a.mul_vec(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let res = norm2(&r);
        let tol = SOLVE_TOLERANCE * (b_norm + a_norm * norm2(&x));
        best = best.min(res);
        if res <= tol {
            return Ok(x);
        }
        let dx = solve(&r);
        x.iter_mut().zip(&dx).for_each(|(xi, d)| *xi += d);
    }
    let ax = a.mul_vec(&x);
    let res = norm2(&b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect::<Vec<_>>());
    let tol = SOLVE_TOLERANCE * (b_norm + a_norm * norm2(&x));
    if res <= tol {
        Ok(x)
    } else {
        Err(Error::InaccurateSolve {
            residual: res.min(best),
            tolerance: tol,
        })
    }
}

/// Solves an SPD system by Cholesky with iterative refinement.
pub fn solve_spd(a: &SparseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    check_square(a, b)?;
    let factor = CholeskyFactor::new(a)?;
    refine(a, b, |r| factor.solve(r))
}

/// Solves a symmetric (possibly indefinite) system by pivoted banded LU.
pub fn solve_symmetric(a: &SparseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    solve_general(a, b)
}

/// Solves a general nonsingular system by pivoted banded LU.
pub fn solve_general(a: &SparseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    check_square(a, b)?;
    let factor = BandedLu::new(a)?;
    refine(a, b, |r| factor.solve(r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::sparse::TripletBuilder;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn laplacian_1d(n: usize) -> SparseMatrix {
        let mut b = TripletBuilder::new(n, n);
        for i in 0..n {
            b.push(i, i, 2.0);
            if i > 0 {
                b.push(i, i - 1, -1.0);
                b.push(i - 1, i, -1.0);
            }
        }
        b.build().with_symmetric(true)
    }

    fn random_spd(n: usize, rng: &mut ChaCha8Rng) -> SparseMatrix {
        // sparse random B, A = BᵀB + I
        let mut b = TripletBuilder::new(n, n);
        for i in 0..n {
            for _ in 0..3 {
                b.push(i, rng.gen_range(0..n), rng.gen_range(-1.0..1.0));
            }
        }
        let bm = b.build();
        let bt = bm.transpose();
        let mut a = TripletBuilder::new(n, n);
        for i in 0..n {
            a.push(i, i, 1.0);
            for (k, v) in bt.row(i) {
                for (j, w) in bm.row(k) {
                    a.push(i, j, v * w);
                }
            }
        }
        a.build().with_symmetric(true)
    }

    fn residual(a: &SparseMatrix, x: &[f64], b: &[f64]) -> f64 {
        let ax = a.mul_vec(x);
        norm2(&b.iter().zip(&ax).map(|(p, q)| p - q).collect::<Vec<_>>())
    }

    #[test]
    fn identity_solve() {
        let a = SparseMatrix::identity(4);
        let b = vec![1.0, -2.0, 3.0, 0.5];
        assert_eq!(solve_spd(&a, &b).unwrap(), b);
        assert_eq!(solve_symmetric(&a, &b).unwrap(), b);
    }

    #[test]
    fn two_by_two() {
        let a = SparseMatrix::from_dense(&[vec![2.0, 1.0], vec![1.0, 2.0]]);
        let x = solve_spd(&a, &[3.0, 3.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 1.0).abs() < 1e-15);
        let x = solve_general(&a, &[3.0, 3.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rcm_is_a_permutation() {
        let a = laplacian_1d(30);
        let mut p = reverse_cuthill_mckee(&a);
        p.sort_unstable();
        assert_eq!(p, (0..30).collect::<Vec<_>>());
    }

    #[test]
    fn random_spd_residuals() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in [5, 40, 120] {
            let a = random_spd(n, &mut rng);
            let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let x = solve_spd(&a, &b).unwrap();
            let bound = 1e-12 * (norm2(&b) + a.frobenius_norm() * norm2(&x));
            assert!(residual(&a, &x, &b) <= bound);
        }
    }

    #[test]
    fn spd_path_rejects_indefinite() {
        let a = SparseMatrix::from_dense(&[vec![1.0, 2.0], vec![2.0, 1.0]]);
        assert!(matches!(
            CholeskyFactor::new(&a),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn symmetric_indefinite_saddle() {
        // [[A, Bᵀ], [B, 0]] with a zero diagonal block needs pivoting
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 30;
        let m = 10;
        let a = laplacian_1d(n);
        let mut t = TripletBuilder::new(n + m, n + m);
        for i in 0..n {
            for (j, v) in a.row(i) {
                t.push(i, j, v);
            }
        }
        for k in 0..m {
            for j in [3 * k, 3 * k + 1] {
                let v = rng.gen_range(0.5..1.5);
                t.push(n + k, j, v);
                t.push(j, n + k, v);
            }
        }
        let s = t.build().with_symmetric(true);
        assert!(s.is_symmetric(0.0));
        let b: Vec<f64> = (0..n + m).map(|i| (i as f64).sin()).collect();
        let x = solve_symmetric(&s, &b).unwrap();
        let bound = 1e-12 * (norm2(&b) + s.frobenius_norm() * norm2(&x));
        assert!(residual(&s, &x, &b) <= bound);
        assert!(CholeskyFactor::new(&s).is_err());
    }

    #[test]
    fn singular_matrix_is_reported() {
        let a = SparseMatrix::from_dense(&[vec![1.0, 1.0], vec![1.0, 1.0]]);
        assert!(solve_general(&a, &[1.0, 2.0]).is_err());
    }

    #[test]
    fn dimension_mismatch() {
        let a = SparseMatrix::identity(3);
        assert!(matches!(solve_spd(&a, &[1.0]), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn deterministic_result() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_spd(50, &mut rng);
        let b: Vec<f64> = (0..50).map(|i| i as f64).collect();
        assert_eq!(solve_spd(&a, &b).unwrap(), solve_spd(&a, &b).unwrap());
    }
}
