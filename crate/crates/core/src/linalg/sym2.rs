//! Pointwise algebra on symmetric 2×2 matrices.
//!
//! The Frobenius product counts the off-diagonal entry twice, which is the
//! same weighting the matrix-field inner product uses.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

/// The symmetric matrix `[[a11, a12], [a12, a22]]`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Sym2x2 {
    pub a11: f64,
    pub a12: f64,
    pub a22: f64,
}

impl Sym2x2 {
    pub const ZERO: Sym2x2 = Sym2x2::new(0.0, 0.0, 0.0);
    pub const IDENTITY: Sym2x2 = Sym2x2::new(1.0, 0.0, 1.0);

    pub const fn new(a11: f64, a12: f64, a22: f64) -> Self {
        Self { a11, a12, a22 }
    }

    pub fn det(&self) -> f64 {
        self.a11 * self.a22 - self.a12 * self.a12
    }

    /// Cofactor matrix. In 2D this is a linear map: `cof [[a,b],[b,d]] = [[d,-b],[-b,a]]`.
    pub fn cof(&self) -> Sym2x2 {
        Sym2x2::new(self.a22, -self.a12, self.a11)
    }

    pub fn trace(&self) -> f64 {
        self.a11 + self.a22
    }

    pub fn frobenius(&self, other: &Sym2x2) -> f64 {
        self.a11 * other.a11 + 2.0 * self.a12 * other.a12 + self.a22 * other.a22
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.frobenius(self).sqrt()
    }

    /// Eigenvalues `(λ1, λ2)` with `λ1 ≤ λ2`.
    pub fn eig(&self) -> (f64, f64) {
        let mean = 0.5 * (self.a11 + self.a22);
        let half_diff = 0.5 * (self.a11 - self.a22);
        let radius = half_diff.hypot(self.a12);
        (mean - radius, mean + radius)
    }

    /// Matrix-vector product.
    pub fn apply(&self, v: [f64; 2]) -> [f64; 2] {
        [
            self.a11 * v[0] + self.a12 * v[1],
            self.a12 * v[0] + self.a22 * v[1],
        ]
    }

    /// Component `c` in storage order `(a11, a12, a22)`.
    pub fn component(&self, c: usize) -> f64 {
        match c {
            0 => self.a11,
            1 => self.a12,
            2 => self.a22,
            _ => panic!("symmetric 2x2 component index {c} out of range"),
        }
    }

    pub fn from_components(c: [f64; 3]) -> Self {
        Sym2x2::new(c[0], c[1], c[2])
    }

    pub fn components(&self) -> [f64; 3] {
        [self.a11, self.a12, self.a22]
    }
}

impl Add for Sym2x2 {
    type Output = Sym2x2;
    fn add(self, rhs: Sym2x2) -> Sym2x2 {
        Sym2x2::new(self.a11 + rhs.a11, self.a12 + rhs.a12, self.a22 + rhs.a22)
    }
}

impl Sub for Sym2x2 {
    type Output = Sym2x2;
    fn sub(self, rhs: Sym2x2) -> Sym2x2 {
        Sym2x2::new(self.a11 - rhs.a11, self.a12 - rhs.a12, self.a22 - rhs.a22)
    }
}

impl Neg for Sym2x2 {
    type Output = Sym2x2;
    fn neg(self) -> Sym2x2 {
        Sym2x2::new(-self.a11, -self.a12, -self.a22)
    }
}

impl Mul<f64> for Sym2x2 {
    type Output = Sym2x2;
    fn mul(self, s: f64) -> Sym2x2 {
        Sym2x2::new(self.a11 * s, self.a12 * s, self.a22 * s)
    }
}

impl Mul<Sym2x2> for f64 {
    type Output = Sym2x2;
    fn mul(self, a: Sym2x2) -> Sym2x2 {
        a * self
    }
}

pub fn det2(a: &Sym2x2) -> f64 {
    a.det()
}

pub fn cof2(a: &Sym2x2) -> Sym2x2 {
    a.cof()
}

pub fn frobenius(a: &Sym2x2, b: &Sym2x2) -> f64 {
    a.frobenius(b)
}

pub fn eig2(a: &Sym2x2) -> (f64, f64) {
    a.eig()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sym() -> impl Strategy<Value = Sym2x2> {
        (-10.0..10.0f64, -10.0..10.0f64, -10.0..10.0f64).prop_map(|(a, b, c)| Sym2x2::new(a, b, c))
    }

    #[test]
    fn identity_algebra() {
        let id = Sym2x2::IDENTITY;
        assert_eq!(det2(&id), 1.0);
        assert_eq!(cof2(&id), id);
        assert_eq!(eig2(&id), (1.0, 1.0));
    }

    #[test]
    fn midpoint_cofactor_identity() {
        let a = Sym2x2::new(2.0, 0.0, 3.0);
        let b = Sym2x2::IDENTITY;
        assert_eq!(det2(&a) - det2(&b), 5.0);
        let mid = (a + b) * 0.5;
        assert_eq!(frobenius(&cof2(&mid), &(a - b)), 5.0);
    }

    #[test]
    fn eigenvalues_of_small_examples() {
        assert_eq!(eig2(&Sym2x2::new(2.0, 0.0, 3.0)), (2.0, 3.0));
        assert_eq!(eig2(&Sym2x2::new(3.0, 0.0, 2.0)), (2.0, 3.0));
        assert_eq!(eig2(&Sym2x2::new(0.0, 1.0, 0.0)), (-1.0, 1.0));
    }

    proptest! {
        #[test]
        fn cofactor_is_linear(a in sym(), b in sym()) {
            let lhs = cof2(&a) - cof2(&b);
            let rhs = cof2(&(a - b));
            prop_assert!((lhs - rhs).frobenius_norm() <= 1e-13);
        }

        #[test]
        fn euler_identity(a in sym()) {
            prop_assert!((frobenius(&cof2(&a), &a) - 2.0 * det2(&a)).abs() <= 1e-13 * (1.0 + a.frobenius(&a)));
        }

        #[test]
        fn determinant_difference_at_midpoint(a in sym(), b in sym()) {
            let lhs = det2(&a) - det2(&b);
            let rhs = frobenius(&cof2(&((a + b) * 0.5)), &(a - b));
            prop_assert!((lhs - rhs).abs() <= 1e-13 * (1.0 + a.frobenius(&a) + b.frobenius(&b)));
        }

        #[test]
        fn eigenvalues_reproduce_trace_and_det(a in sym()) {
            let (l1, l2) = eig2(&a);
            let scale = 1.0 + a.frobenius(&a);
            prop_assert!(l1 <= l2);
            prop_assert!((l1 + l2 - a.trace()).abs() <= 1e-12 * scale);
            prop_assert!((l1 * l2 - a.det()).abs() <= 1e-12 * scale);
        }
    }
}
