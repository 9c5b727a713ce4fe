//! Quadrature on the reference triangle and on the unit interval.
//!
//! Low degrees use the classical symmetric centroid and three-point rules.
//! Higher degrees use the Stroud conical product of Gauss–Legendre rules on the
//! collapsed square; all weights are positive and all points interior.

use crate::error::{Error, Result};

/// Highest triangle exactness degree offered by [`make_quadrature`].
pub const MAX_EXACTNESS: usize = 40;

#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureRule {
    /// Barycentric coordinates `(λ0, λ1, λ2)`.
    pub points: Vec<[f64; 3]>,
    /// Normalized so that they sum to one; multiply by the triangle area.
    pub weights: Vec<f64>,
    pub exactness_degree: usize,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Integral over the reference triangle `(0,0), (1,0), (0,1)`.
    pub fn integrate_reference<F: Fn(f64, f64) -> f64>(&self, f: F) -> f64 {
        0.5 * self
            .points
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| w * f(p[1], p[2]))
            .sum::<f64>()
    }
}

/// Gauss–Legendre rule on `[0, 1]` with `n` points (exact to degree `2n - 1`).
#[derive(Clone, Debug, PartialEq)]
pub struct LineRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
    pub exactness_degree: usize,
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    if n == 1 {
        return (vec![0.0], vec![2.0]);
    }
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() <= 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

pub fn make_line_quadrature(min_exactness: usize) -> LineRule {
    let n = min_exactness / 2 + 1;
    let (x, w) = gauss_legendre(n);
    LineRule {
        points: x.iter().map(|t| 0.5 * (t + 1.0)).collect(),
        weights: w.iter().map(|v| 0.5 * v).collect(),
        exactness_degree: 2 * n - 1,
    }
}

pub fn make_quadrature(min_exactness: usize) -> Result<QuadratureRule> {
    if min_exactness > MAX_EXACTNESS {
        return Err(Error::QuadratureUnavailable {
            requested: min_exactness,
            available: MAX_EXACTNESS,
        });
    }
    Ok(match min_exactness {
        0 | 1 => QuadratureRule {
            points: vec![[1.0 / 3.0; 3]],
            weights: vec![1.0],
            exactness_degree: 1,
        },
        2 => {
            let (a, b) = (2.0 / 3.0, 1.0 / 6.0);
            QuadratureRule {
                points: vec![[a, b, b], [b, a, b], [b, b, a]],
                weights: vec![1.0 / 3.0; 3],
                exactness_degree: 2,
            }
        }
        d => conical_product(d),
    })
}

fn conical_product(degree: usize) -> QuadratureRule {
    // x = u (1 - v), y = v, Jacobian (1 - v): degree d in u, d + 1 in v
    let nu = (degree + 2) / 2;
    let nv = (degree + 3) / 2;
    let (xu, wu) = gauss_legendre(nu);
    let (xv, wv) = gauss_legendre(nv);
    let mut points = Vec::with_capacity(nu * nv);
    let mut weights = Vec::with_capacity(nu * nv);
    for (tv, &wvi) in xv.iter().zip(&wv) {
        let v = 0.5 * (tv + 1.0);
        for (tu, &wui) in xu.iter().zip(&wu) {
            let u = 0.5 * (tu + 1.0);
            let x = u * (1.0 - v);
            let y = v;
            points.push([1.0 - x - y, x, y]);
            // 0.25 from both interval maps, 2 to normalize by the reference area
            weights.push(0.5 * wui * wvi * (1.0 - v));
        }
    }
    QuadratureRule {
        points,
        weights,
        exactness_degree: (2 * nu - 1).min(2 * nv - 2),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: u32) -> f64 {
        (1..=n).map(f64::from).product()
    }

    /// ∫ x^a y^b over the reference triangle.
    fn monomial_integral(a: u32, b: u32) -> f64 {
        factorial(a) * factorial(b) / factorial(a + b + 2)
    }

    #[test]
    fn every_rule_sums_to_one_and_is_exact() {
        for d in 0..=MAX_EXACTNESS {
            let rule = make_quadrature(d).unwrap();
            assert!(rule.exactness_degree >= d);
            let sum: f64 = rule.weights.iter().sum();
            assert!((sum - 1.0).abs() <= 1e-14, "degree {d}: weights sum {sum}");
            assert!(rule.weights.iter().all(|&w| w > 0.0));
            for p in &rule.points {
                assert!(p.iter().all(|&l| l > 0.0));
                assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
            }
            let deg = rule.exactness_degree as u32;
            for a in 0..=deg {
                for b in 0..=deg - a {
                    let exact = monomial_integral(a, b);
                    let got = rule.integrate_reference(|x, y| x.powi(a as i32) * y.powi(b as i32));
                    assert!(
                        (got - exact).abs() <= 1e-12 * exact,
                        "degree {d}: x^{a} y^{b} gave {got}, expected {exact}"
                    );
                }
            }
        }
    }

    #[test]
    fn centroid_rule_integrates_x() {
        let rule = make_quadrature(1).unwrap();
        assert_eq!(rule.len(), 1);
        assert!((rule.integrate_reference(|x, _| x) - 1.0 / 6.0).abs() < 1e-16);
    }

    #[test]
    fn x2y2_with_degree_six() {
        let rule = make_quadrature(6).unwrap();
        let got = rule.integrate_reference(|x, y| x * x * y * y);
        assert!((got - 1.0 / 180.0).abs() <= 1e-12 / 180.0);
    }

    #[test]
    fn rejects_degree_above_table() {
        assert!(matches!(
            make_quadrature(MAX_EXACTNESS + 1),
            Err(Error::QuadratureUnavailable { .. })
        ));
    }

    #[test]
    fn line_rules() {
        for d in 0..20 {
            let rule = make_line_quadrature(d);
            assert!(rule.exactness_degree >= d);
            for p in 0..=rule.exactness_degree as i32 {
                let got: f64 = rule.points.iter().zip(&rule.weights).map(|(t, w)| w * t.powi(p)).sum();
                assert!((got - 1.0 / (p as f64 + 1.0)).abs() < 1e-14);
            }
        }
    }
}
