//! Continuous Lagrange elements of degree `k ≥ 2` on triangles, scalar and
//! symmetric-matrix fields over them, and nodal interpolation.
//!
//! The basis function attached to the lattice node with barycentric
//! multi-index `(i, j, l)`, `i + j + l = k`, is
//! `P_i(λ0) P_j(λ1) P_l(λ2)` with `P_m(t) = ∏_{a<m} (k t − a) / (a + 1)`.
//!
//! Global numbering: vertex DOFs first (by vertex id), then `k − 1` DOFs per
//! edge ordered by global edge index and by distance from the edge's lower
//! vertex id, then interior DOFs triangle by triangle.

use std::collections::HashMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::Sym2x2;
use crate::mesh::{on_polygon_boundary, Mesh, Triangle};
use crate::quadrature::QuadratureRule;

/// Basis values and barycentric derivatives at one point.
#[derive(Clone, Debug)]
pub struct BasisPoint {
    pub values: Vec<f64>,
    /// `∂φ_i / ∂λ_v`
    pub dlam: Vec<[f64; 3]>,
    /// `∂²φ_i / ∂λ_v ∂λ_w`
    pub d2lam: Vec<[[f64; 3]; 3]>,
}

/// The degree-`k` Lagrange element on the reference triangle.
#[derive(Clone, Debug)]
pub struct ReferenceElement {
    degree: usize,
    nodes: Vec<[usize; 3]>,
}

impl ReferenceElement {
    pub fn new(degree: usize) -> Self {
        let k = degree;
        let mut nodes = Vec::with_capacity((k + 1) * (k + 2) / 2);
        for v in 0..3 {
            let mut m = [0; 3];
            m[v] = k;
            nodes.push(m);
        }
        for e in 0..3 {
            let (a, b) = (e, (e + 1) % 3);
            for j in 1..k {
                let mut m = [0; 3];
                m[a] = k - j;
                m[b] = j;
                nodes.push(m);
            }
        }
        for i in 1..k {
            for j in 1..k - i {
                nodes.push([i, j, k - i - j]);
            }
        }
        Self { degree, nodes }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_interior(&self) -> usize {
        let k = self.degree;
        (k - 1) * (k.saturating_sub(2)) / 2
    }

    /// Barycentric multi-index of local node `i`.
    pub fn node(&self, i: usize) -> [usize; 3] {
        self.nodes[i]
    }

    pub fn node_barycentric(&self, i: usize) -> [f64; 3] {
        self.nodes[i].map(|m| m as f64 / self.degree as f64)
    }

    /// `P_m(t)` with its first and second derivatives.
    fn factor(&self, m: usize, t: f64) -> (f64, f64, f64) {
        let k = self.degree as f64;
        let (mut p, mut dp, mut d2p) = (1.0, 0.0, 0.0);
        for a in 0..m {
            let denom = (a + 1) as f64;
            let q = (k * t - a as f64) / denom;
            let dq = k / denom;
            d2p = d2p * q + 2.0 * dp * dq;
            dp = dp * q + p * dq;
            p *= q;
        }
        (p, dp, d2p)
    }

    pub fn evaluate(&self, lam: [f64; 3]) -> BasisPoint {
        let n = self.nodes.len();
        let mut out = BasisPoint {
            values: Vec::with_capacity(n),
            dlam: Vec::with_capacity(n),
            d2lam: Vec::with_capacity(n),
        };
        for node in &self.nodes {
            let f = [0, 1, 2].map(|v| self.factor(node[v], lam[v]));
            let value = f[0].0 * f[1].0 * f[2].0;
            let mut d = [0.0; 3];
            let mut d2 = [[0.0; 3]; 3];
            for v in 0..3 {
                let (o1, o2) = ((v + 1) % 3, (v + 2) % 3);
                d[v] = f[v].1 * f[o1].0 * f[o2].0;
                d2[v][v] = f[v].2 * f[o1].0 * f[o2].0;
                for w in 0..3 {
                    if w != v {
                        let other = 3 - v - w;
                        d2[v][w] = f[v].1 * f[w].1 * f[other].0;
                    }
                }
            }
            out.values.push(value);
            out.dlam.push(d);
            out.d2lam.push(d2);
        }
        out
    }

    pub fn tabulate(&self, rule: &QuadratureRule) -> Vec<BasisPoint> {
        rule.points.iter().map(|&p| self.evaluate(p)).collect()
    }
}

/// Affine geometry of one triangle.
#[derive(Clone, Copy, Debug)]
pub struct ElementGeometry {
    pub points: [[f64; 2]; 3],
    pub area: f64,
    /// Gradients of the barycentric coordinates.
    pub grad_lambda: [[f64; 2]; 3],
}

impl ElementGeometry {
    pub fn new(points: [[f64; 2]; 3]) -> Self {
        let [p0, p1, p2] = points;
        let twice = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p1[1] - p0[1]) * (p2[0] - p0[0]);
        let grad_lambda = [
            [(p1[1] - p2[1]) / twice, (p2[0] - p1[0]) / twice],
            [(p2[1] - p0[1]) / twice, (p0[0] - p2[0]) / twice],
            [(p0[1] - p1[1]) / twice, (p1[0] - p0[0]) / twice],
        ];
        Self {
            points,
            area: 0.5 * twice,
            grad_lambda,
        }
    }

    pub fn map(&self, lam: [f64; 3]) -> [f64; 2] {
        let p = &self.points;
        [
            lam[0] * p[0][0] + lam[1] * p[1][0] + lam[2] * p[2][0],
            lam[0] * p[0][1] + lam[1] * p[1][1] + lam[2] * p[2][1],
        ]
    }

    pub fn gradient(&self, dlam: &[f64; 3]) -> [f64; 2] {
        let g = &self.grad_lambda;
        [
            dlam[0] * g[0][0] + dlam[1] * g[1][0] + dlam[2] * g[2][0],
            dlam[0] * g[0][1] + dlam[1] * g[1][1] + dlam[2] * g[2][1],
        ]
    }

    pub fn hessian(&self, d2lam: &[[f64; 3]; 3]) -> Sym2x2 {
        let g = &self.grad_lambda;
        let mut h = Sym2x2::ZERO;
        for v in 0..3 {
            for w in 0..3 {
                let c = d2lam[v][w];
                h.a11 += c * g[v][0] * g[w][0];
                h.a12 += c * g[v][0] * g[w][1];
                h.a22 += c * g[v][1] * g[w][1];
            }
        }
        h
    }
}

/// Degree-`k` continuous Lagrange space `V_h`. The matrix space `Σ_h` reuses
/// this DOF map for each of its three components.
#[derive(Debug)]
pub struct LagrangeSpace {
    mesh: Arc<Mesh>,
    reference: ReferenceElement,
    geometry: Vec<ElementGeometry>,
    dof_coordinates: Vec<[f64; 2]>,
    cell_dofs: Vec<Vec<usize>>,
    boundary_dofs: Vec<usize>,
    interior_dofs: Vec<usize>,
    is_boundary: Vec<bool>,
    num_edges: usize,
}

impl LagrangeSpace {
    pub fn new(mesh: Arc<Mesh>, degree: usize) -> Result<Arc<Self>> {
        if degree < 2 {
            return Err(Error::InvalidArgument(format!(
                "Lagrange degree must be at least 2, got {degree}"
            )));
        }
        let reference = ReferenceElement::new(degree);
        let k = degree;
        let edges = mesh.edges();
        let edge_index: HashMap<(usize, usize), usize> =
            edges.iter().enumerate().map(|(i, &e)| (e, i)).collect();
        let nv = mesh.num_vertices();
        let ne = edges.len();
        let n_int = reference.num_interior();
        let ndofs = nv + ne * (k - 1) + mesh.num_triangles() * n_int;

        let geometry: Vec<ElementGeometry> = mesh
            .triangles
            .iter()
            .map(|t| ElementGeometry::new(mesh.triangle_points(t)))
            .collect();
        let mut dof_coordinates = vec![[f64::NAN; 2]; ndofs];
        let mut cell_dofs = Vec::with_capacity(mesh.num_triangles());
        for (t, tri) in mesh.triangles.iter().enumerate() {
            let mut dofs = Vec::with_capacity(reference.num_nodes());
            for v in 0..3 {
                dofs.push(tri.vertices[v]);
            }
            for e in 0..3 {
                let (a, b) = (tri.vertices[e], tri.vertices[(e + 1) % 3]);
                let gi = edge_index[&(a.min(b), a.max(b))];
                for j in 1..k {
                    let steps_from_lower = if a < b { j } else { k - j };
                    dofs.push(nv + gi * (k - 1) + steps_from_lower - 1);
                }
            }
            for i in 0..n_int {
                dofs.push(nv + ne * (k - 1) + t * n_int + i);
            }
            for (local, &d) in dofs.iter().enumerate() {
                dof_coordinates[d] = geometry[t].map(reference.node_barycentric(local));
            }
            cell_dofs.push(dofs);
        }

        let mut is_boundary = vec![false; ndofs];
        for be in &mesh.boundary_edges {
            let dofs = &cell_dofs[be.triangle];
            let e = be.local_edge;
            is_boundary[dofs[e]] = true;
            is_boundary[dofs[(e + 1) % 3]] = true;
            for j in 0..k - 1 {
                is_boundary[dofs[3 + e * (k - 1) + j]] = true;
            }
        }
        let boundary_dofs = (0..ndofs).filter(|&i| is_boundary[i]).collect();
        let interior_dofs = (0..ndofs).filter(|&i| !is_boundary[i]).collect();

        Ok(Arc::new(Self {
            mesh,
            reference,
            geometry,
            dof_coordinates,
            cell_dofs,
            boundary_dofs,
            interior_dofs,
            is_boundary,
            num_edges: ne,
        }))
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn degree(&self) -> usize {
        self.reference.degree
    }

    pub fn reference(&self) -> &ReferenceElement {
        &self.reference
    }

    pub fn num_dofs(&self) -> usize {
        self.dof_coordinates.len()
    }

    pub fn num_edges(&self) -> usize {
        self.num_edges
    }

    pub fn dof_coordinates(&self) -> &[[f64; 2]] {
        &self.dof_coordinates
    }

    pub fn cell_dofs(&self, triangle: usize) -> &[usize] {
        &self.cell_dofs[triangle]
    }

    pub fn geometry(&self, triangle: usize) -> &ElementGeometry {
        &self.geometry[triangle]
    }

    pub fn boundary_dofs(&self) -> &[usize] {
        &self.boundary_dofs
    }

    pub fn interior_dofs(&self) -> &[usize] {
        &self.interior_dofs
    }

    pub fn is_boundary(&self, dof: usize) -> bool {
        self.is_boundary[dof]
    }

    /// Checks that the boundary DOF set matches the DOFs located on `∂Ω`.
    pub fn check_boundary_dofs(&self) -> bool {
        let corners = self.mesh.domain.corners();
        self.dof_coordinates
            .iter()
            .enumerate()
            .all(|(i, &p)| on_polygon_boundary(&corners, p) == self.is_boundary[i])
    }

    fn triangle_checked(&self, triangle: usize) -> Result<&Triangle> {
        self.mesh.triangle(triangle)
    }

    /// Scalar coefficient vector for `Σ_h` component layout: `c * N + i`.
    pub fn matrix_dofs(&self) -> usize {
        3 * self.num_dofs()
    }
}

/// Value, gradient and element Hessian of a scalar field at a point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointEval {
    pub value: f64,
    pub gradient: [f64; 2],
    pub hessian: Sym2x2,
}

#[derive(Clone, Debug)]
pub struct ScalarField {
    space: Arc<LagrangeSpace>,
    coefficients: Vec<f64>,
}

impl ScalarField {
    pub fn new(space: Arc<LagrangeSpace>, coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.len() != space.num_dofs() {
            return Err(Error::DimensionMismatch(format!(
                "scalar field has {} coefficients, space has {} DOFs",
                coefficients.len(),
                space.num_dofs()
            )));
        }
        Ok(Self {
            space,
            coefficients,
        })
    }

    pub fn zeros(space: Arc<LagrangeSpace>) -> Self {
        let n = space.num_dofs();
        Self {
            space,
            coefficients: vec![0.0; n],
        }
    }

    pub fn space(&self) -> &Arc<LagrangeSpace> {
        &self.space
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn coefficients_mut(&mut self) -> &mut [f64] {
        &mut self.coefficients
    }

    pub fn into_coefficients(self) -> Vec<f64> {
        self.coefficients
    }

    /// `self + s * other`.
    pub fn axpy(&self, s: f64, other: &ScalarField) -> ScalarField {
        let coefficients = self
            .coefficients
            .iter()
            .zip(&other.coefficients)
            .map(|(a, b)| a + s * b)
            .collect();
        ScalarField {
            space: self.space.clone(),
            coefficients,
        }
    }

    pub fn scaled(&self, s: f64) -> ScalarField {
        ScalarField {
            space: self.space.clone(),
            coefficients: self.coefficients.iter().map(|c| s * c).collect(),
        }
    }

    pub fn evaluate(&self, triangle: usize, lam: [f64; 3]) -> Result<PointEval> {
        self.space.triangle_checked(triangle)?;
        let basis = self.space.reference.evaluate(lam);
        Ok(self.evaluate_with(triangle, &basis))
    }

    /// Evaluation with a precomputed reference tabulation.
    pub fn evaluate_with(&self, triangle: usize, basis: &BasisPoint) -> PointEval {
        let geo = &self.space.geometry[triangle];
        let dofs = &self.space.cell_dofs[triangle];
        let mut value = 0.0;
        let mut dlam = [0.0; 3];
        let mut d2lam = [[0.0; 3]; 3];
        for (i, &d) in dofs.iter().enumerate() {
            let c = self.coefficients[d];
            value += c * basis.values[i];
            for v in 0..3 {
                dlam[v] += c * basis.dlam[i][v];
                for w in 0..3 {
                    d2lam[v][w] += c * basis.d2lam[i][v][w];
                }
            }
        }
        PointEval {
            value,
            gradient: geo.gradient(&dlam),
            hessian: geo.hessian(&d2lam),
        }
    }
}

/// A symmetric matrix field with components `(c11, c12, c22)` in `V_h`.
#[derive(Clone, Debug)]
pub struct MatrixField {
    space: Arc<LagrangeSpace>,
    components: [Vec<f64>; 3],
}

impl MatrixField {
    pub fn new(space: Arc<LagrangeSpace>, components: [Vec<f64>; 3]) -> Result<Self> {
        if components.iter().any(|c| c.len() != space.num_dofs()) {
            return Err(Error::DimensionMismatch(
                "matrix field component length differs from the DOF count".into(),
            ));
        }
        Ok(Self { space, components })
    }

    pub fn zeros(space: Arc<LagrangeSpace>) -> Self {
        let n = space.num_dofs();
        Self {
            space,
            components: [vec![0.0; n], vec![0.0; n], vec![0.0; n]],
        }
    }

    /// The constant field equal to `a` everywhere.
    pub fn constant(space: Arc<LagrangeSpace>, a: Sym2x2) -> Self {
        let n = space.num_dofs();
        Self {
            space,
            components: a.components().map(|c| vec![c; n]),
        }
    }

    /// Builds a field from the stacked layout `[c11; c12; c22]`.
    pub fn from_stacked(space: Arc<LagrangeSpace>, stacked: &[f64]) -> Result<Self> {
        let n = space.num_dofs();
        if stacked.len() != 3 * n {
            return Err(Error::DimensionMismatch(format!(
                "stacked matrix field has length {}, expected {}",
                stacked.len(),
                3 * n
            )));
        }
        let components = [0, 1, 2].map(|c| stacked[c * n..(c + 1) * n].to_vec());
        Ok(Self { space, components })
    }

    pub fn stacked(&self) -> Vec<f64> {
        self.components.concat()
    }

    pub fn space(&self) -> &Arc<LagrangeSpace> {
        &self.space
    }

    pub fn component(&self, c: usize) -> &[f64] {
        &self.components[c]
    }

    pub fn components(&self) -> &[Vec<f64>; 3] {
        &self.components
    }

    /// Pointwise value at DOF `i`.
    pub fn nodal_value(&self, i: usize) -> Sym2x2 {
        Sym2x2::new(self.components[0][i], self.components[1][i], self.components[2][i])
    }

    pub fn axpy(&self, s: f64, other: &MatrixField) -> MatrixField {
        let components = [0, 1, 2].map(|c| {
            self.components[c]
                .iter()
                .zip(&other.components[c])
                .map(|(a, b)| a + s * b)
                .collect()
        });
        MatrixField {
            space: self.space.clone(),
            components,
        }
    }

    pub fn scaled(&self, s: f64) -> MatrixField {
        MatrixField {
            space: self.space.clone(),
            components: [0, 1, 2].map(|c| self.components[c].iter().map(|v| s * v).collect()),
        }
    }

    pub fn evaluate(&self, triangle: usize, lam: [f64; 3]) -> Result<Sym2x2> {
        self.space.triangle_checked(triangle)?;
        let basis = self.space.reference.evaluate(lam);
        Ok(self.evaluate_with(triangle, &basis))
    }

    pub fn evaluate_with(&self, triangle: usize, basis: &BasisPoint) -> Sym2x2 {
        let dofs = &self.space.cell_dofs[triangle];
        let mut out = [0.0; 3];
        for (i, &d) in dofs.iter().enumerate() {
            for (c, o) in out.iter_mut().enumerate() {
                *o += self.components[c][d] * basis.values[i];
            }
        }
        Sym2x2::from_components(out)
    }

    /// Gradients of the three components.
    pub fn gradients_with(&self, triangle: usize, basis: &BasisPoint) -> [[f64; 2]; 3] {
        let geo = &self.space.geometry[triangle];
        let dofs = &self.space.cell_dofs[triangle];
        let mut dlam = [[0.0; 3]; 3];
        for (i, &d) in dofs.iter().enumerate() {
            for (c, dl) in dlam.iter_mut().enumerate() {
                let coef = self.components[c][d];
                for v in 0..3 {
                    dl[v] += coef * basis.dlam[i][v];
                }
            }
        }
        dlam.map(|dl| geo.gradient(&dl))
    }
}

fn checked(x: f64, y: f64, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Evaluation {
            x,
            y,
            reason: format!("non-finite value {v}"),
        })
    }
}

/// Nodal interpolant `I_h f`.
pub fn interpolate<F: Fn(f64, f64) -> f64>(f: F, space: &Arc<LagrangeSpace>) -> Result<ScalarField> {
    let coefficients = space
        .dof_coordinates
        .iter()
        .map(|&[x, y]| checked(x, y, f(x, y)))
        .collect::<Result<Vec<_>>>()?;
    ScalarField::new(space.clone(), coefficients)
}

/// Componentwise nodal interpolant of a symmetric matrix function.
pub fn interpolate_matrix<F: Fn(f64, f64) -> Sym2x2>(
    f: F,
    space: &Arc<LagrangeSpace>,
) -> Result<MatrixField> {
    let n = space.num_dofs();
    let mut components = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    for (i, &[x, y]) in space.dof_coordinates.iter().enumerate() {
        let a = f(x, y);
        for (c, comp) in components.iter_mut().enumerate() {
            comp[i] = checked(x, y, a.component(c))?;
        }
    }
    MatrixField::new(space.clone(), components)
}
