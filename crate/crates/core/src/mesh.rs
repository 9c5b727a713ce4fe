//! Conforming triangulations of convex polygons.
//!
//! The unit square is meshed as an `n × n` grid of squares cut along the same
//! diagonal. A general convex polygon is fanned from its centroid and each fan
//! triangle is split into `n²` congruent children. Uniform refinement splits
//! every triangle into four through its edge midpoints.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Vertex {
    pub id: usize,
    pub x: f64,
    pub y: f64,
}

impl Vertex {
    pub fn coords(&self) -> [f64; 2] {
        [self.x, self.y]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Triangle {
    pub id: usize,
    /// Counterclockwise vertex ids.
    pub vertices: [usize; 3],
    pub area: f64,
}

/// A triangle edge on `∂Ω`. Local edge `e` joins local vertices `e` and `(e + 1) % 3`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryEdge {
    pub triangle: usize,
    pub local_edge: usize,
    pub vertices: [usize; 2],
    pub normal: [f64; 2],
    pub length: f64,
}

/// Domain descriptor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Domain {
    UnitSquare,
    /// Convex polygon given by its vertices in counterclockwise order.
    Polygon { vertices: Vec<[f64; 2]> },
}

impl Domain {
    pub fn corners(&self) -> Vec<[f64; 2]> {
        match self {
            Domain::UnitSquare => vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
            Domain::Polygon { vertices } => vertices.clone(),
        }
    }

    pub fn area(&self) -> f64 {
        polygon_signed_area(&self.corners())
    }

    /// Rejects degenerate, clockwise or non-convex polygons.
    pub fn validate(&self) -> Result<()> {
        let pts = self.corners();
        if pts.len() < 3 {
            return Err(Error::InvalidMesh(format!(
                "polygon needs at least 3 vertices, got {}",
                pts.len()
            )));
        }
        if pts.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::InvalidMesh("polygon has non-finite coordinates".into()));
        }
        let scale = pts
            .iter()
            .flat_map(|p| p.iter())
            .fold(0.0f64, |m, c| m.max(c.abs()))
            .max(1.0);
        let m = pts.len();
        for i in 0..m {
            let (a, b, c) = (pts[i], pts[(i + 1) % m], pts[(i + 2) % m]);
            let turn = cross(sub(b, a), sub(c, b));
            if turn <= 1e-12 * scale * scale {
                return Err(Error::InvalidMesh(format!(
                    "polygon is not strictly convex and counterclockwise at vertex {}",
                    (i + 1) % m
                )));
            }
        }
        Ok(())
    }

    pub fn contains(&self, p: [f64; 2], tol: f64) -> bool {
        let pts = self.corners();
        let m = pts.len();
        (0..m).all(|i| {
            let (a, b) = (pts[i], pts[(i + 1) % m]);
            let d = sub(b, a);
            cross(d, sub(p, a)) >= -tol * d[0].hypot(d[1])
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mesh {
    pub vertices: Vec<Vertex>,
    pub triangles: Vec<Triangle>,
    pub boundary_edges: Vec<BoundaryEdge>,
    /// Largest triangle diameter.
    pub h: f64,
    /// Smallest inradius / diameter ratio.
    pub shape_regularity: f64,
    pub domain: Domain,
}

fn sub(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

fn cross(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn polygon_signed_area(pts: &[[f64; 2]]) -> f64 {
    let m = pts.len();
    0.5 * (0..m).map(|i| cross(pts[i], pts[(i + 1) % m])).sum::<f64>()
}

pub fn build_structured_mesh(n: usize, domain: &Domain) -> Result<Mesh> {
    if n == 0 {
        return Err(Error::InvalidArgument("mesh resolution n must be at least 1".into()));
    }
    domain.validate()?;
    match domain {
        Domain::UnitSquare => Ok(unit_square(n)),
        Domain::Polygon { vertices } => polygon_fan(n, vertices, domain),
    }
}

fn unit_square(n: usize) -> Mesh {
    let m = n + 1;
    let h = 1.0 / n as f64;
    let mut points = Vec::with_capacity(m * m);
    for j in 0..m {
        for i in 0..m {
            points.push([i as f64 * h, j as f64 * h]);
        }
    }
    let mut tris = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let v00 = j * m + i;
            let v10 = v00 + 1;
            let v01 = v00 + m;
            let v11 = v01 + 1;
            // both halves share the diagonal v00-v11
            tris.push([v00, v10, v11]);
            tris.push([v00, v11, v01]);
        }
    }
    Mesh::from_parts(points, tris, Domain::UnitSquare)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum LatticeKey {
    Corner(usize),
    Edge(usize, usize, usize),
    Interior(usize, usize, usize),
}

fn polygon_fan(n: usize, corners: &[[f64; 2]], domain: &Domain) -> Result<Mesh> {
    let m = corners.len();
    let centroid = {
        let (sx, sy) = corners.iter().fold((0.0, 0.0), |(a, b), p| (a + p[0], b + p[1]));
        [sx / m as f64, sy / m as f64]
    };
    // coarse vertices: polygon corners 0..m, centroid m
    let mut coarse = corners.to_vec();
    coarse.push(centroid);
    let coarse_tris: Vec<[usize; 3]> = (0..m).map(|i| [m, i, (i + 1) % m]).collect();

    let mut index: HashMap<LatticeKey, usize> = HashMap::new();
    let mut points: Vec<[f64; 2]> = Vec::new();
    let mut key_for = |t: usize, tri: [usize; 3], a: usize, b: usize| -> usize {
        // lattice point (a, b, n-a-b) in barycentric units of 1/n
        let c = n - a - b;
        let bary = [a, b, c];
        let nonzero: Vec<usize> = (0..3).filter(|&i| bary[i] > 0).collect();
        let key = match nonzero.len() {
            1 => LatticeKey::Corner(tri[nonzero[0]]),
            2 => {
                let (p, q) = (nonzero[0], nonzero[1]);
                let (lo, hi, steps_from_lo) = if tri[p] < tri[q] {
                    (tri[p], tri[q], bary[q])
                } else {
                    (tri[q], tri[p], bary[p])
                };
                LatticeKey::Edge(lo, hi, steps_from_lo)
            }
            _ => LatticeKey::Interior(t, a, b),
        };
        *index.entry(key).or_insert_with(|| {
            let w = [a as f64 / n as f64, b as f64 / n as f64, c as f64 / n as f64];
            let p = [
                w[0] * coarse[tri[0]][0] + w[1] * coarse[tri[1]][0] + w[2] * coarse[tri[2]][0],
                w[0] * coarse[tri[0]][1] + w[1] * coarse[tri[1]][1] + w[2] * coarse[tri[2]][1],
            ];
            points.push(p);
            points.len() - 1
        })
    };

    let mut tris = Vec::with_capacity(coarse_tris.len() * n * n);
    for (t, &tri) in coarse_tris.iter().enumerate() {
        // point at lattice (i, j): weight i/n on vertex 1, j/n on vertex 2
        let mut id = |i: usize, j: usize| key_for(t, tri, n - i - j, i);
        for j in 0..n {
            for i in 0..n - j {
                let a = id(i, j);
                let b = id(i + 1, j);
                let c = id(i, j + 1);
                tris.push([a, b, c]);
                if i + j + 1 < n {
                    let d = id(i + 1, j + 1);
                    tris.push([b, d, c]);
                }
            }
        }
    }
    let mesh = Mesh::from_parts(points, tris, domain.clone());
    Ok(mesh)
}

impl Mesh {
    /// Builds a mesh from raw points and triangles, orienting every triangle
    /// counterclockwise and extracting the boundary.
    pub fn from_parts(points: Vec<[f64; 2]>, tris: Vec<[usize; 3]>, domain: Domain) -> Mesh {
        let vertices: Vec<Vertex> = points
            .iter()
            .enumerate()
            .map(|(id, p)| Vertex { id, x: p[0], y: p[1] })
            .collect();
        let triangles: Vec<Triangle> = tris
            .into_iter()
            .enumerate()
            .map(|(id, mut v)| {
                let signed = 0.5
                    * cross(
                        sub(points[v[1]], points[v[0]]),
                        sub(points[v[2]], points[v[0]]),
                    );
                if signed < 0.0 {
                    v.swap(1, 2);
                }
                Triangle {
                    id,
                    vertices: v,
                    area: signed.abs(),
                }
            })
            .collect();

        let mut edge_count: HashMap<(usize, usize), usize> = HashMap::new();
        for t in &triangles {
            for e in 0..3 {
                let (a, b) = (t.vertices[e], t.vertices[(e + 1) % 3]);
                *edge_count.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        let mut boundary_edges = Vec::new();
        for t in &triangles {
            for e in 0..3 {
                let (a, b) = (t.vertices[e], t.vertices[(e + 1) % 3]);
                if edge_count[&(a.min(b), a.max(b))] == 1 {
                    let d = sub(points[b], points[a]);
                    let length = d[0].hypot(d[1]);
                    boundary_edges.push(BoundaryEdge {
                        triangle: t.id,
                        local_edge: e,
                        vertices: [a, b],
                        normal: [d[1] / length, -d[0] / length],
                        length,
                    });
                }
            }
        }

        let mut h = 0.0f64;
        let mut shape = f64::INFINITY;
        for t in &triangles {
            let p = t.vertices.map(|v| points[v]);
            let l = [dist(p[0], p[1]), dist(p[1], p[2]), dist(p[2], p[0])];
            let diam = l[0].max(l[1]).max(l[2]);
            let inradius = 2.0 * t.area / (l[0] + l[1] + l[2]);
            h = h.max(diam);
            shape = shape.min(inradius / diam);
        }
        Mesh {
            vertices,
            triangles,
            boundary_edges,
            h,
            shape_regularity: shape,
            domain,
        }
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn triangle(&self, id: usize) -> Result<&Triangle> {
        self.triangles.get(id).ok_or(Error::TriangleOutOfRange {
            index: id,
            count: self.triangles.len(),
        })
    }

    pub fn triangle_points(&self, t: &Triangle) -> [[f64; 2]; 3] {
        t.vertices.map(|v| self.vertices[v].coords())
    }

    pub fn diameter(&self, t: &Triangle) -> f64 {
        let p = self.triangle_points(t);
        dist(p[0], p[1]).max(dist(p[1], p[2])).max(dist(p[2], p[0]))
    }

    pub fn total_area(&self) -> f64 {
        self.triangles.iter().map(|t| t.area).sum()
    }

    /// Ratio of the largest to the smallest triangle diameter.
    pub fn quasi_uniformity(&self) -> f64 {
        let (lo, hi) = self.triangles.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), t| {
            let d = self.diameter(t);
            (lo.min(d), hi.max(d))
        });
        hi / lo
    }

    /// Undirected edges `(a, b)` with `a < b`, sorted, each with its global index.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut edges: Vec<(usize, usize)> = self
            .triangles
            .iter()
            .flat_map(|t| {
                (0..3).map(move |e| {
                    let (a, b) = (t.vertices[e], t.vertices[(e + 1) % 3]);
                    (a.min(b), a.max(b))
                })
            })
            .collect();
        edges.sort_unstable();
        edges.dedup();
        edges
    }

    /// Checks orientation, conformity, area partition and normal invariants.
    pub fn check(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidMesh(msg));
        for (i, v) in self.vertices.iter().enumerate() {
            if v.id != i {
                return fail(format!("vertex ids not contiguous at {i}"));
            }
            if !self.domain.contains(v.coords(), 1e-12) {
                return fail(format!("vertex {i} outside the domain"));
            }
        }
        for t in &self.triangles {
            let p = self.triangle_points(t);
            let signed = 0.5 * cross(sub(p[1], p[0]), sub(p[2], p[0]));
            if !(signed > 0.0) {
                return fail(format!("triangle {} not counterclockwise", t.id));
            }
            if (signed - t.area).abs() > 1e-14 * signed {
                return fail(format!("triangle {} stores a stale area", t.id));
            }
        }
        // conforming: every interior edge is shared by exactly two triangles with
        // opposite orientation, and no vertex lies inside another triangle's edge
        let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
        for t in &self.triangles {
            for e in 0..3 {
                let key = (t.vertices[e], t.vertices[(e + 1) % 3]);
                if directed.insert(key, t.id).is_some() {
                    return fail(format!("edge {key:?} used twice with the same orientation"));
                }
            }
        }
        let area_domain = self.domain.area();
        if (self.total_area() - area_domain).abs() > 1e-12 * area_domain {
            return fail(format!(
                "triangle areas sum to {} but the domain has area {}",
                self.total_area(),
                area_domain
            ));
        }
        // with exact area coverage, a hanging node would leave a boundary edge
        // strictly inside the domain
        for be in &self.boundary_edges {
            let t = &self.triangles[be.triangle];
            let p = self.triangle_points(t);
            let a = self.vertices[be.vertices[0]].coords();
            let b = self.vertices[be.vertices[1]].coords();
            let mid = [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0];
            let centroid = [
                (p[0][0] + p[1][0] + p[2][0]) / 3.0,
                (p[0][1] + p[1][1] + p[2][1]) / 3.0,
            ];
            let nn = be.normal[0].hypot(be.normal[1]);
            if (nn - 1.0).abs() > 1e-14 {
                return fail(format!("boundary normal of triangle {} not unit", t.id));
            }
            let out = sub(mid, centroid);
            if out[0] * be.normal[0] + out[1] * be.normal[1] <= 0.0 {
                return fail(format!("boundary normal of triangle {} points inward", t.id));
            }
            if !on_polygon_boundary(&self.domain.corners(), mid) {
                return fail(format!("boundary edge of triangle {} is interior (hanging node)", t.id));
            }
        }
        Ok(())
    }
}

pub(crate) fn on_polygon_boundary(corners: &[[f64; 2]], p: [f64; 2]) -> bool {
    let m = corners.len();
    (0..m).any(|i| {
        let (a, b) = (corners[i], corners[(i + 1) % m]);
        let d = sub(b, a);
        let len = d[0].hypot(d[1]);
        let off = cross(d, sub(p, a)).abs() / len;
        let t = (d[0] * (p[0] - a[0]) + d[1] * (p[1] - a[1])) / (len * len);
        off <= 1e-12 * len.max(1.0) && (-1e-12..=1.0 + 1e-12).contains(&t)
    })
}

/// Splits every triangle into four congruent children through edge midpoints.
pub fn refine(mesh: &Mesh) -> Mesh {
    let mut points: Vec<[f64; 2]> = mesh.vertices.iter().map(Vertex::coords).collect();
    let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
    let mut mid = |a: usize, b: usize, points: &mut Vec<[f64; 2]>| -> usize {
        let key = (a.min(b), a.max(b));
        *midpoint.entry(key).or_insert_with(|| {
            let (p, q) = (points[key.0], points[key.1]);
            points.push([0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])]);
            points.len() - 1
        })
    };
    let mut tris = Vec::with_capacity(4 * mesh.triangles.len());
    for t in &mesh.triangles {
        let [a, b, c] = t.vertices;
        let ab = mid(a, b, &mut points);
        let bc = mid(b, c, &mut points);
        let ca = mid(c, a, &mut points);
        tris.push([a, ab, ca]);
        tris.push([ab, b, bc]);
        tris.push([ca, bc, c]);
        tris.push([ab, bc, ca]);
    }
    Mesh::from_parts(points, tris, mesh.domain.clone())
}
