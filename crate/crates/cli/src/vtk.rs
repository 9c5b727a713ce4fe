//! Legacy ASCII VTK output.

use std::fmt::Write as _;
use std::path::Path;

use monge_mixed::fe_space::{MatrixField, ScalarField};

use crate::{write_atomic, CliError};

/// Unstructured grid with one point per DOF. Each degree-`k` triangle is
/// split into `k²` linear triangles through its Lagrange nodes.
pub fn vtk_string(u: &ScalarField, sigma: &MatrixField) -> String {
    let space = u.space();
    let k = space.degree();
    let reference = space.reference();
    let coords = space.dof_coordinates();

    // local node index by barycentric multi-index (m1, m2)
    let mut local = vec![vec![usize::MAX; k + 1]; k + 1];
    for i in 0..reference.num_nodes() {
        let m = reference.node(i);
        local[m[1]][m[2]] = i;
    }
    let mut cells = Vec::with_capacity(space.mesh().num_triangles() * k * k);
    for t in 0..space.mesh().num_triangles() {
        let dofs = space.cell_dofs(t);
        let at = |a: usize, b: usize| dofs[local[a][b]];
        for a in 0..k {
            for b in 0..k - a {
                cells.push([at(a, b), at(a + 1, b), at(a, b + 1)]);
                if a + b + 2 <= k {
                    cells.push([at(a + 1, b), at(a + 1, b + 1), at(a, b + 1)]);
                }
            }
        }
    }

    let mut out = String::new();
    out.push_str("# vtk DataFile Version 3.0\nmonge-mixed solution\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(out, "POINTS {} double", coords.len());
    for p in coords {
        let _ = writeln!(out, "{:?} {:?} 0.0", p[0], p[1]);
    }
    let _ = writeln!(out, "CELLS {} {}", cells.len(), 4 * cells.len());
    for c in &cells {
        let _ = writeln!(out, "3 {} {} {}", c[0], c[1], c[2]);
    }
    let _ = writeln!(out, "CELL_TYPES {}", cells.len());
    for _ in &cells {
        out.push_str("5\n");
    }
    let _ = writeln!(out, "POINT_DATA {}", coords.len());
    let arrays: [(&str, &[f64]); 4] = [
        ("u", u.coefficients()),
        ("sigma_11", sigma.component(0)),
        ("sigma_12", sigma.component(1)),
        ("sigma_22", sigma.component(2)),
    ];
    for (name, values) in arrays {
        let _ = writeln!(out, "SCALARS {name} double 1\nLOOKUP_TABLE default");
        for v in values {
            let _ = writeln!(out, "{v:?}");
        }
    }
    out
}

pub fn export_vtk(u: &ScalarField, sigma: &MatrixField, path: &Path) -> Result<(), CliError> {
    write_atomic(path, vtk_string(u, sigma).as_bytes())
}
