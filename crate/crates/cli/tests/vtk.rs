use std::sync::Arc;

use monge_mixed::fe_space::{interpolate, LagrangeSpace, MatrixField, ScalarField};
use monge_mixed::mesh::{build_structured_mesh, Domain, Mesh};
use monge_mixed_cli::vtk::{export_vtk, vtk_string};

fn count_after(text: &str, tag: &str) -> usize {
    let line = text.lines().find(|l| l.starts_with(tag)).unwrap();
    line.split(' ').nth(1).unwrap().parse().unwrap()
}

#[test]
fn two_triangles_zero_field() {
    let mesh = Mesh::from_parts(
        vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
        vec![[0, 1, 2], [0, 2, 3]],
        Domain::UnitSquare,
    );
    let space = LagrangeSpace::new(Arc::new(mesh), 2).unwrap();
    let u = ScalarField::zeros(space.clone());
    let sigma = MatrixField::zeros(space);
    let text = vtk_string(&u, &sigma);

    // 4 vertices and 5 edge midpoints, each triangle split into 4
    assert_eq!(count_after(&text, "POINTS"), 9);
    assert_eq!(count_after(&text, "CELLS"), 8);
    assert_eq!(count_after(&text, "CELL_TYPES"), 8);
    let u_values: Vec<&str> = text
        .lines()
        .skip_while(|l| !l.starts_with("SCALARS u "))
        .skip(2)
        .take(9)
        .collect();
    assert!(u_values.iter().all(|v| *v == "0.0"));
}

#[test]
fn subdivision_covers_area() {
    for k in 2..=4 {
        let mesh = Arc::new(build_structured_mesh(3, &Domain::UnitSquare).unwrap());
        let space = LagrangeSpace::new(mesh, k).unwrap();
        let text = vtk_string(&ScalarField::zeros(space.clone()), &MatrixField::zeros(space.clone()));
        let pts = space.dof_coordinates();
        let mut area = 0.0;
        for line in text.lines().skip_while(|l| !l.starts_with("CELLS")).skip(1) {
            if line.starts_with("CELL_TYPES") {
                break;
            }
            let ids: Vec<usize> = line.split(' ').skip(1).map(|t| t.parse().unwrap()).collect();
            let [a, b, c] = [pts[ids[0]], pts[ids[1]], pts[ids[2]]];
            let signed = 0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]));
            assert!(signed > 0.0, "k = {k}: inverted sub-triangle");
            area += signed;
        }
        assert!((area - 1.0).abs() < 1e-12, "k = {k}: area {area}");
        assert_eq!(count_after(&text, "CELLS"), 18 * k * k);
    }
}

#[test]
fn export_is_byte_stable() {
    let mesh = Arc::new(build_structured_mesh(4, &Domain::UnitSquare).unwrap());
    let space = LagrangeSpace::new(mesh, 2).unwrap();
    let u = interpolate(|x, y| (0.5 * (x * x + y * y)).exp(), &space).unwrap();
    let sigma = MatrixField::constant(space, monge_mixed::linalg::Sym2x2::new(1.0, 0.25, 2.0));
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.vtk"), dir.path().join("b.vtk"));
    export_vtk(&u, &sigma, &a).unwrap();
    export_vtk(&u, &sigma, &b).unwrap();
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let names: Vec<_> = std::fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(names.len(), 2, "temporary files left behind: {names:?}");
}
