use nalgebra::Point3;

use super::TetMesh;

const AXIS_ORDERS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];

/// Uniform mesh of `[0,1]^3`: `M^3` cubes, each split into six tetrahedra
/// sharing the main diagonal (Kuhn subdivision). Returns `6 M^3` elements.
///
/// Panics if `m == 0`.
pub fn build_unit_cube_mesh(m: usize) -> TetMesh {
    assert!(m >= 1, "unit cube mesh needs at least one subdivision");
    let n = m + 1;
    let h = 1.0 / m as f64;
    let id = |i: usize, j: usize, k: usize| i + n * (j + n * k);
    let mut vertices = Vec::with_capacity(n * n * n);
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                vertices.push(Point3::new(i as f64 * h, j as f64 * h, k as f64 * h));
            }
        }
    }
    let mut cells = Vec::with_capacity(6 * m * m * m);
    for k in 0..m {
        for j in 0..m {
            for i in 0..m {
                for order in AXIS_ORDERS {
                    let mut c = [i, j, k];
                    let mut tet = [id(c[0], c[1], c[2]); 4];
                    for (s, &axis) in order.iter().enumerate() {
                        c[axis] += 1;
                        tet[s + 1] = id(c[0], c[1], c[2]);
                    }
                    cells.push(tet);
                }
            }
        }
    }
    TetMesh::new(vertices, cells).expect("Kuhn subdivision is always valid")
}
