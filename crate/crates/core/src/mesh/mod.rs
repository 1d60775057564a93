//! Conforming tetrahedral meshes of box domains.
//!
//! A [`TetMesh`] owns its vertices, elements and the derived face
//! connectivity. Meshes are immutable once built; refinement through
//! [`bisect`] produces a new mesh together with the parent map needed to
//! relate elements across refinement levels.

mod bisect;
mod build;
pub mod vtk;

use std::collections::HashMap;

use nalgebra::{Matrix3, Point3, Vector3};

use crate::error::{Error, Result};

pub use bisect::{bisect, bisect_with_limit, Refinement, MAX_CLOSURE_LEVELS};
pub use build::build_unit_cube_mesh;

pub type Vertex = Point3<f64>;

/// Local vertex pairs forming the six edges of a tetrahedron.
pub const LOCAL_EDGES: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

/// Relative tolerance under which two edge lengths count as tied.
const EDGE_TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Tetrahedron {
    pub vertices: [usize; 4],
    /// Index into [`LOCAL_EDGES`] of the edge that is bisected next.
    pub refinement_edge: usize,
    pub generation: u32,
}

impl Tetrahedron {
    pub fn refinement_vertices(&self) -> (usize, usize) {
        let (a, b) = LOCAL_EDGES[self.refinement_edge];
        (self.vertices[a], self.vertices[b])
    }

    /// Global vertex ids of local face `i` (the face opposite local vertex `i`).
    pub fn face_vertices(&self, i: usize) -> [usize; 3] {
        let mut out = [0; 3];
        let mut k = 0;
        for (j, &v) in self.vertices.iter().enumerate() {
            if j != i {
                out[k] = v;
                k += 1;
            }
        }
        out
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        LOCAL_EDGES.iter().map(move |&(a, b)| sorted_pair(self.vertices[a], self.vertices[b]))
    }
}

#[derive(Debug, Clone)]
pub struct Face {
    /// Sorted global vertex ids.
    pub vertices: [usize; 3],
    /// Incident elements; the first always has the lower index.
    pub elements: (usize, Option<usize>),
    /// Local face numbers within the incident elements.
    pub local: (usize, Option<usize>),
    /// Unit normal pointing out of `elements.0`.
    pub normal: Vector3<f64>,
    pub area: f64,
    /// Circumcircle diameter `h_f`.
    pub diameter: f64,
}

impl Face {
    pub fn is_boundary(&self) -> bool {
        self.elements.1.is_none()
    }
}

#[derive(Debug, Clone)]
pub struct TetMesh {
    vertices: Vec<Vertex>,
    tets: Vec<Tetrahedron>,
    faces: Vec<Face>,
    tet_faces: Vec<[usize; 4]>,
}

pub(crate) fn sorted_pair(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

pub fn signed_volume(p: &[Vertex; 4]) -> f64 {
    edge_matrix(p).determinant() / 6.0
}

/// Columns are `p1 - p0`, `p2 - p0`, `p3 - p0`.
pub fn edge_matrix(p: &[Vertex; 4]) -> Matrix3<f64> {
    Matrix3::from_columns(&[p[1] - p[0], p[2] - p[0], p[3] - p[0]])
}

/// Longest edge with ties broken by the lexicographically smallest sorted
/// vertex-id pair.
fn longest_edge(ids: &[usize; 4], p: &[Vertex; 4]) -> usize {
    let len2: Vec<f64> = LOCAL_EDGES.iter().map(|&(a, b)| (p[a] - p[b]).norm_squared()).collect();
    let max = len2.iter().cloned().fold(0.0, f64::max);
    let mut best: Option<(usize, (usize, usize))> = None;
    for (e, &(a, b)) in LOCAL_EDGES.iter().enumerate() {
        if len2[e] < max * (1.0 - EDGE_TIE_TOL) {
            continue;
        }
        let key = sorted_pair(ids[a], ids[b]);
        if best.is_none_or(|(_, k)| key < k) {
            best = Some((e, key));
        }
    }
    best.map(|(e, _)| e).unwrap_or(0)
}

fn circumdiameter(a: &Vertex, b: &Vertex, c: &Vertex) -> (f64, f64) {
    let (la, lb, lc) = ((b - c).norm(), (a - c).norm(), (a - b).norm());
    let area = 0.5 * (b - a).cross(&(c - a)).norm();
    (la * lb * lc / (2.0 * area), area)
}

impl TetMesh {
    /// Builds a mesh from raw connectivity. Elements are reoriented to positive
    /// volume; refinement edges and face connectivity are derived.
    pub fn new(vertices: Vec<Vertex>, cells: Vec<[usize; 4]>) -> Result<Self> {
        let generations = vec![0; cells.len()];
        Self::with_generations(vertices, cells, generations)
    }

    pub(crate) fn with_generations(
        vertices: Vec<Vertex>,
        cells: Vec<[usize; 4]>,
        generations: Vec<u32>,
    ) -> Result<Self> {
        let mut tets = Vec::with_capacity(cells.len());
        for (t, (mut ids, generation)) in cells.into_iter().zip(generations).enumerate() {
            for &v in &ids {
                if v >= vertices.len() {
                    return Err(Error::OutOfRange { what: "vertex", index: v, len: vertices.len() });
                }
            }
            let p = ids.map(|v| vertices[v]);
            let vol = signed_volume(&p);
            if !(vol.abs() > 0.0) || !vol.is_finite() {
                return Err(Error::DegenerateElement { tet: t, volume: vol });
            }
            if vol < 0.0 {
                ids.swap(2, 3);
            }
            let p = ids.map(|v| vertices[v]);
            tets.push(Tetrahedron { vertices: ids, refinement_edge: longest_edge(&ids, &p), generation });
        }
        let (faces, tet_faces) = build_faces(&vertices, &tets)?;
        Ok(TetMesh { vertices, tets, faces, tet_faces })
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn tets(&self) -> &[Tetrahedron] {
        &self.tets
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    pub fn tet_faces(&self, t: usize) -> [usize; 4] {
        self.tet_faces[t]
    }

    pub fn num_tets(&self) -> usize {
        self.tets.len()
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn tet(&self, t: usize) -> Result<&Tetrahedron> {
        self.tets.get(t).ok_or(Error::OutOfRange { what: "element", index: t, len: self.tets.len() })
    }

    pub fn tet_points(&self, t: usize) -> [Vertex; 4] {
        self.tets[t].vertices.map(|v| self.vertices[v])
    }

    pub fn volume(&self, t: usize) -> f64 {
        signed_volume(&self.tet_points(t)).abs()
    }

    /// `h_τ = |τ|^{1/3}`.
    pub fn mesh_size(&self, t: usize) -> Result<f64> {
        mesh_size(&self.tet_points(t)).map_err(|_| Error::DegenerateElement { tet: t, volume: self.volume(t) })
    }

    pub fn centroid(&self, t: usize) -> Vertex {
        let p = self.tet_points(t);
        Point3::from((p[0].coords + p[1].coords + p[2].coords + p[3].coords) / 4.0)
    }

    /// Longest edge length.
    pub fn diameter(&self, t: usize) -> f64 {
        let p = self.tet_points(t);
        LOCAL_EDGES.iter().map(|&(a, b)| (p[a] - p[b]).norm()).fold(0.0, f64::max)
    }

    pub fn total_volume(&self) -> f64 {
        (0..self.num_tets()).map(|t| self.volume(t)).sum()
    }

    /// Smallest dihedral angle (radians) of element `t`.
    pub fn min_dihedral_angle(&self, t: usize) -> f64 {
        min_dihedral_angle(&self.tet_points(t))
    }

    pub fn min_dihedral_angle_overall(&self) -> f64 {
        (0..self.num_tets()).map(|t| self.min_dihedral_angle(t)).fold(f64::INFINITY, f64::min)
    }

    pub fn bounding_box(&self) -> (Vertex, Vertex) {
        let mut lo = Point3::from(Vector3::repeat(f64::INFINITY));
        let mut hi = Point3::from(Vector3::repeat(f64::NEG_INFINITY));
        for v in &self.vertices {
            for d in 0..3 {
                lo[d] = lo[d].min(v[d]);
                hi[d] = hi[d].max(v[d]);
            }
        }
        (lo, hi)
    }

    /// Exhaustive conformity check: every face is shared by at most two
    /// elements with identical vertex triples, the stored connectivity is
    /// consistent, and no vertex sits at the midpoint of an element edge
    /// (the only kind of hanging node bisection can create).
    pub fn check_conformity(&self) -> Result<()> {
        let key = |p: &Vertex| [p.x.to_bits(), p.y.to_bits(), p.z.to_bits()];
        let positions: HashMap<[u64; 3], usize> =
            self.vertices.iter().enumerate().map(|(i, p)| (key(p), i)).collect();
        for (t, tet) in self.tets.iter().enumerate() {
            for (a, b) in tet.edges() {
                let mid = Point3::from((self.vertices[a].coords + self.vertices[b].coords) * 0.5);
                if let Some(v) = positions.get(&key(&mid)) {
                    return Err(Error::NonConforming(format!(
                        "vertex {v} hangs on edge ({a},{b}) of element {t}"
                    )));
                }
            }
        }
        for (f, face) in self.faces.iter().enumerate() {
            let mut key0 = self.tets[face.elements.0].face_vertices(face.local.0);
            key0.sort_unstable();
            if key0 != face.vertices {
                return Err(Error::NonConforming(format!("face {f} disagrees with element {}", face.elements.0)));
            }
            match (face.elements.1, face.local.1) {
                (Some(t1), Some(l1)) => {
                    let mut key1 = self.tets[t1].face_vertices(l1);
                    key1.sort_unstable();
                    if key1 != face.vertices {
                        return Err(Error::NonConforming(format!("face {f} disagrees with element {t1}")));
                    }
                }
                (None, None) => {}
                _ => return Err(Error::NonConforming(format!("face {f} has inconsistent incidence"))),
            }
        }
        for (t, fs) in self.tet_faces.iter().enumerate() {
            for (i, &f) in fs.iter().enumerate() {
                let face = &self.faces[f];
                let ok = (face.elements.0 == t && face.local.0 == i)
                    || (face.elements.1 == Some(t) && face.local.1 == Some(i));
                if !ok {
                    return Err(Error::NonConforming(format!("element {t} local face {i} points at face {f}")));
                }
            }
        }
        Ok(())
    }

    /// Indices of face-adjacent elements of `t`.
    pub fn neighbours(&self, t: usize) -> impl Iterator<Item = usize> + '_ {
        self.tet_faces[t].iter().filter_map(move |&f| {
            let face = &self.faces[f];
            match face.elements {
                (a, Some(b)) if a == t => Some(b),
                (a, Some(_)) => Some(a),
                _ => None,
            }
        })
    }
}

pub fn mesh_size(p: &[Vertex; 4]) -> std::result::Result<f64, f64> {
    let vol = signed_volume(p).abs();
    if vol > 0.0 && vol.is_finite() {
        Ok(vol.cbrt())
    } else {
        Err(vol)
    }
}

pub fn min_dihedral_angle(p: &[Vertex; 4]) -> f64 {
    // outward normal of the face opposite each vertex
    let normals: Vec<Vector3<f64>> = (0..4)
        .map(|i| {
            let q: Vec<&Vertex> = (0..4).filter(|&j| j != i).map(|j| &p[j]).collect();
            let mut n = (q[1] - q[0]).cross(&(q[2] - q[0])).normalize();
            if n.dot(&(p[i] - q[0])) > 0.0 {
                n = -n;
            }
            n
        })
        .collect();
    let mut min = f64::INFINITY;
    for k in 0..4 {
        for l in (k + 1)..4 {
            let c = normals[k].dot(&normals[l]).clamp(-1.0, 1.0);
            min = min.min(std::f64::consts::PI - c.acos());
        }
    }
    min
}

fn build_faces(vertices: &[Vertex], tets: &[Tetrahedron]) -> Result<(Vec<Face>, Vec<[usize; 4]>)> {
    let mut lookup: HashMap<[usize; 3], usize> = HashMap::with_capacity(tets.len() * 3);
    let mut faces: Vec<Face> = Vec::with_capacity(tets.len() * 3);
    let mut tet_faces = vec![[usize::MAX; 4]; tets.len()];
    for (t, tet) in tets.iter().enumerate() {
        for i in 0..4 {
            let mut key = tet.face_vertices(i);
            key.sort_unstable();
            match lookup.get(&key) {
                Some(&f) => {
                    let face = &mut faces[f];
                    if face.elements.1.is_some() {
                        return Err(Error::NonConforming(format!("face {key:?} shared by more than two elements")));
                    }
                    face.elements.1 = Some(t);
                    face.local.1 = Some(i);
                    tet_faces[t][i] = f;
                }
                None => {
                    let [a, b, c] = key.map(|v| vertices[v]);
                    let (diameter, area) = circumdiameter(&a, &b, &c);
                    let mut normal = (b - a).cross(&(c - a)).normalize();
                    if normal.dot(&(a - vertices[tet.vertices[i]])) < 0.0 {
                        normal = -normal;
                    }
                    lookup.insert(key, faces.len());
                    tet_faces[t][i] = faces.len();
                    faces.push(Face { vertices: key, elements: (t, None), local: (i, None), normal, area, diameter });
                }
            }
        }
    }
    Ok((faces, tet_faces))
}
