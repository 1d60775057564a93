//! Discontinuous vector-valued polynomial spaces `(P_l)^3` on a tetrahedral
//! mesh, with tabulation helpers for element and face integrals and the
//! tangential jump / average trace operators.
//!
//! Local numbering: degree of freedom `c * n_s + k` on an element is the
//! scalar basis function `k` times the unit vector `e_c`, where `n_s` is the
//! scalar dimension. Element `t` owns the contiguous global range
//! `t * dofs_per_element ..`.
//!
//! Tangential jumps use `[[v]] = n_1 × v_1 + n_2 × v_2` with `n_1` the unit
//! normal pointing out of the lower-indexed element, and `n × v` on boundary
//! faces with the outward normal.

pub mod basis;
pub mod quadrature;

use std::sync::Arc;

use nalgebra::{DVector, Matrix3, Point3, Vector3};

use crate::error::{Error, Result};
use crate::mesh::{edge_matrix, TetMesh};
use basis::ReferenceBasis;
use quadrature::{TetRule, TriangleRule};

/// Polynomial degree used when none is configured.
pub const DEFAULT_DEGREE: usize = 1;
/// Quadrature order for integrands that involve non-polynomial data.
pub const DATA_ORDER: usize = 6;

#[derive(Debug, Clone)]
pub struct ElementGeometry {
    pub origin: Point3<f64>,
    pub jacobian: Matrix3<f64>,
    pub inverse: Matrix3<f64>,
    /// Positive determinant of the affine map.
    pub det: f64,
    pub volume: f64,
    /// `|τ|^{1/3}`.
    pub h: f64,
}

impl ElementGeometry {
    pub fn to_physical(&self, xi: &[f64; 3]) -> Point3<f64> {
        self.origin + self.jacobian * Vector3::new(xi[0], xi[1], xi[2])
    }

    pub fn to_reference(&self, x: &Point3<f64>) -> [f64; 3] {
        let r = self.inverse * (x - self.origin);
        [r.x, r.y, r.z]
    }
}

/// Scalar basis values/gradients on one element at a set of points.
/// Entry `[q * n_s + k]` belongs to point `q` and scalar function `k`.
#[derive(Debug, Clone)]
pub struct ElementValues {
    pub element: usize,
    pub points: Vec<Point3<f64>>,
    pub weights: Vec<f64>,
    pub values: Vec<f64>,
    pub grads: Vec<Vector3<f64>>,
}

#[derive(Debug, Clone)]
pub struct FaceSide {
    pub element: usize,
    /// `+1` for the first element (normal points outward), `-1` for the second.
    pub sign: f64,
    pub values: Vec<f64>,
    pub grads: Vec<Vector3<f64>>,
}

/// Traces of the scalar basis of both incident elements at face quadrature points.
#[derive(Debug, Clone)]
pub struct FaceValues {
    pub face: usize,
    pub points: Vec<Point3<f64>>,
    pub weights: Vec<f64>,
    pub normal: Vector3<f64>,
    pub diameter: f64,
    pub sides: Vec<FaceSide>,
}

impl FaceValues {
    pub fn is_boundary(&self) -> bool {
        self.sides.len() == 1
    }

    /// Weight of each side in the face average: 1/2 inside, 1 on the boundary.
    pub fn average_weight(&self) -> f64 {
        if self.is_boundary() {
            1.0
        } else {
            0.5
        }
    }
}

#[derive(Debug)]
pub struct DGVectorSpace {
    mesh: Arc<TetMesh>,
    basis: ReferenceBasis,
    geometry: Vec<ElementGeometry>,
    volume_rule: TetRule,
    data_rule: TetRule,
    face_rule: TriangleRule,
    face_data_rule: TriangleRule,
}

impl DGVectorSpace {
    pub fn new(mesh: Arc<TetMesh>, degree: usize) -> Result<Self> {
        if degree == 0 {
            return Err(Error::Config("polynomial degree must be at least 1".into()));
        }
        let geometry = (0..mesh.num_tets())
            .map(|t| {
                let p = mesh.tet_points(t);
                let jacobian = edge_matrix(&p);
                let det = jacobian.determinant();
                let inverse = jacobian.try_inverse().filter(|_| det > 0.0);
                match inverse {
                    Some(inverse) => Ok(ElementGeometry {
                        origin: p[0],
                        jacobian,
                        inverse,
                        det,
                        volume: det / 6.0,
                        h: (det / 6.0).cbrt(),
                    }),
                    None => Err(Error::DegenerateElement { tet: t, volume: det / 6.0 }),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let data_order = DATA_ORDER.max(2 * degree);
        Ok(DGVectorSpace {
            mesh,
            basis: ReferenceBasis::new(degree),
            geometry,
            volume_rule: TetRule::new(2 * degree),
            data_rule: TetRule::new(data_order),
            face_rule: TriangleRule::new(2 * degree),
            face_data_rule: TriangleRule::new(data_order),
        })
    }

    pub fn mesh(&self) -> &TetMesh {
        &self.mesh
    }

    pub fn mesh_arc(&self) -> &Arc<TetMesh> {
        &self.mesh
    }

    pub fn degree(&self) -> usize {
        self.basis.degree()
    }

    pub fn scalar_dim(&self) -> usize {
        self.basis.len()
    }

    pub fn dofs_per_element(&self) -> usize {
        3 * self.basis.len()
    }

    pub fn num_elements(&self) -> usize {
        self.geometry.len()
    }

    pub fn num_dofs(&self) -> usize {
        self.num_elements() * self.dofs_per_element()
    }

    pub fn element_range(&self, t: usize) -> std::ops::Range<usize> {
        let n = self.dofs_per_element();
        t * n..(t + 1) * n
    }

    pub fn geometry(&self, t: usize) -> &ElementGeometry {
        &self.geometry[t]
    }

    /// Rule of order `2l` for bilinear forms.
    pub fn volume_rule(&self) -> &TetRule {
        &self.volume_rule
    }

    /// Rule for integrands with non-polynomial data.
    pub fn data_rule(&self) -> &TetRule {
        &self.data_rule
    }

    pub fn face_rule(&self) -> &TriangleRule {
        &self.face_rule
    }

    pub fn face_data_rule(&self) -> &TriangleRule {
        &self.face_data_rule
    }

    pub(crate) fn check_element(&self, t: usize) -> Result<()> {
        if t < self.num_elements() {
            Ok(())
        } else {
            Err(Error::OutOfRange { what: "element", index: t, len: self.num_elements() })
        }
    }

    /// Physical scalar basis values and gradients on element `t` at reference point `xi`.
    pub fn eval_scalar(&self, t: usize, xi: &[f64; 3], values: &mut [f64], grads: &mut [Vector3<f64>]) {
        let g = &self.geometry[t];
        self.basis.eval(xi, values, grads);
        let scale = 1.0 / g.det.sqrt();
        let inv_t = g.inverse.transpose();
        for (v, d) in values.iter_mut().zip(grads.iter_mut()) {
            *v *= scale;
            *d = inv_t * *d * scale;
        }
    }

    pub fn element_values(&self, t: usize, rule: &TetRule) -> ElementValues {
        let g = &self.geometry[t];
        let ns = self.scalar_dim();
        let nq = rule.len();
        let mut values = vec![0.0; nq * ns];
        let mut grads = vec![Vector3::zeros(); nq * ns];
        let mut points = Vec::with_capacity(nq);
        for (q, xi) in rule.points.iter().enumerate() {
            self.eval_scalar(t, xi, &mut values[q * ns..(q + 1) * ns], &mut grads[q * ns..(q + 1) * ns]);
            points.push(g.to_physical(xi));
        }
        let weights = rule.weights.iter().map(|w| w * g.det).collect();
        ElementValues { element: t, points, weights, values, grads }
    }

    pub fn face_values(&self, f: usize, rule: &TriangleRule) -> FaceValues {
        let mesh = &self.mesh;
        let face = &mesh.faces()[f];
        let [a, b, c] = face.vertices.map(|v| mesh.vertices()[v]);
        let points: Vec<Point3<f64>> =
            rule.points.iter().map(|&[s, t]| a + (b - a) * s + (c - a) * t).collect();
        let weights = rule.weights.iter().map(|w| w * 2.0 * face.area).collect();
        let ns = self.scalar_dim();
        let side = |element: usize, sign: f64| {
            let mut values = vec![0.0; points.len() * ns];
            let mut grads = vec![Vector3::zeros(); points.len() * ns];
            for (q, x) in points.iter().enumerate() {
                let xi = self.geometry[element].to_reference(x);
                self.eval_scalar(element, &xi, &mut values[q * ns..(q + 1) * ns], &mut grads[q * ns..(q + 1) * ns]);
            }
            FaceSide { element, sign, values, grads }
        };
        let mut sides = vec![side(face.elements.0, 1.0)];
        if let Some(e) = face.elements.1 {
            sides.push(side(e, -1.0));
        }
        FaceValues { face: f, points, weights, normal: face.normal, diameter: face.diameter, sides }
    }

    /// L² projection of a vector field (exact for polynomials of degree ≤ l).
    pub fn project(self: &Arc<Self>, field: impl Fn(&Point3<f64>) -> Vector3<f64>) -> FieldFunction {
        let ns = self.scalar_dim();
        let nd = self.dofs_per_element();
        let mut coefficients = DVector::zeros(self.num_dofs());
        for t in 0..self.num_elements() {
            let ev = self.element_values(t, &self.data_rule);
            let local = &mut coefficients.as_mut_slice()[t * nd..(t + 1) * nd];
            for (q, x) in ev.points.iter().enumerate() {
                let v = field(x) * ev.weights[q];
                for c in 0..3 {
                    for k in 0..ns {
                        local[c * ns + k] += v[c] * ev.values[q * ns + k];
                    }
                }
            }
        }
        FieldFunction { space: Arc::clone(self), coefficients }
    }
}

/// `Σ_c Σ_k a[c n_s + k] φ_k e_c`.
pub fn combine_value(coefs: &[f64], values: &[f64]) -> Vector3<f64> {
    let ns = values.len();
    let mut out = Vector3::zeros();
    for c in 0..3 {
        out[c] = coefs[c * ns..(c + 1) * ns].iter().zip(values).map(|(a, v)| a * v).sum();
    }
    out
}

/// Element-local curl of `Σ a_i ψ_i`.
pub fn combine_curl(coefs: &[f64], grads: &[Vector3<f64>]) -> Vector3<f64> {
    let ns = grads.len();
    let mut out = Vector3::zeros();
    for c in 0..3 {
        for (k, g) in grads.iter().enumerate() {
            out += coefs[c * ns + k] * basis_curl(c, g);
        }
    }
    out
}

pub fn combine_divergence(coefs: &[f64], grads: &[Vector3<f64>]) -> f64 {
    let ns = grads.len();
    (0..3).map(|c| grads.iter().enumerate().map(|(k, g)| coefs[c * ns + k] * g[c]).sum::<f64>()).sum()
}

/// `∇φ × e_c`.
#[inline]
pub fn basis_curl(c: usize, g: &Vector3<f64>) -> Vector3<f64> {
    match c {
        0 => Vector3::new(0.0, g.z, -g.y),
        1 => Vector3::new(-g.z, 0.0, g.x),
        _ => Vector3::new(g.y, -g.x, 0.0),
    }
}

#[inline]
pub fn unit(c: usize) -> Vector3<f64> {
    let mut e = Vector3::zeros();
    e[c] = 1.0;
    e
}

/// A discrete field `v_h ∈ V(T_h)`.
#[derive(Debug, Clone)]
pub struct FieldFunction {
    space: Arc<DGVectorSpace>,
    coefficients: DVector<f64>,
}

impl FieldFunction {
    pub fn new(space: Arc<DGVectorSpace>, coefficients: DVector<f64>) -> Result<Self> {
        if coefficients.len() != space.num_dofs() {
            return Err(Error::DimensionMismatch(format!(
                "{} coefficients for a space with {} dofs",
                coefficients.len(),
                space.num_dofs()
            )));
        }
        Ok(FieldFunction { space, coefficients })
    }

    pub fn zeros(space: Arc<DGVectorSpace>) -> Self {
        let n = space.num_dofs();
        FieldFunction { space, coefficients: DVector::zeros(n) }
    }

    pub fn space(&self) -> &Arc<DGVectorSpace> {
        &self.space
    }

    pub fn coefficients(&self) -> &DVector<f64> {
        &self.coefficients
    }

    pub fn coefficients_mut(&mut self) -> &mut DVector<f64> {
        &mut self.coefficients
    }

    pub fn local(&self, t: usize) -> &[f64] {
        &self.coefficients.as_slice()[self.space.element_range(t)]
    }

    fn scalar_at(&self, t: usize, xi: &[f64; 3]) -> (Vec<f64>, Vec<Vector3<f64>>) {
        let ns = self.space.scalar_dim();
        let mut v = vec![0.0; ns];
        let mut g = vec![Vector3::zeros(); ns];
        debug_assert!(xi.iter().all(|&c| c >= -1e-9) && xi.iter().sum::<f64>() <= 1.0 + 1e-9);
        self.space.eval_scalar(t, xi, &mut v, &mut g);
        (v, g)
    }

    /// Value on element `t` at reference point `xi`.
    pub fn eval(&self, t: usize, xi: &[f64; 3]) -> Result<Vector3<f64>> {
        self.space.check_element(t)?;
        let (v, _) = self.scalar_at(t, xi);
        Ok(combine_value(self.local(t), &v))
    }

    /// Element-local curl on element `t` at reference point `xi`.
    pub fn curl_eval(&self, t: usize, xi: &[f64; 3]) -> Result<Vector3<f64>> {
        self.space.check_element(t)?;
        let (_, g) = self.scalar_at(t, xi);
        Ok(combine_curl(self.local(t), &g))
    }

    /// Value of the polynomial of element `t` at physical point `x`.
    pub fn eval_physical(&self, t: usize, x: &Point3<f64>) -> Result<Vector3<f64>> {
        self.space.check_element(t)?;
        let xi = self.space.geometry(t).to_reference(x);
        let (v, _) = self.scalar_at(t, &xi);
        Ok(combine_value(self.local(t), &v))
    }

    pub fn jump(&self, face: usize) -> Result<FaceFunction<'_>> {
        self.face_function(face, TraceKind::Jump)
    }

    pub fn average(&self, face: usize) -> Result<FaceFunction<'_>> {
        self.face_function(face, TraceKind::Average)
    }

    fn face_function(&self, face: usize, kind: TraceKind) -> Result<FaceFunction<'_>> {
        let nf = self.space.mesh().num_faces();
        if face >= nf {
            return Err(Error::OutOfRange { what: "face", index: face, len: nf });
        }
        Ok(FaceFunction { field: self, face, kind })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum TraceKind {
    Jump,
    Average,
}

/// A trace of a [`FieldFunction`] on one face, evaluated pointwise.
pub struct FaceFunction<'a> {
    field: &'a FieldFunction,
    face: usize,
    kind: TraceKind,
}

impl FaceFunction<'_> {
    /// Value at the point with barycentric coordinates `bary` with respect to
    /// the (sorted) face vertices.
    pub fn at(&self, bary: [f64; 3]) -> Vector3<f64> {
        let mesh = self.field.space.mesh();
        let face = &mesh.faces()[self.face];
        let x = Point3::from(
            face.vertices.iter().zip(bary).map(|(&v, l)| mesh.vertices()[v].coords * l).sum::<Vector3<f64>>(),
        );
        self.at_point(&x)
    }

    pub fn at_point(&self, x: &Point3<f64>) -> Vector3<f64> {
        let face = &self.field.space.mesh().faces()[self.face];
        let side = |t: usize| self.field.eval_physical(t, x).expect("incident element exists");
        let v1 = side(face.elements.0);
        let n = face.normal;
        match (self.kind, face.elements.1) {
            (TraceKind::Jump, Some(t2)) => n.cross(&v1) - n.cross(&side(t2)),
            (TraceKind::Jump, None) => n.cross(&v1),
            (TraceKind::Average, Some(t2)) => (v1 + side(t2)) * 0.5,
            (TraceKind::Average, None) => v1,
        }
    }

    /// Values at the points of a face quadrature rule.
    pub fn at_rule(&self, rule: &TriangleRule) -> Vec<Vector3<f64>> {
        (0..rule.len()).map(|q| self.at(rule.barycentric(q))).collect()
    }
}
