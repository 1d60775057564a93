//! Global systems of the interior penalty discretisation.
//!
//! Jumps use `[[v]] = n₁×v₁ + n₂×v₂` on interior faces (`n₁` points out of
//! the first incident element) and `n×v` on the boundary. The tangential
//! boundary datum `g = n×u` of the problem enters the right-hand sides, so
//! polynomial solutions that violate `u×n = 0` are reproduced exactly.

mod csr;

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Vector3};
use rayon::prelude::*;

pub use csr::CsrMatrix;

use crate::error::{Error, Result};
use crate::problems::ManufacturedProblem;
use crate::space::{basis_curl, combine_curl, combine_value, unit, DGVectorSpace, FaceValues, FieldFunction};

pub const DEFAULT_ALPHA: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SystemKind {
    Primal,
    Mixed,
}

impl SystemKind {
    pub fn name(self) -> &'static str {
        match self {
            SystemKind::Primal => "primal",
            SystemKind::Mixed => "mixed",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SparseSystem {
    pub kind: SystemKind,
    pub matrix: CsrMatrix,
    pub rhs: DVector<f64>,
}

impl SparseSystem {
    pub fn dim(&self) -> usize {
        self.rhs.len()
    }

    pub fn write_matrix_market(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.matrix.write_matrix_market(&mut w).map_err(|e| Error::io(path, e))
    }
}

/// A discrete pair `(u_h, p_h)` on one space.
#[derive(Debug, Clone)]
pub struct DiscreteSolution {
    pub u: FieldFunction,
    pub p: FieldFunction,
}

impl DiscreteSolution {
    pub fn new(u: FieldFunction, p: FieldFunction) -> Result<Self> {
        if !Arc::ptr_eq(u.space(), p.space()) {
            return Err(Error::DimensionMismatch("u and p live on different spaces".into()));
        }
        Ok(DiscreteSolution { u, p })
    }

    pub fn space(&self) -> &Arc<DGVectorSpace> {
        self.u.space()
    }
}

type Triplets = Vec<(usize, usize, f64)>;

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("penalty parameter must be positive, got {alpha}")))
    }
}

/// Per-side traces of the vector basis `ψ_i = φ_k e_c` (`i = c n_s + k`).
struct SideTraces {
    element: usize,
    /// `σ n × ψ_i`, indexed `q * nd + i`.
    jumps: Vec<Vector3<f64>>,
    /// `∇×ψ_i`, indexed `q * nd + i`.
    curls: Vec<Vector3<f64>>,
    /// `ψ_i`, indexed `q * nd + i`.
    values: Vec<Vector3<f64>>,
}

fn side_traces(fv: &FaceValues, ns: usize) -> Vec<SideTraces> {
    let nd = 3 * ns;
    let nq = fv.points.len();
    let n_cross = [0, 1, 2].map(|c| fv.normal.cross(&unit(c)));
    fv.sides
        .iter()
        .map(|side| {
            let mut jumps = Vec::with_capacity(nq * nd);
            let mut curls = Vec::with_capacity(nq * nd);
            let mut values = Vec::with_capacity(nq * nd);
            for q in 0..nq {
                for c in 0..3 {
                    for k in 0..ns {
                        let phi = side.values[q * ns + k];
                        jumps.push(n_cross[c] * (side.sign * phi));
                        curls.push(basis_curl(c, &side.grads[q * ns + k]));
                        values.push(unit(c) * phi);
                    }
                }
            }
            SideTraces { element: side.element, jumps, curls, values }
        })
        .collect()
}

/// `[[u_h]] − g` at the points of `fv`, with `g = n × u` on boundary faces.
pub fn data_relative_jump(fv: &FaceValues, u: &FieldFunction, problem: &ManufacturedProblem) -> Vec<Vector3<f64>> {
    let ns = u.space().scalar_dim();
    (0..fv.points.len())
        .map(|q| {
            let mut j = Vector3::zeros();
            for side in &fv.sides {
                let v = combine_value(u.local(side.element), &side.values[q * ns..(q + 1) * ns]);
                j += fv.normal.cross(&v) * side.sign;
            }
            if fv.is_boundary() {
                j -= problem.tangential_trace(&fv.points[q], &fv.normal);
            }
            j
        })
        .collect()
}

/// Collects per-item triplet lists in item order.
fn gather<F>(n: usize, f: F) -> Triplets
where
    F: Fn(usize) -> Triplets + Sync + Send,
{
    let parts: Vec<Triplets> = (0..n).into_par_iter().map(f).collect();
    let mut out = Vec::with_capacity(parts.iter().map(Vec::len).sum());
    for p in parts {
        out.extend(p);
    }
    out
}

fn gather_vec<F>(len: usize, n: usize, f: F) -> DVector<f64>
where
    F: Fn(usize) -> Vec<(usize, f64)> + Sync + Send,
{
    let parts: Vec<Vec<(usize, f64)>> = (0..n).into_par_iter().map(f).collect();
    let mut out = DVector::zeros(len);
    for p in parts {
        for (i, v) in p {
            out[i] += v;
        }
    }
    out
}

/// `(f, ψ_j)` over element `t`, local indices.
fn load_element(space: &DGVectorSpace, problem: &ManufacturedProblem, t: usize) -> Vec<f64> {
    let ns = space.scalar_dim();
    let ev = space.element_values(t, space.data_rule());
    let mut b = vec![0.0; 3 * ns];
    for (q, x) in ev.points.iter().enumerate() {
        let f = problem.rhs_f(x) * ev.weights[q];
        for c in 0..3 {
            for k in 0..ns {
                b[c * ns + k] += f[c] * ev.values[q * ns + k];
            }
        }
    }
    b
}

/// Element-local `(κψ_i, ψ_j) + (μ∇×ψ_i, ∇×ψ_j)` and `(ψ_i, ψ_j)`,
/// `(∇×ψ_i, ψ_j)` blocks, row-major `j * nd + i`.
struct ElementBlocks {
    mass: Vec<f64>,
    curl_curl: Vec<f64>,
    curl_value: Vec<f64>,
}

fn element_blocks(space: &DGVectorSpace, t: usize) -> ElementBlocks {
    let ns = space.scalar_dim();
    let nd = 3 * ns;
    let ev = space.element_values(t, space.volume_rule());
    let mut mass = vec![0.0; nd * nd];
    let mut curl_curl = vec![0.0; nd * nd];
    let mut curl_value = vec![0.0; nd * nd];
    let mut curls = vec![Vector3::zeros(); nd];
    for q in 0..ev.weights.len() {
        let w = ev.weights[q];
        let vals = &ev.values[q * ns..(q + 1) * ns];
        for c in 0..3 {
            for k in 0..ns {
                curls[c * ns + k] = basis_curl(c, &ev.grads[q * ns + k]);
            }
        }
        for j in 0..nd {
            let (cj, kj) = (j / ns, j % ns);
            for i in 0..nd {
                let (ci, ki) = (i / ns, i % ns);
                if ci == cj {
                    mass[j * nd + i] += w * vals[ki] * vals[kj];
                }
                curl_curl[j * nd + i] += w * curls[i].dot(&curls[j]);
                curl_value[j * nd + i] += w * curls[i][cj] * vals[kj];
            }
        }
    }
    ElementBlocks { mass, curl_curl, curl_value }
}

/// Symmetric interior penalty system for `u_h`.
pub fn assemble_ipdg(space: &DGVectorSpace, problem: &ManufacturedProblem, alpha: f64) -> Result<SparseSystem> {
    check_alpha(alpha)?;
    let mu = problem.coefficients().mu;
    let kappa = problem.coefficients().kappa;
    let ns = space.scalar_dim();
    let nd = 3 * ns;
    let n = space.num_dofs();
    let mesh = space.mesh();

    let mut triplets = gather(space.num_elements(), |t| {
        let b = element_blocks(space, t);
        let off = t * nd;
        let mut out = Vec::with_capacity(nd * nd);
        for j in 0..nd {
            for i in 0..nd {
                out.push((off + j, off + i, kappa * b.mass[j * nd + i] + mu * b.curl_curl[j * nd + i]));
            }
        }
        out
    });
    triplets.extend(gather(mesh.num_faces(), |f| {
        let fv = space.face_values(f, space.face_rule());
        let sides = side_traces(&fv, ns);
        let a = fv.average_weight() * mu;
        let pen = alpha / fv.diameter;
        let mut out = Vec::with_capacity(sides.len() * sides.len() * nd * nd);
        for t in &sides {
            for s in &sides {
                let mut block = vec![0.0; nd * nd];
                for (q, &w) in fv.weights.iter().enumerate() {
                    let (jt, ct) = (&t.jumps[q * nd..(q + 1) * nd], &t.curls[q * nd..(q + 1) * nd]);
                    let (js, cs) = (&s.jumps[q * nd..(q + 1) * nd], &s.curls[q * nd..(q + 1) * nd]);
                    for j in 0..nd {
                        for i in 0..nd {
                            block[j * nd + i] +=
                                w * (pen * js[i].dot(&jt[j]) - a * (ct[j].dot(&js[i]) + cs[i].dot(&jt[j])));
                        }
                    }
                }
                for j in 0..nd {
                    for i in 0..nd {
                        out.push((t.element * nd + j, s.element * nd + i, block[j * nd + i]));
                    }
                }
            }
        }
        out
    }));
    let matrix = CsrMatrix::from_triplets(n, n, triplets);

    let mut rhs = gather_vec(n, space.num_elements(), |t| {
        load_element(space, problem, t).into_iter().enumerate().map(|(i, v)| (t * nd + i, v)).collect()
    });
    rhs += gather_vec(n, mesh.num_faces(), |f| {
        if !mesh.faces()[f].is_boundary() {
            return Vec::new();
        }
        let fv = space.face_values(f, space.face_data_rule());
        let side = &side_traces(&fv, ns)[0];
        let pen = alpha / fv.diameter;
        let mut b = vec![0.0; nd];
        for (q, x) in fv.points.iter().enumerate() {
            let g = problem.tangential_trace(x, &fv.normal) * fv.weights[q];
            for (j, bj) in b.iter_mut().enumerate() {
                *bj += pen * g.dot(&side.jumps[q * nd + j]) - mu * g.dot(&side.curls[q * nd + j]);
            }
        }
        b.into_iter().enumerate().map(|(j, v)| (side.element * nd + j, v)).collect()
    });
    Ok(SparseSystem { kind: SystemKind::Primal, matrix, rhs })
}

/// Mixed system for `(p_h, u_h)`: unknowns `[p; u]`, rows `[flux equation;
/// field equation]`.
pub fn assemble_mixed(space: &DGVectorSpace, problem: &ManufacturedProblem, alpha: f64) -> Result<SparseSystem> {
    check_alpha(alpha)?;
    let mu = problem.coefficients().mu;
    let kappa = problem.coefficients().kappa;
    let ns = space.scalar_dim();
    let nd = 3 * ns;
    let n = space.num_dofs();
    let mesh = space.mesh();

    let mut triplets = gather(space.num_elements(), |t| {
        let b = element_blocks(space, t);
        let off = t * nd;
        let mut out = Vec::with_capacity(4 * nd * nd);
        for j in 0..nd {
            for i in 0..nd {
                let m = b.mass[j * nd + i];
                // (p, q) and −(μ∇×u, q)
                out.push((off + j, off + i, m));
                out.push((off + j, n + off + i, -mu * b.curl_value[j * nd + i]));
                // (∇×v, p) and (κu, v)
                out.push((n + off + j, off + i, b.curl_value[i * nd + j]));
                out.push((n + off + j, n + off + i, kappa * m));
            }
        }
        out
    });
    triplets.extend(gather(mesh.num_faces(), |f| {
        let fv = space.face_values(f, space.face_rule());
        let sides = side_traces(&fv, ns);
        let a = fv.average_weight() * mu;
        let pen = alpha / fv.diameter;
        let mut out = Vec::new();
        for t in &sides {
            for s in &sides {
                let mut flux = vec![0.0; nd * nd];
                let mut field = vec![0.0; nd * nd];
                for (q, &w) in fv.weights.iter().enumerate() {
                    let r = q * nd..(q + 1) * nd;
                    let (jt, vt) = (&t.jumps[r.clone()], &t.values[r.clone()]);
                    let (js, cs) = (&s.jumps[r.clone()], &s.curls[r]);
                    for j in 0..nd {
                        for i in 0..nd {
                            flux[j * nd + i] += w * a * vt[j].dot(&js[i]);
                            field[j * nd + i] += w * (pen * js[i].dot(&jt[j]) - a * cs[i].dot(&jt[j]));
                        }
                    }
                }
                for j in 0..nd {
                    for i in 0..nd {
                        let (row, col) = (t.element * nd + j, n + s.element * nd + i);
                        out.push((row, col, flux[j * nd + i]));
                        out.push((n + row, col, field[j * nd + i]));
                    }
                }
            }
        }
        out
    }));
    let matrix = CsrMatrix::from_triplets(2 * n, 2 * n, triplets);

    let mut rhs = gather_vec(2 * n, space.num_elements(), |t| {
        load_element(space, problem, t).into_iter().enumerate().map(|(i, v)| (n + t * nd + i, v)).collect()
    });
    rhs += gather_vec(2 * n, mesh.num_faces(), |f| {
        if !mesh.faces()[f].is_boundary() {
            return Vec::new();
        }
        let fv = space.face_values(f, space.face_data_rule());
        let side = &side_traces(&fv, ns)[0];
        let pen = alpha / fv.diameter;
        let mut out = vec![(0, 0.0); 2 * nd];
        for j in 0..nd {
            out[j].0 = side.element * nd + j;
            out[nd + j].0 = n + side.element * nd + j;
        }
        for (q, x) in fv.points.iter().enumerate() {
            let g = problem.tangential_trace(x, &fv.normal) * fv.weights[q];
            for j in 0..nd {
                out[j].1 += mu * g.dot(&side.values[q * nd + j]);
                out[nd + j].1 += pen * g.dot(&side.jumps[q * nd + j]);
            }
        }
        out
    });
    Ok(SparseSystem { kind: SystemKind::Mixed, matrix, rhs })
}

/// Splits a mixed solution vector `[p; u]`.
pub fn split_mixed(space: &Arc<DGVectorSpace>, x: &DVector<f64>) -> Result<DiscreteSolution> {
    let n = space.num_dofs();
    if x.len() != 2 * n {
        return Err(Error::DimensionMismatch(format!("mixed vector of length {} for {} dofs", x.len(), 2 * n)));
    }
    let p = FieldFunction::new(Arc::clone(space), x.rows(0, n).into_owned())?;
    let u = FieldFunction::new(Arc::clone(space), x.rows(n, n).into_owned())?;
    DiscreteSolution::new(u, p)
}

/// Eliminates the flux: `(p_h, q) = (μ∇×u_h, q) − ⟨{{μq}}, [[u_h]] − g⟩`,
/// solved element by element.
pub fn recover_p(u: &FieldFunction, problem: &ManufacturedProblem) -> Result<FieldFunction> {
    let space = u.space();
    let mesh = space.mesh();
    let mu = problem.coefficients().mu;
    let ns = space.scalar_dim();
    let nd = 3 * ns;

    let face_rhs = gather_vec(space.num_dofs(), mesh.num_faces(), |f| {
        let fv = space.face_values(f, space.face_data_rule());
        let jumps = data_relative_jump(&fv, u, problem);
        let a = fv.average_weight() * mu;
        let mut out = Vec::with_capacity(fv.sides.len() * nd);
        for side in &fv.sides {
            for c in 0..3 {
                for k in 0..ns {
                    let s: f64 =
                        (0..fv.points.len()).map(|q| fv.weights[q] * side.values[q * ns + k] * jumps[q][c]).sum();
                    out.push((side.element * nd + c * ns + k, -a * s));
                }
            }
        }
        out
    });

    let blocks: Vec<Result<Vec<f64>>> = (0..space.num_elements())
        .into_par_iter()
        .map(|t| {
            let ev = space.element_values(t, space.volume_rule());
            let mut mass = DMatrix::zeros(nd, nd);
            let mut b = DVector::from_column_slice(&face_rhs.as_slice()[t * nd..(t + 1) * nd]);
            let local = u.local(t);
            for q in 0..ev.weights.len() {
                let w = ev.weights[q];
                let vals = &ev.values[q * ns..(q + 1) * ns];
                let curl = combine_curl(local, &ev.grads[q * ns..(q + 1) * ns]) * (mu * w);
                for c in 0..3 {
                    for k in 0..ns {
                        b[c * ns + k] += curl[c] * vals[k];
                        for l in 0..ns {
                            mass[(c * ns + k, c * ns + l)] += w * vals[k] * vals[l];
                        }
                    }
                }
            }
            let chol = mass.cholesky().ok_or(Error::SingularMass(t))?;
            Ok(chol.solve(&b).as_slice().to_vec())
        })
        .collect();
    let mut coefficients = DVector::zeros(space.num_dofs());
    for (t, block) in blocks.into_iter().enumerate() {
        coefficients.as_mut_slice()[t * nd..(t + 1) * nd].copy_from_slice(&block?);
    }
    FieldFunction::new(Arc::clone(space), coefficients)
}
