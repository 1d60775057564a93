//! Sparse direct solves and extremal-eigenvalue condition estimates.

use std::time::Instant;

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Par, Side};
use nalgebra::{DMatrix, DVector};

use std::sync::Arc;

use crate::assembly::{assemble_ipdg, recover_p, CsrMatrix, DiscreteSolution, SparseSystem, SystemKind};
use crate::problems::ManufacturedProblem;
use crate::space::{DGVectorSpace, FieldFunction};
use crate::error::{Error, Result};

pub const RESIDUAL_TOLERANCE: f64 = 1e-10;
/// Below this size the condition number is computed from a dense eigendecomposition.
pub const DENSE_CONDITION_LIMIT: usize = 600;
const LANCZOS_MAX_STEPS: usize = 400;
const LANCZOS_TOLERANCE: f64 = 1e-6;
const LANCZOS_CHECK_EVERY: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveReport {
    /// `‖Ax − b‖₂ / ‖b‖₂`, recomputed from the assembled matrix.
    pub residual_norm: f64,
    /// Seconds spent in symbolic + numeric factorization.
    pub factor_time: f64,
    pub cond_estimate: Option<f64>,
    /// `true` when the Cholesky factorization succeeded.
    pub cholesky: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionEstimate {
    pub value: f64,
    pub converged: bool,
}

fn to_faer(a: &CsrMatrix) -> Result<SparseColMat<usize, f64>> {
    let triplets: Vec<Triplet<usize, usize, f64>> = a.triplets().map(|(i, j, v)| Triplet::new(i, j, v)).collect();
    SparseColMat::try_new_from_triplets(a.nrows(), a.ncols(), &triplets)
        .map_err(|e| Error::Factorization { kind: "matrix conversion", reason: format!("{e:?}") })
}

fn to_mat(b: &DVector<f64>) -> Mat<f64> {
    Mat::from_fn(b.len(), 1, |i, _| b[i])
}

fn from_mat(x: &Mat<f64>) -> DVector<f64> {
    DVector::from_fn(x.nrows(), |i, _| x[(i, 0)])
}

/// A reusable factorization of `A`.
pub enum Factorization {
    Cholesky(faer::sparse::linalg::solvers::Llt<usize, f64>),
    Lu(faer::sparse::linalg::solvers::Lu<usize, f64>),
}

impl Factorization {
    /// Cholesky for the primal system, falling back to LU when the matrix is
    /// not positive definite; LU for the mixed system.
    pub fn new(a: &CsrMatrix, kind: SystemKind) -> Result<Self> {
        faer::set_global_parallelism(Par::Seq);
        if a.nrows() != a.ncols() {
            return Err(Error::DimensionMismatch(format!("{}x{} matrix is not square", a.nrows(), a.ncols())));
        }
        let m = to_faer(a)?;
        if kind == SystemKind::Primal {
            if let Ok(llt) = m.sp_cholesky(Side::Lower) {
                return Ok(Factorization::Cholesky(llt));
            }
        }
        m.sp_lu()
            .map(Factorization::Lu)
            .map_err(|e| Error::Factorization { kind: kind.name(), reason: format!("{e:?}") })
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let rhs = to_mat(b);
        let x = match self {
            Factorization::Cholesky(f) => f.solve(&rhs),
            Factorization::Lu(f) => f.solve(&rhs),
        };
        from_mat(&x)
    }

    pub fn is_cholesky(&self) -> bool {
        matches!(self, Factorization::Cholesky(_))
    }
}

pub fn relative_residual(a: &CsrMatrix, x: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let r = (a.mul_vec(x) - b).norm();
    let nb = b.norm();
    if nb == 0.0 {
        r
    } else {
        r / nb
    }
}

pub fn solve_linear(system: &SparseSystem) -> Result<(DVector<f64>, SolveReport)> {
    if system.rhs.len() != system.matrix.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "rhs of length {} for a {}-row matrix",
            system.rhs.len(),
            system.matrix.nrows()
        )));
    }
    let start = Instant::now();
    let factor = Factorization::new(&system.matrix, system.kind)?;
    let factor_time = start.elapsed().as_secs_f64();
    let mut x = factor.solve(&system.rhs);
    let mut residual_norm = relative_residual(&system.matrix, &x, &system.rhs);
    if residual_norm > RESIDUAL_TOLERANCE {
        // one step of iterative refinement
        x += factor.solve(&(&system.rhs - system.matrix.mul_vec(&x)));
        residual_norm = relative_residual(&system.matrix, &x, &system.rhs);
    }
    if !(residual_norm <= RESIDUAL_TOLERANCE) {
        return Err(Error::Residual { kind: system.kind.name(), residual: residual_norm, tolerance: RESIDUAL_TOLERANCE });
    }
    Ok((x, SolveReport { residual_norm, factor_time, cond_estimate: None, cholesky: factor.is_cholesky() }))
}

/// Primal solve followed by flux recovery.
pub fn solve_discrete(
    space: &Arc<DGVectorSpace>,
    problem: &ManufacturedProblem,
    alpha: f64,
) -> Result<(DiscreteSolution, SolveReport)> {
    let system = assemble_ipdg(space, problem, alpha)?;
    let (x, report) = solve_linear(&system)?;
    let u = FieldFunction::new(Arc::clone(space), x)?;
    let p = recover_p(&u, problem)?;
    Ok((DiscreteSolution::new(u, p)?, report))
}

/// Largest and smallest Ritz values of the symmetric operator `op`.
fn lanczos(n: usize, op: impl Fn(&DVector<f64>) -> DVector<f64>) -> (f64, f64, bool) {
    let steps = LANCZOS_MAX_STEPS.min(n);
    let mut v = DVector::from_fn(n, |i, _| 1.0 + 0.5 * ((i as f64) * 0.7548776662).fract());
    v /= v.norm();
    let mut basis = vec![v];
    let (mut alphas, mut betas) = (Vec::new(), Vec::new());
    let mut last = (f64::NAN, f64::NAN);
    for k in 0..steps {
        let mut w = op(&basis[k]);
        let a = w.dot(&basis[k]);
        alphas.push(a);
        // full reorthogonalization, twice
        for _ in 0..2 {
            for b in &basis {
                let c = w.dot(b);
                w.axpy(-c, b, 1.0);
            }
        }
        let beta = w.norm();
        let m = alphas.len();
        let breakdown = beta <= 1e-14 * alphas.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        if m % LANCZOS_CHECK_EVERY != 0 && m != steps && !breakdown {
            betas.push(beta);
            basis.push(w / beta);
            continue;
        }
        let t = DMatrix::from_fn(m, m, |i, j| {
            if i == j {
                alphas[i]
            } else if i + 1 == j {
                betas[i]
            } else if j + 1 == i {
                betas[j]
            } else {
                0.0
            }
        });
        let eig = t.symmetric_eigen();
        let (imax, imin) = (eig.eigenvalues.imax(), eig.eigenvalues.imin());
        let (hi, lo) = (eig.eigenvalues[imax], eig.eigenvalues[imin]);
        let bound = |i: usize| beta * eig.eigenvectors[(m - 1, i)].abs();
        let scale = hi.abs().max(lo.abs());
        let done = bound(imax) <= LANCZOS_TOLERANCE * scale && bound(imin) <= LANCZOS_TOLERANCE * scale;
        if done || breakdown || m == n {
            return (hi, lo, true);
        }
        last = (hi, lo);
        betas.push(beta);
        basis.push(w / beta);
    }
    (last.0, last.1, false)
}

/// `|λ|_max / |λ|_min` of a symmetric matrix.
pub fn condition_estimate(a: &CsrMatrix) -> Result<ConditionEstimate> {
    let n = a.nrows();
    if n == 0 {
        return Ok(ConditionEstimate { value: 1.0, converged: true });
    }
    if n <= DENSE_CONDITION_LIMIT {
        let eig = a.to_dense().symmetric_eigen();
        let abs = eig.eigenvalues.map(f64::abs);
        return Ok(ConditionEstimate { value: abs.max() / abs.min(), converged: true });
    }
    let (hi, lo, c1) = lanczos(n, |x| a.mul_vec(x));
    let factor = Factorization::new(a, SystemKind::Primal)?;
    let (ihi, ilo, c2) = lanczos(n, |x| factor.solve(x));
    let lambda_max = hi.abs().max(lo.abs());
    let inv_max = ihi.abs().max(ilo.abs());
    Ok(ConditionEstimate { value: lambda_max * inv_max, converged: c1 && c2 })
}
