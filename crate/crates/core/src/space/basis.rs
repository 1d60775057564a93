//! Orthonormal modal basis of `P_l` on the reference tetrahedron, built by
//! Cholesky-orthogonalising monomials against their exact Gram matrix.

use nalgebra::{DMatrix, Vector3};

use super::quadrature::tet_monomial_integral;

#[derive(Debug, Clone)]
pub struct ReferenceBasis {
    degree: usize,
    exponents: Vec<[u32; 3]>,
    /// Row `k` holds the monomial coefficients of basis function `k`.
    coeffs: DMatrix<f64>,
}

/// `dim P_l` in three variables.
pub fn scalar_dim(degree: usize) -> usize {
    (degree + 1) * (degree + 2) * (degree + 3) / 6
}

impl ReferenceBasis {
    pub fn new(degree: usize) -> Self {
        let mut exponents = Vec::with_capacity(scalar_dim(degree));
        for total in 0..=degree as u32 {
            for a in (0..=total).rev() {
                for b in (0..=total - a).rev() {
                    exponents.push([a, b, total - a - b]);
                }
            }
        }
        let n = exponents.len();
        let gram = DMatrix::from_fn(n, n, |i, j| {
            let (e, f) = (exponents[i], exponents[j]);
            tet_monomial_integral(e[0] + f[0], e[1] + f[1], e[2] + f[2])
        });
        let chol = gram.cholesky().expect("monomial Gram matrix is SPD");
        let coeffs = chol.l().try_inverse().expect("triangular factor is invertible");
        ReferenceBasis { degree, exponents, coeffs }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }

    /// Values and reference gradients of all basis functions at `xi`.
    pub fn eval(&self, xi: &[f64; 3], values: &mut [f64], grads: &mut [Vector3<f64>]) {
        let n = self.len();
        let mut mono = vec![0.0; n];
        let mut dmono = vec![Vector3::zeros(); n];
        for (m, e) in self.exponents.iter().enumerate() {
            let p = |d: usize, k: u32| if k == 0 { 1.0 } else { xi[d].powi(k as i32) };
            let dp = |d: usize, k: u32| if k == 0 { 0.0 } else { k as f64 * p(d, k - 1) };
            let (px, py, pz) = (p(0, e[0]), p(1, e[1]), p(2, e[2]));
            mono[m] = px * py * pz;
            dmono[m] = Vector3::new(dp(0, e[0]) * py * pz, px * dp(1, e[1]) * pz, px * py * dp(2, e[2]));
        }
        for k in 0..n {
            let mut v = 0.0;
            let mut g = Vector3::zeros();
            for m in 0..=k {
                let c = self.coeffs[(k, m)];
                v += c * mono[m];
                g += c * dmono[m];
            }
            values[k] = v;
            grads[k] = g;
        }
    }
}
