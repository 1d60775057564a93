//! Collapsed-coordinate (conical product) Gauss rules on the reference
//! tetrahedron and triangle.
//!
//! Reference tetrahedron: vertices `(0,0,0), (1,0,0), (0,1,0), (0,0,1)`,
//! volume 1/6. Reference triangle: `(0,0), (1,0), (0,1)`, area 1/2.

use nalgebra::{DMatrix, SymmetricEigen};

/// Gauss-Jacobi nodes and weights for the weight `(1-x)^alpha` on `[-1,1]`
/// (Golub-Welsch), mapped to `[0,1]` with weight `(1-t)^alpha`.
fn jacobi_unit(n: usize, alpha: f64) -> Vec<(f64, f64)> {
    let beta = 0.0;
    let ab = alpha + beta;
    let mut jac = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        let kf = k as f64;
        let s = 2.0 * kf + ab;
        jac[(k, k)] = if k == 0 && ab == 0.0 {
            (beta - alpha) / (ab + 2.0)
        } else {
            (beta * beta - alpha * alpha) / (s * (s + 2.0))
        };
        if k + 1 < n {
            let j = kf + 1.0;
            let s = 2.0 * j + ab;
            let off = (4.0 * j * (j + alpha) * (j + beta) * (j + ab) / (s * s * (s + 1.0) * (s - 1.0))).sqrt();
            jac[(k, k + 1)] = off;
            jac[(k + 1, k)] = off;
        }
    }
    // integral of the weight; alpha is a small non-negative integer here
    let mu0 = 2f64.powf(ab + 1.0) / (alpha + 1.0);
    let eig = SymmetricEigen::new(jac);
    let mut out: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let x = eig.eigenvalues[i];
            let w = mu0 * eig.eigenvectors[(0, i)].powi(2);
            (0.5 * (1.0 + x), w * 0.5f64.powf(alpha + 1.0))
        })
        .collect();
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

fn points_for_order(order: usize) -> usize {
    order / 2 + 1
}

#[derive(Debug, Clone)]
pub struct TetRule {
    pub order: usize,
    /// Reference coordinates.
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

impl TetRule {
    /// Rule exact for polynomials of total degree `order`.
    pub fn new(order: usize) -> Self {
        let n = points_for_order(order);
        let (a, b, c) = (jacobi_unit(n, 2.0), jacobi_unit(n, 1.0), jacobi_unit(n, 0.0));
        let mut points = Vec::with_capacity(n * n * n);
        let mut weights = Vec::with_capacity(n * n * n);
        for &(s, ws) in &a {
            for &(t, wt) in &b {
                for &(u, wu) in &c {
                    points.push([s, t * (1.0 - s), u * (1.0 - s) * (1.0 - t)]);
                    weights.push(ws * wt * wu);
                }
            }
        }
        TetRule { order, points, weights }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn barycentric(&self, q: usize) -> [f64; 4] {
        let [x, y, z] = self.points[q];
        [1.0 - x - y - z, x, y, z]
    }
}

#[derive(Debug, Clone)]
pub struct TriangleRule {
    pub order: usize,
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

impl TriangleRule {
    pub fn new(order: usize) -> Self {
        let n = points_for_order(order);
        let (a, b) = (jacobi_unit(n, 1.0), jacobi_unit(n, 0.0));
        let mut points = Vec::with_capacity(n * n);
        let mut weights = Vec::with_capacity(n * n);
        for &(s, ws) in &a {
            for &(t, wt) in &b {
                points.push([s, t * (1.0 - s)]);
                weights.push(ws * wt);
            }
        }
        TriangleRule { order, points, weights }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn barycentric(&self, q: usize) -> [f64; 3] {
        let [x, y] = self.points[q];
        [1.0 - x - y, x, y]
    }
}

/// `∫ x^a y^b z^c` over the reference tetrahedron: `a! b! c! / (a+b+c+3)!`.
pub fn tet_monomial_integral(a: u32, b: u32, c: u32) -> f64 {
    factorial(a) * factorial(b) * factorial(c) / factorial(a + b + c + 3)
}

/// `∫ x^a y^b` over the reference triangle: `a! b! / (a+b+2)!`.
pub fn triangle_monomial_integral(a: u32, b: u32) -> f64 {
    factorial(a) * factorial(b) / factorial(a + b + 2)
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tet_rules_are_exact_up_to_order() {
        for order in 0..=8 {
            let rule = TetRule::new(order);
            assert!(rule.weights.iter().all(|&w| w > 0.0));
            for a in 0..=order as u32 {
                for b in 0..=(order as u32 - a) {
                    for c in 0..=(order as u32 - a - b) {
                        let q: f64 = rule
                            .points
                            .iter()
                            .zip(&rule.weights)
                            .map(|(p, w)| w * p[0].powi(a as i32) * p[1].powi(b as i32) * p[2].powi(c as i32))
                            .sum();
                        let exact = tet_monomial_integral(a, b, c);
                        assert!((q - exact).abs() < 1e-12, "order {order} monomial {a}{b}{c}: {q} vs {exact}");
                    }
                }
            }
        }
    }

    #[test]
    fn triangle_rules_are_exact_up_to_order() {
        for order in 0..=8 {
            let rule = TriangleRule::new(order);
            let total: f64 = rule.weights.iter().sum();
            assert!((total - 0.5).abs() < 1e-14);
            for a in 0..=order as u32 {
                for b in 0..=(order as u32 - a) {
                    let q: f64 = rule
                        .points
                        .iter()
                        .zip(&rule.weights)
                        .map(|(p, w)| w * p[0].powi(a as i32) * p[1].powi(b as i32))
                        .sum();
                    assert!((q - triangle_monomial_integral(a, b)).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn points_inside_reference_simplex() {
        let rule = TetRule::new(6);
        for q in 0..rule.len() {
            assert!(rule.barycentric(q).iter().all(|&l| l > 0.0));
        }
        assert_eq!(rule.len(), 64);
    }
}
