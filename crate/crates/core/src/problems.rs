//! Manufactured solutions of `∇×(μ∇×u) + κu = f`, `u×n = 0` on the unit cube.
//!
//! Each exact field supplies closed-form first and second derivatives; the
//! load `f`, the flux `p = μ∇×u` and `∇·f` are assembled from them, so no
//! derivative is ever approximated numerically.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{Matrix3, Point3, Vector3};
use crate::error::{Error, Result};

/// A smooth vector field with closed-form derivatives.
pub trait ExactField: Send + Sync + fmt::Debug {
    fn value(&self, x: &Point3<f64>) -> Vector3<f64>;
    /// `J[(i, j)] = ∂u_i / ∂x_j`.
    fn jacobian(&self, x: &Point3<f64>) -> Matrix3<f64>;
    /// Hessian of each component.
    fn hessians(&self, x: &Point3<f64>) -> [Matrix3<f64>; 3];
}

pub fn curl_from_jacobian(j: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(j[(2, 1)] - j[(1, 2)], j[(0, 2)] - j[(2, 0)], j[(1, 0)] - j[(0, 1)])
}

/// `∇×∇×u = ∇(∇·u) − Δu`.
pub fn curl_curl_from_hessians(h: &[Matrix3<f64>; 3]) -> Vector3<f64> {
    Vector3::from_fn(|i, _| (0..3).map(|j| h[j][(i, j)]).sum::<f64>() - h[i].trace())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coefficients {
    pub mu: f64,
    pub kappa: f64,
}

impl Coefficients {
    pub fn new(mu: f64, kappa: f64) -> Result<Self> {
        if mu > 0.0 && kappa > 0.0 && mu.is_finite() && kappa.is_finite() {
            Ok(Coefficients { mu, kappa })
        } else {
            Err(Error::Config(format!("coefficients must be positive, got mu={mu}, kappa={kappa}")))
        }
    }
}

impl Default for Coefficients {
    fn default() -> Self {
        Coefficients { mu: 1.0, kappa: 1.0 }
    }
}

#[derive(Debug, Clone)]
pub struct ManufacturedProblem {
    name: String,
    field: Arc<dyn ExactField>,
    coefficients: Coefficients,
}

impl ManufacturedProblem {
    pub fn new(name: impl Into<String>, field: Arc<dyn ExactField>, coefficients: Coefficients) -> Self {
        ManufacturedProblem { name: name.into(), field, coefficients }
    }

    pub fn with_coefficients(mut self, coefficients: Coefficients) -> Self {
        self.coefficients = coefficients;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn coefficients(&self) -> Coefficients {
        self.coefficients
    }

    pub fn exact_u(&self, x: &Point3<f64>) -> Vector3<f64> {
        self.field.value(x)
    }

    pub fn exact_curl_u(&self, x: &Point3<f64>) -> Vector3<f64> {
        curl_from_jacobian(&self.field.jacobian(x))
    }

    pub fn exact_p(&self, x: &Point3<f64>) -> Vector3<f64> {
        self.exact_curl_u(x) * self.coefficients.mu
    }

    pub fn rhs_f(&self, x: &Point3<f64>) -> Vector3<f64> {
        let Coefficients { mu, kappa } = self.coefficients;
        curl_curl_from_hessians(&self.field.hessians(x)) * mu + self.field.value(x) * kappa
    }

    /// `∇·f = κ ∇·u` (the divergence of a curl vanishes).
    pub fn div_f(&self, x: &Point3<f64>) -> f64 {
        self.coefficients.kappa * self.field.jacobian(x).trace()
    }

    /// Tangential boundary datum `n × u`; zero for problems satisfying the
    /// homogeneous boundary condition.
    pub fn tangential_trace(&self, x: &Point3<f64>, n: &Vector3<f64>) -> Vector3<f64> {
        n.cross(&self.field.value(x))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemId {
    Example1,
    Example2,
}

impl ProblemId {
    pub fn build(self) -> ManufacturedProblem {
        match self {
            ProblemId::Example1 => example1(),
            ProblemId::Example2 => example2(),
        }
    }
}

impl FromStr for ProblemId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "example1" => Ok(ProblemId::Example1),
            "example2" => Ok(ProblemId::Example2),
            other => Err(Error::Config(format!("unknown problem '{other}' (expected example1 or example2)"))),
        }
    }
}

impl fmt::Display for ProblemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProblemId::Example1 => "example1",
            ProblemId::Example2 => "example2",
        })
    }
}

/// One-dimensional factor with its first two derivatives.
#[derive(Debug, Clone, Copy)]
enum Factor {
    /// `t (t - 1)`
    Bubble,
    /// `sin(π t)`
    Sine,
    /// `(1 - e^t)(1 - e^{t-1})`
    ExpBubble,
}

impl Factor {
    fn eval(self, t: f64) -> [f64; 3] {
        match self {
            Factor::Bubble => [t * (t - 1.0), 2.0 * t - 1.0, 2.0],
            Factor::Sine => {
                let (s, c) = (PI * t).sin_cos();
                [s, PI * c, -PI * PI * s]
            }
            Factor::ExpBubble => {
                let (e, e1, e2) = (t.exp(), (t - 1.0).exp(), (2.0 * t - 1.0).exp());
                [(1.0 - e) * (1.0 - e1), -e - e1 + 2.0 * e2, -e - e1 + 4.0 * e2]
            }
        }
    }
}

/// `F(x) F(y) F(z)` with value, gradient and Hessian.
fn separable(factor: Factor, x: &Point3<f64>) -> (f64, Vector3<f64>, Matrix3<f64>) {
    let f = [factor.eval(x.x), factor.eval(x.y), factor.eval(x.z)];
    let prod = |d: [usize; 3]| f[0][d[0]] * f[1][d[1]] * f[2][d[2]];
    let value = prod([0, 0, 0]);
    let grad = Vector3::new(prod([1, 0, 0]), prod([0, 1, 0]), prod([0, 0, 1]));
    let hess = Matrix3::from_fn(|i, j| {
        let mut d = [0; 3];
        d[i] += 1;
        d[j] += 1;
        prod(d)
    });
    (value, grad, hess)
}

/// Smooth field with one separable component per axis.
#[derive(Debug, Clone, Copy)]
struct SeparableField([Factor; 3]);

impl ExactField for SeparableField {
    fn value(&self, x: &Point3<f64>) -> Vector3<f64> {
        Vector3::from_fn(|c, _| separable(self.0[c], x).0)
    }

    fn jacobian(&self, x: &Point3<f64>) -> Matrix3<f64> {
        let rows: Vec<_> = self.0.iter().map(|&f| separable(f, x).1.transpose()).collect();
        Matrix3::from_rows(&[rows[0], rows[1], rows[2]])
    }

    fn hessians(&self, x: &Point3<f64>) -> [Matrix3<f64>; 3] {
        [0, 1, 2].map(|c| separable(self.0[c], x).2)
    }
}

/// `s · φ` with `φ = x(x−1)y(y−1)z(z−1) / (x²+y²+z²+ε)`.
#[derive(Debug, Clone, Copy)]
struct PeakedField {
    signs: Vector3<f64>,
    eps: f64,
}

impl PeakedField {
    fn scalar(&self, x: &Point3<f64>) -> (f64, Vector3<f64>, Matrix3<f64>) {
        let (p, dp, hp) = separable(Factor::Bubble, x);
        let w = 1.0 / (x.coords.norm_squared() + self.eps);
        let dw = x.coords * (-2.0 * w * w);
        let hw = x.coords * x.coords.transpose() * (8.0 * w * w * w) - Matrix3::identity() * (2.0 * w * w);
        let value = p * w;
        let grad = dp * w + dw * p;
        let hess = hp * w + dp * dw.transpose() + dw * dp.transpose() + hw * p;
        (value, grad, hess)
    }
}

impl ExactField for PeakedField {
    fn value(&self, x: &Point3<f64>) -> Vector3<f64> {
        self.signs * self.scalar(x).0
    }

    fn jacobian(&self, x: &Point3<f64>) -> Matrix3<f64> {
        self.signs * self.scalar(x).1.transpose()
    }

    fn hessians(&self, x: &Point3<f64>) -> [Matrix3<f64>; 3] {
        let h = self.scalar(x).2;
        [0, 1, 2].map(|c| h * self.signs[c])
    }
}

/// `u(x) = A x + b`; useful for consistency checks since it lies in every
/// discrete space of degree ≥ 1.
#[derive(Debug, Clone, Copy)]
pub struct AffineField {
    pub matrix: Matrix3<f64>,
    pub offset: Vector3<f64>,
}

impl ExactField for AffineField {
    fn value(&self, x: &Point3<f64>) -> Vector3<f64> {
        self.matrix * x.coords + self.offset
    }

    fn jacobian(&self, _: &Point3<f64>) -> Matrix3<f64> {
        self.matrix
    }

    fn hessians(&self, _: &Point3<f64>) -> [Matrix3<f64>; 3] {
        [Matrix3::zeros(); 3]
    }
}

/// Smooth solution: bubble, sine and exponential-bubble components.
pub fn example1() -> ManufacturedProblem {
    ManufacturedProblem::new(
        "example1",
        Arc::new(SeparableField([Factor::Bubble, Factor::Sine, Factor::ExpBubble])),
        Coefficients::default(),
    )
}

/// Solution with a sharp peak at the origin.
pub fn example2() -> ManufacturedProblem {
    ManufacturedProblem::new(
        "example2",
        Arc::new(PeakedField { signs: Vector3::new(1.0, 1.0, -1.0), eps: 1e-3 }),
        Coefficients::default(),
    )
}

/// Polynomial problem with exact solution `A x + b` (generally violating the
/// homogeneous boundary condition; the boundary datum is carried through
/// [`ManufacturedProblem::tangential_trace`]).
pub fn affine_problem(matrix: Matrix3<f64>, offset: Vector3<f64>, coefficients: Coefficients) -> ManufacturedProblem {
    ManufacturedProblem::new("affine", Arc::new(AffineField { matrix, offset }), coefficients)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Central-difference `∇×(μ∇×u) + κu` built from point values of `u` only.
    fn fd_rhs(problem: &ManufacturedProblem, x: &Point3<f64>, h: f64) -> Vector3<f64> {
        let u = |p: &Point3<f64>| problem.exact_u(p);
        let e = |d: usize| {
            let mut v = Vector3::zeros();
            v[d] = h;
            v
        };
        // d2[(i, a, b)] = ∂_a ∂_b u_i
        let second = |i: usize, a: usize, b: usize| {
            if a == b {
                (u(&(x + e(a)))[i] - 2.0 * u(x)[i] + u(&(x - e(a)))[i]) / (h * h)
            } else {
                (u(&(x + e(a) + e(b)))[i] - u(&(x + e(a) - e(b)))[i] - u(&(x - e(a) + e(b)))[i]
                    + u(&(x - e(a) - e(b)))[i])
                    / (4.0 * h * h)
            }
        };
        let Coefficients { mu, kappa } = problem.coefficients();
        Vector3::from_fn(|i, _| {
            let grad_div: f64 = (0..3).map(|j| second(j, i, j)).sum();
            let lap: f64 = (0..3).map(|a| second(i, a, a)).sum();
            mu * (grad_div - lap) + kappa * u(x)[i]
        })
    }

    #[test]
    fn example1_values() {
        let p = example1();
        assert_eq!(p.exact_u(&Point3::new(0.0, 0.3, 0.7)), Vector3::zeros());
        assert!((p.exact_u(&Point3::new(0.5, 0.5, 0.5))[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn example1_rhs_matches_finite_differences() {
        let p = example1();
        let x = Point3::new(0.25, 0.5, 0.75);
        assert!((p.rhs_f(&x) - fd_rhs(&p, &x, 1e-4)).norm() < 1e-4);
    }

    #[test]
    fn example2_values() {
        let p = example2();
        for (y, z) in [(0.2, 0.9), (0.5, 0.5), (0.0, 1.0)] {
            assert_eq!(p.exact_u(&Point3::new(1.0, y, z)), Vector3::zeros());
        }
        let v = p.exact_u(&Point3::new(0.5, 0.5, 0.5));
        let c = (0.5f64 * -0.5).powi(3) / 0.751;
        assert!((v - Vector3::new(c, c, -c)).norm() < 1e-16);
    }

    #[test]
    fn example2_rhs_matches_finite_differences() {
        let p = example2();
        let x = Point3::new(0.1, 0.1, 0.1);
        let fd = fd_rhs(&p, &x, 1e-5);
        assert!((p.rhs_f(&x) - fd).norm() < 1e-3, "{} vs {}", p.rhs_f(&x), fd);
    }

    #[test]
    fn jacobians_match_finite_differences() {
        for p in [example1(), example2()] {
            let x = Point3::new(0.31, 0.12, 0.57);
            let j = p.field.jacobian(&x);
            let h = 1e-6;
            for d in 0..3 {
                let mut dx = Vector3::zeros();
                dx[d] = h;
                let col = (p.exact_u(&(x + dx)) - p.exact_u(&(x - dx))) / (2.0 * h);
                assert!((col - j.column(d)).norm() < 1e-7);
            }
        }
    }

    #[test]
    fn div_f_matches_finite_differences() {
        for p in [example1(), example2()] {
            let x = Point3::new(0.4, 0.22, 0.61);
            let h = 1e-5;
            let fd: f64 = (0..3)
                .map(|d| {
                    let mut dx = Vector3::zeros();
                    dx[d] = h;
                    (p.rhs_f(&(x + dx))[d] - p.rhs_f(&(x - dx))[d]) / (2.0 * h)
                })
                .sum();
            assert!((fd - p.div_f(&x)).abs() < 1e-5, "{fd} vs {}", p.div_f(&x));
        }
    }

    #[test]
    fn problem_ids_parse() {
        assert_eq!("example2".parse::<ProblemId>().unwrap(), ProblemId::Example2);
        assert!("example3".parse::<ProblemId>().is_err());
        assert_eq!(ProblemId::Example1.to_string(), "example1");
    }

    #[test]
    fn coefficients_must_be_positive() {
        assert!(Coefficients::new(0.0, 1.0).is_err());
        assert!(Coefficients::new(1.0, 2.0).is_ok());
    }
}
