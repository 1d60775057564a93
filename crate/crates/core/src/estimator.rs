//! Residual error indicator and exact error norms.
//!
//! For a pair `(u_h, p_h)` the indicator of an element `τ` is
//!
//! ```text
//! η²(τ) = ‖p_h − μ∇×u_h‖²_τ + h_τ²(‖f − ∇×p_h − κu_h‖²_τ + ‖∇·f − κ∇·u_h‖²_τ)
//!       + Σ_{f⊂∂τ} h_f (‖[[p_h]]‖²_f + ‖[[f − κu_h]]‖²_f)
//! ```
//!
//! Face terms carry a positive power of `h_f`.

use std::collections::BTreeSet;

use nalgebra::Vector3;
use rayon::prelude::*;

use crate::assembly::{data_relative_jump, DiscreteSolution};
use crate::error::{Error, Result};
use crate::problems::{Coefficients, ManufacturedProblem};
use crate::space::{combine_curl, combine_divergence, combine_value};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EstimatorConfig {
    /// Include `J1`, `J2` on boundary faces, with the one-sided trace.
    /// The exact pair has `n×p ≠ 0` and `n×(f − κu) ≠ 0` on `∂Ω`, so under
    /// uniform refinement these terms only decay like `h^{1/2}`; they are
    /// also what pulls adaptive refinement toward boundary peaks.
    pub boundary_jumps: bool,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig { boundary_jumps: true }
    }
}

/// Weighted squared components of `η²(τ)` for one element.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Components {
    /// `‖R1‖²`
    pub r1: f64,
    /// `h²‖R2‖²`
    pub r2: f64,
    /// `h²‖R3‖²`
    pub r3: f64,
    /// `Σ h_f ‖J1‖²`
    pub j1: f64,
    /// `Σ h_f ‖J2‖²`
    pub j2: f64,
}

impl Components {
    pub fn total(&self) -> f64 {
        self.r1 + self.r2 + self.r3 + self.j1 + self.j2
    }
}

#[derive(Debug, Clone)]
pub struct IndicatorField {
    pub per_element: Vec<f64>,
    pub breakdown: Vec<Components>,
    pub total: f64,
}

impl IndicatorField {
    pub fn from_breakdown(breakdown: Vec<Components>) -> Self {
        let per_element: Vec<f64> = breakdown.iter().map(Components::total).collect();
        let total = per_element.iter().sum();
        IndicatorField { per_element, breakdown, total }
    }

    /// Builds a field from raw `η²` values (no breakdown).
    pub fn from_values(values: Vec<f64>) -> Self {
        let breakdown = values.iter().map(|&r1| Components { r1, ..Components::default() }).collect();
        Self::from_breakdown(breakdown)
    }

    pub fn len(&self) -> usize {
        self.per_element.len()
    }

    pub fn is_empty(&self) -> bool {
        self.per_element.is_empty()
    }

    pub fn eta(&self) -> f64 {
        self.total.sqrt()
    }

    pub fn component_totals(&self) -> Components {
        self.breakdown.iter().fold(Components::default(), |a, c| Components {
            r1: a.r1 + c.r1,
            r2: a.r2 + c.r2,
            r3: a.r3 + c.r3,
            j1: a.j1 + c.j1,
            j2: a.j2 + c.j2,
        })
    }
}

fn element_terms(t: usize, sol: &DiscreteSolution, problem: &ManufacturedProblem) -> Components {
    let space = sol.space();
    let Coefficients { mu, kappa } = problem.coefficients();
    let ns = space.scalar_dim();
    let ev = space.element_values(t, space.data_rule());
    let (u, p) = (sol.u.local(t), sol.p.local(t));
    let (mut r1, mut r2, mut r3) = (0.0, 0.0, 0.0);
    for (q, x) in ev.points.iter().enumerate() {
        let vals = &ev.values[q * ns..(q + 1) * ns];
        let grads = &ev.grads[q * ns..(q + 1) * ns];
        let w = ev.weights[q];
        let uh = combine_value(u, vals);
        r1 += w * (combine_value(p, vals) - combine_curl(u, grads) * mu).norm_squared();
        r2 += w * (problem.rhs_f(x) - combine_curl(p, grads) - uh * kappa).norm_squared();
        r3 += w * (problem.div_f(x) - kappa * combine_divergence(u, grads)).powi(2);
    }
    let h2 = space.geometry(t).h.powi(2);
    Components { r1, r2: h2 * r2, r3: h2 * r3, j1: 0.0, j2: 0.0 }
}

/// `(h_f ‖J1‖², h_f ‖J2‖²)` on face `f`, or zeros for excluded boundary faces.
fn face_terms(f: usize, sol: &DiscreteSolution, problem: &ManufacturedProblem, config: EstimatorConfig) -> (f64, f64) {
    let space = sol.space();
    if space.mesh().faces()[f].is_boundary() && !config.boundary_jumps {
        return (0.0, 0.0);
    }
    let kappa = problem.coefficients().kappa;
    let ns = space.scalar_dim();
    let fv = space.face_values(f, space.face_data_rule());
    let (mut j1, mut j2) = (0.0, 0.0);
    for (q, x) in fv.points.iter().enumerate() {
        let f_val = problem.rhs_f(x);
        let (mut a, mut b) = (Vector3::zeros(), Vector3::zeros());
        for side in &fv.sides {
            let vals = &side.values[q * ns..(q + 1) * ns];
            let n = fv.normal * side.sign;
            a += n.cross(&combine_value(sol.p.local(side.element), vals));
            b += n.cross(&(f_val - combine_value(sol.u.local(side.element), vals) * kappa));
        }
        j1 += fv.weights[q] * a.norm_squared();
        j2 += fv.weights[q] * b.norm_squared();
    }
    (fv.diameter * j1, fv.diameter * j2)
}

/// Indicators of all elements; shared faces contribute to both neighbours.
pub fn estimate(sol: &DiscreteSolution, problem: &ManufacturedProblem, config: EstimatorConfig) -> IndicatorField {
    let space = sol.space();
    let mesh = space.mesh();
    let mut breakdown: Vec<Components> =
        (0..space.num_elements()).into_par_iter().map(|t| element_terms(t, sol, problem)).collect();
    let faces: Vec<(f64, f64)> =
        (0..mesh.num_faces()).into_par_iter().map(|f| face_terms(f, sol, problem, config)).collect();
    for (face, (j1, j2)) in mesh.faces().iter().zip(faces) {
        for t in std::iter::once(face.elements.0).chain(face.elements.1) {
            breakdown[t].j1 += j1;
            breakdown[t].j2 += j2;
        }
    }
    IndicatorField::from_breakdown(breakdown)
}

/// `η²(τ)` computed on its own.
pub fn element_indicator(
    t: usize,
    sol: &DiscreteSolution,
    problem: &ManufacturedProblem,
    config: EstimatorConfig,
) -> Result<Components> {
    let space = sol.space();
    space.check_element(t)?;
    let mut c = element_terms(t, sol, problem);
    for f in space.mesh().tet_faces(t) {
        let (j1, j2) = face_terms(f, sol, problem, config);
        c.j1 += j1;
        c.j2 += j2;
    }
    Ok(c)
}

/// `η²(T')` for a subset `T'` of the elements.
pub fn total_indicator(subset: &BTreeSet<usize>, indicators: &IndicatorField) -> Result<f64> {
    subset
        .iter()
        .map(|&t| {
            indicators.per_element.get(t).copied().ok_or(Error::OutOfRange {
                what: "element",
                index: t,
                len: indicators.len(),
            })
        })
        .sum()
}

/// Squared contributions of the discretisation error.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ErrorNorms {
    /// `‖p − p_h‖²`
    pub flux: f64,
    /// `‖κ(u − u_h)‖²`
    pub field: f64,
    /// `Σ_τ ‖μ∇×(u − u_h)‖²_τ`
    pub curl: f64,
    /// `Σ_f α h_f^{-1} ‖[[u_h]]‖²_f`
    pub jump: f64,
}

impl ErrorNorms {
    pub fn dg(&self) -> f64 {
        (self.flux + self.field + self.curl + self.jump).sqrt()
    }

    pub fn energy(&self) -> f64 {
        (self.field + self.curl + self.jump).sqrt()
    }
}

/// Exact errors by quadrature. The jump term measures `[[u_h − u]]`, which
/// equals `[[u_h]]` whenever `u` satisfies the boundary condition.
pub fn error_norms(sol: &DiscreteSolution, problem: &ManufacturedProblem, alpha: f64) -> ErrorNorms {
    let space = sol.space();
    let mesh = space.mesh();
    let Coefficients { mu, kappa } = problem.coefficients();
    let ns = space.scalar_dim();
    let element_terms: Vec<[f64; 3]> = (0..space.num_elements())
        .into_par_iter()
        .map(|t| {
            let ev = space.element_values(t, space.data_rule());
            let (u, p) = (sol.u.local(t), sol.p.local(t));
            let mut acc = [0.0; 3];
            for (q, x) in ev.points.iter().enumerate() {
                let vals = &ev.values[q * ns..(q + 1) * ns];
                let grads = &ev.grads[q * ns..(q + 1) * ns];
                let w = ev.weights[q];
                acc[0] += w * (problem.exact_p(x) - combine_value(p, vals)).norm_squared();
                acc[1] += w * (kappa * (problem.exact_u(x) - combine_value(u, vals))).norm_squared();
                acc[2] += w * (mu * (problem.exact_curl_u(x) - combine_curl(u, grads))).norm_squared();
            }
            acc
        })
        .collect();
    let face_terms: Vec<f64> = (0..mesh.num_faces())
        .into_par_iter()
        .map(|f| {
            let fv = space.face_values(f, space.face_data_rule());
            let jumps = data_relative_jump(&fv, &sol.u, problem);
            let s: f64 = jumps.iter().zip(&fv.weights).map(|(j, w)| w * j.norm_squared()).sum();
            alpha / fv.diameter * s
        })
        .collect();
    let mut norms = ErrorNorms::default();
    for [a, b, c] in element_terms {
        norms.flux += a;
        norms.field += b;
        norms.curl += c;
    }
    norms.jump = face_terms.iter().sum();
    norms
}

pub fn dg_norm_error(sol: &DiscreteSolution, problem: &ManufacturedProblem, alpha: f64) -> f64 {
    error_norms(sol, problem, alpha).dg()
}

pub fn energy_norm_error(sol: &DiscreteSolution, problem: &ManufacturedProblem, alpha: f64) -> f64 {
    error_norms(sol, problem, alpha).energy()
}
