//! Dörfler marking and the adaptive solve–estimate–mark–refine loop.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::sync::Arc;

use crate::assembly::{DiscreteSolution, DEFAULT_ALPHA};
use crate::error::{Error, Result};
use crate::estimator::{error_norms, estimate, Components, EstimatorConfig, IndicatorField};
use crate::mesh::{bisect, build_unit_cube_mesh, TetMesh};
use crate::problems::ManufacturedProblem;
use crate::solve::{solve_discrete, SolveReport};
use crate::space::{DGVectorSpace, DEFAULT_DEGREE};

pub const DEFAULT_MAX_DOFS: usize = 200_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarkConfig {
    theta: f64,
}

impl MarkConfig {
    pub fn new(theta: f64) -> Result<Self> {
        if theta > 0.0 && theta < 1.0 {
            Ok(MarkConfig { theta })
        } else {
            Err(Error::Config(format!("marking parameter must lie in (0, 1), got {theta}")))
        }
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }
}

/// Smallest set `M` with `η²(M) ≥ θ η²(T)`: the longest-indicator prefix of
/// the elements sorted by decreasing `η²`, ties broken by lower index.
pub fn dorfler_mark(indicators: &[f64], config: MarkConfig) -> BTreeSet<usize> {
    let mut order: Vec<usize> = (0..indicators.len()).collect();
    order.sort_by(|&a, &b| indicators[b].partial_cmp(&indicators[a]).unwrap_or(Ordering::Equal).then(a.cmp(&b)));
    let total: f64 = order.iter().map(|&t| indicators[t]).sum();
    if total <= 0.0 {
        return BTreeSet::new();
    }
    let target = config.theta * total;
    let mut acc = 0.0;
    let mut marked = BTreeSet::new();
    for t in order {
        if acc >= target {
            break;
        }
        acc += indicators[t];
        marked.insert(t);
    }
    marked
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptConfig {
    pub theta: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub alpha: f64,
    pub initial_m: usize,
    pub degree: usize,
    /// Refinements that would push the unknowns of `(u_h, p_h)` past this
    /// value are not carried out.
    pub max_dofs: usize,
    pub estimator: EstimatorConfig,
}

impl Default for AdaptConfig {
    fn default() -> Self {
        AdaptConfig {
            theta: 0.5,
            tol: 1e-3,
            max_iter: 18,
            alpha: DEFAULT_ALPHA,
            initial_m: 2,
            degree: DEFAULT_DEGREE,
            max_dofs: DEFAULT_MAX_DOFS,
            estimator: EstimatorConfig::default(),
        }
    }
}

/// One row of the adaptive history.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    /// Unknowns of the pair `(u_h, p_h)`.
    pub dofs: usize,
    pub eta: f64,
    pub dg_error: f64,
    pub energy_error: f64,
    pub marked: usize,
    pub tets: usize,
    pub components: Components,
    pub min_h: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, Default)]
pub struct AdaptHistory {
    pub records: Vec<IterationRecord>,
}

impl AdaptHistory {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&IterationRecord> {
        self.records.last()
    }
}

/// State handed to the per-iteration observer.
pub struct IterationState<'a> {
    pub iter: usize,
    pub mesh: &'a TetMesh,
    pub solution: &'a DiscreteSolution,
    pub indicators: &'a IndicatorField,
    pub report: &'a SolveReport,
}

#[derive(Debug, Clone)]
pub struct AdaptOutcome {
    pub history: AdaptHistory,
    pub mesh: Arc<TetMesh>,
    pub solution: DiscreteSolution,
    pub indicators: IndicatorField,
}

fn validate(config: &AdaptConfig) -> Result<MarkConfig> {
    if !(config.tol > 0.0) {
        return Err(Error::Config(format!("tolerance must be positive, got {}", config.tol)));
    }
    if config.max_iter == 0 {
        return Err(Error::Config("max_iter must be at least 1".into()));
    }
    if config.initial_m == 0 {
        return Err(Error::Config("initial grid M must be at least 1".into()));
    }
    MarkConfig::new(config.theta)
}

pub fn amipdg_loop(problem: &ManufacturedProblem, config: &AdaptConfig) -> Result<AdaptOutcome> {
    amipdg_loop_with(problem, config, |_| Ok(()))
}

/// Runs the loop, calling `observe` after each estimate.
pub fn amipdg_loop_with(
    problem: &ManufacturedProblem,
    config: &AdaptConfig,
    mut observe: impl FnMut(&IterationState) -> Result<()>,
) -> Result<AdaptOutcome> {
    let mark = validate(config)?;
    let mut mesh = Arc::new(build_unit_cube_mesh(config.initial_m));
    let mut history = AdaptHistory::default();
    for iter in 0..config.max_iter {
        let wrap = |source: Error| Error::Iteration { iteration: iter, source: Box::new(source) };
        let space = Arc::new(DGVectorSpace::new(Arc::clone(&mesh), config.degree).map_err(wrap)?);
        let (solution, report) = solve_discrete(&space, problem, config.alpha).map_err(wrap)?;
        let indicators = estimate(&solution, problem, config.estimator);
        let errors = error_norms(&solution, problem, config.alpha);
        let eta = indicators.eta();
        let dofs = 2 * space.num_dofs();
        let mut last = eta < config.tol || iter + 1 == config.max_iter;
        let mut refined = None;
        if !last {
            let marked: Vec<usize> = dorfler_mark(&indicators.per_element, mark).into_iter().collect();
            if marked.is_empty() {
                last = true;
            } else {
                let r = bisect(&mesh, &marked).map_err(wrap)?;
                // the budget is checked before solving on the refined mesh
                if 2 * space.dofs_per_element() * r.mesh.num_tets() > config.max_dofs {
                    last = true;
                } else {
                    refined = Some((marked.len(), r.mesh));
                }
            }
        }
        history.records.push(IterationRecord {
            iter,
            dofs,
            eta,
            dg_error: errors.dg(),
            energy_error: errors.energy(),
            marked: refined.as_ref().map_or(0, |r| r.0),
            tets: mesh.num_tets(),
            components: indicators.component_totals(),
            min_h: (0..mesh.num_tets()).map(|t| mesh.diameter(t)).fold(f64::INFINITY, f64::min),
            residual: report.residual_norm,
        });
        observe(&IterationState { iter, mesh: &mesh, solution: &solution, indicators: &indicators, report: &report })
            .map_err(wrap)?;
        match refined {
            Some((_, fine)) if !last => mesh = Arc::new(fine),
            _ => return Ok(AdaptOutcome { history, mesh, solution, indicators }),
        }
    }
    unreachable!("the final iteration always returns")
}
