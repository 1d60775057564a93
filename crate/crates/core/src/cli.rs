//! Command-line configuration and experiment drivers.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, ValueEnum};
use serde::Deserialize;

use crate::adapt::{amipdg_loop_with, AdaptConfig, AdaptHistory, DEFAULT_MAX_DOFS};
use crate::assembly::{assemble_ipdg, SparseSystem, DEFAULT_ALPHA};
use crate::error::{Error, Result};
use crate::estimator::{error_norms, estimate, EstimatorConfig, IndicatorField};
use crate::mesh::vtk::write_vtk_file;
use crate::mesh::{build_unit_cube_mesh, TetMesh};
use crate::problems::ProblemId;
use crate::solve::{condition_estimate, solve_discrete, solve_linear};
use crate::space::{DGVectorSpace, DEFAULT_DEGREE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Uniform,
    Adaptive,
    Table1,
}

#[derive(Debug, Parser)]
#[command(name = "amipdg", version, about = "Adaptive mixed interior penalty DG solver for curl-curl problems on [0,1]^3")]
pub struct Cli {
    /// Manufactured problem: example1 or example2
    #[arg(long)]
    pub problem: Option<ProblemId>,
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    /// Initial grid: the cube is split into M³ subcubes of six tetrahedra each
    #[arg(long = "M", id = "M")]
    pub m: Option<usize>,
    /// Dörfler marking parameter in (0, 1)
    #[arg(long)]
    pub theta: Option<f64>,
    /// Penalty parameter
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Stop once the estimator drops below this value
    #[arg(long)]
    pub tol: Option<f64>,
    /// Adaptive iterations, or uniform refinement levels
    #[arg(long = "max-iter")]
    pub max_iter: Option<usize>,
    /// Polynomial degree l
    #[arg(long)]
    pub degree: Option<usize>,
    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write the final primal system in MatrixMarket format
    #[arg(long = "dump-system")]
    pub dump_system: bool,
    /// Write a VTK file every N iterations (0 disables)
    #[arg(long = "vtk-every")]
    pub vtk_every: Option<usize>,
    /// Penalty values for table1 mode
    #[arg(long, value_delimiter = ',')]
    pub alphas: Option<Vec<f64>>,
    /// Stop refining once (u_h, p_h) has this many unknowns
    #[arg(long = "max-dofs")]
    pub max_dofs: Option<usize>,
    /// Skip the estimator's face jump terms on boundary faces
    #[arg(long = "interior-jumps-only")]
    pub interior_jumps_only: bool,
    /// TOML file with the same keys (underscores instead of dashes); flags win
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    problem: Option<ProblemId>,
    mode: Option<Mode>,
    #[serde(rename = "M")]
    m: Option<usize>,
    theta: Option<f64>,
    alpha: Option<f64>,
    tol: Option<f64>,
    max_iter: Option<usize>,
    degree: Option<usize>,
    out: Option<PathBuf>,
    dump_system: Option<bool>,
    vtk_every: Option<usize>,
    alphas: Option<Vec<f64>>,
    max_dofs: Option<usize>,
    boundary_jumps: Option<bool>,
}

pub const TABLE1_ALPHAS: [f64; 5] = [1.0, 10.0, 100.0, 500.0, 1000.0];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub problem: ProblemId,
    pub mode: Mode,
    pub m: usize,
    pub theta: f64,
    pub alpha: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub degree: usize,
    pub out: PathBuf,
    pub dump_system: bool,
    pub vtk_every: usize,
    pub alphas: Vec<f64>,
    pub max_dofs: usize,
    pub boundary_jumps: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            problem: ProblemId::Example1,
            mode: Mode::Adaptive,
            m: 2,
            theta: 0.5,
            alpha: DEFAULT_ALPHA,
            tol: 1e-3,
            max_iter: 18,
            degree: DEFAULT_DEGREE,
            out: PathBuf::from("out"),
            dump_system: false,
            vtk_every: 0,
            alphas: TABLE1_ALPHAS.to_vec(),
            max_dofs: DEFAULT_MAX_DOFS,
            boundary_jumps: true,
        }
    }
}

impl RunConfig {
    /// Defaults, then the config file, then explicit flags.
    pub fn resolve(cli: Cli) -> Result<Self> {
        let file = match &cli.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                toml::from_str::<FileConfig>(&text)
                    .map_err(|e| Error::Config(format!("{}: {}", path.display(), e.message())))?
            }
            None => FileConfig::default(),
        };
        let d = RunConfig::default();
        let config = RunConfig {
            problem: cli.problem.or(file.problem).unwrap_or(d.problem),
            mode: cli.mode.or(file.mode).unwrap_or(d.mode),
            m: cli.m.or(file.m).unwrap_or(d.m),
            theta: cli.theta.or(file.theta).unwrap_or(d.theta),
            alpha: cli.alpha.or(file.alpha).unwrap_or(d.alpha),
            tol: cli.tol.or(file.tol).unwrap_or(d.tol),
            max_iter: cli.max_iter.or(file.max_iter).unwrap_or(d.max_iter),
            degree: cli.degree.or(file.degree).unwrap_or(d.degree),
            out: cli.out.or(file.out).unwrap_or(d.out),
            dump_system: cli.dump_system || file.dump_system.unwrap_or(d.dump_system),
            vtk_every: cli.vtk_every.or(file.vtk_every).unwrap_or(d.vtk_every),
            alphas: cli.alphas.or(file.alphas).unwrap_or(d.alphas),
            max_dofs: cli.max_dofs.or(file.max_dofs).unwrap_or(d.max_dofs),
            boundary_jumps: !cli.interior_jumps_only && file.boundary_jumps.unwrap_or(d.boundary_jumps),
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return bad(format!("--theta must lie in (0, 1), got {}", self.theta));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad(format!("--alpha must be positive, got {}", self.alpha));
        }
        if let Some(a) = self.alphas.iter().find(|a| !(**a > 0.0 && a.is_finite())) {
            return bad(format!("--alphas entries must be positive, got {a}"));
        }
        if !(self.tol > 0.0) {
            return bad(format!("--tol must be positive, got {}", self.tol));
        }
        if self.m == 0 || self.max_iter == 0 || self.degree == 0 {
            return bad("--M, --max-iter and --degree must be at least 1".into());
        }
        Ok(())
    }

    fn adapt_config(&self) -> AdaptConfig {
        AdaptConfig {
            theta: self.theta,
            tol: self.tol,
            max_iter: self.max_iter,
            alpha: self.alpha,
            initial_m: self.m,
            degree: self.degree,
            max_dofs: self.max_dofs,
            estimator: self.estimator_config(),
        }
    }

    fn estimator_config(&self) -> EstimatorConfig {
        EstimatorConfig { boundary_jumps: self.boundary_jumps }
    }
}

/// Parses command-line arguments (including the program name).
pub fn parse_config<I, T>(args: I) -> Result<RunConfig>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| Error::Config(e.to_string()))?;
    RunConfig::resolve(cli)
}

/// Least-squares slope of `ys` against `xs`.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// The last `⌈k/2⌉` of `k` iterations.
pub fn rate_window(k: usize) -> std::ops::Range<usize> {
    k - k.div_ceil(2)..k
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rate {
    pub slope: f64,
    pub first: usize,
    pub last: usize,
}

/// Slope of `log η` against `log N` over the final half of the history.
pub fn eta_rate(history: &AdaptHistory) -> Option<Rate> {
    let w = rate_window(history.len());
    if w.len() < 2 {
        return None;
    }
    let r = &history.records[w.clone()];
    let xs: Vec<f64> = r.iter().map(|r| (r.dofs as f64).ln()).collect();
    let ys: Vec<f64> = r.iter().map(|r| r.eta.ln()).collect();
    Some(Rate { slope: fit_slope(&xs, &ys), first: w.start, last: w.end - 1 })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

fn fmt(v: f64) -> String {
    format!("{v:.5e}")
}

pub fn write_history_csv(path: &Path, history: &AdaptHistory) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(["iter", "dofs", "eta", "dg_error", "energy_error", "marked", "tets"])?;
    for r in &history.records {
        w.write_record([
            r.iter.to_string(),
            r.dofs.to_string(),
            fmt(r.eta),
            fmt(r.dg_error),
            fmt(r.energy_error),
            r.marked.to_string(),
            r.tets.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_indicator_csv(path: &Path, indicators: &IndicatorField) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(["element", "eta2", "r1", "r2", "r3", "j1", "j2"])?;
    for (t, c) in indicators.breakdown.iter().enumerate() {
        w.write_record([t.to_string(), fmt(c.total()), fmt(c.r1), fmt(c.r2), fmt(c.r3), fmt(c.j1), fmt(c.j2)])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_rate(path: &Path, quantity: &str, rate: Option<Rate>) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(["quantity", "slope", "first_iter", "last_iter"])?;
    if let Some(r) = rate {
        w.write_record([quantity.to_string(), fmt(r.slope), r.first.to_string(), r.last.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_vtk_mesh(dir: &Path, iter: usize, mesh: &TetMesh, indicators: &IndicatorField) -> Result<()> {
    let path = dir.join(format!("mesh_{iter:03}.vtk"));
    write_vtk_file(&path, mesh, &format!("iteration {iter}"), &[("eta2", &indicators.per_element)])
}

fn dump_system(dir: &Path, system: &SparseSystem) -> Result<()> {
    system.write_matrix_market(&dir.join("system.mtx"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct UniformRow {
    pub m: usize,
    pub h: f64,
    pub dofs: usize,
    pub eta: f64,
    pub dg_error: f64,
    pub energy_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table1Row {
    pub alpha: f64,
    pub dg_error: f64,
    pub cond: f64,
    pub cond_converged: bool,
}

#[derive(Debug, Clone)]
pub enum RunSummary {
    Uniform { rows: Vec<UniformRow>, dg_rate: Option<f64> },
    Adaptive { history: AdaptHistory, rate: Option<Rate> },
    Table1 { rows: Vec<Table1Row> },
}

/// Kuhn meshes `M, 2M, 4M, …` (`levels` of them).
pub fn run_uniform(config: &RunConfig, levels: usize) -> Result<Vec<UniformRow>> {
    let problem = config.problem.build();
    (0..levels)
        .map(|k| {
            let m = config.m << k;
            let space = Arc::new(DGVectorSpace::new(Arc::new(build_unit_cube_mesh(m)), config.degree)?);
            let (sol, _) = solve_discrete(&space, &problem, config.alpha)?;
            let errors = error_norms(&sol, &problem, config.alpha);
            let eta = estimate(&sol, &problem, config.estimator_config()).eta();
            Ok(UniformRow {
                m,
                h: 1.0 / m as f64,
                dofs: 2 * space.num_dofs(),
                eta,
                dg_error: errors.dg(),
                energy_error: errors.energy(),
            })
        })
        .collect()
}

/// DG error and condition estimate on the `M` mesh for each penalty.
pub fn run_table1(config: &RunConfig) -> Result<Vec<Table1Row>> {
    let problem = config.problem.build();
    let space = Arc::new(DGVectorSpace::new(Arc::new(build_unit_cube_mesh(config.m)), config.degree)?);
    config
        .alphas
        .iter()
        .map(|&alpha| {
            let (sol, _) = solve_discrete(&space, &problem, alpha)?;
            let cond = condition_estimate(&assemble_ipdg(&space, &problem, alpha)?.matrix)?;
            Ok(Table1Row {
                alpha,
                dg_error: error_norms(&sol, &problem, alpha).dg(),
                cond: cond.value,
                cond_converged: cond.converged,
            })
        })
        .collect()
}

/// Executes the configured mode and writes its files into `config.out`.
pub fn run(config: &RunConfig) -> Result<RunSummary> {
    let dir = &config.out;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let problem = config.problem.build();
    match config.mode {
        Mode::Uniform => {
            let rows = run_uniform(config, config.max_iter)?;
            let mut w = csv::Writer::from_writer(create(&dir.join("uniform.csv"))?);
            w.write_record(["M", "h", "dofs", "eta", "dg_error", "energy_error"])?;
            for r in &rows {
                w.write_record([
                    r.m.to_string(),
                    fmt(r.h),
                    r.dofs.to_string(),
                    fmt(r.eta),
                    fmt(r.dg_error),
                    fmt(r.energy_error),
                ])?;
            }
            w.flush().map_err(|e| Error::io(dir, e))?;
            let dg_rate = (rows.len() >= 2).then(|| {
                let xs: Vec<f64> = rows.iter().map(|r| r.h.ln()).collect();
                let ys: Vec<f64> = rows.iter().map(|r| r.dg_error.ln()).collect();
                fit_slope(&xs, &ys)
            });
            let rate = dg_rate.map(|slope| Rate { slope, first: 0, last: rows.len() - 1 });
            write_rate(&dir.join("rate.csv"), "log_dg_error_vs_log_h", rate)?;
            if config.dump_system {
                let m = rows.last().map_or(config.m, |r| r.m);
                let space = DGVectorSpace::new(Arc::new(build_unit_cube_mesh(m)), config.degree)?;
                dump_system(dir, &assemble_ipdg(&space, &problem, config.alpha)?)?;
            }
            Ok(RunSummary::Uniform { rows, dg_rate })
        }
        Mode::Adaptive => {
            let every = config.vtk_every;
            let outcome = amipdg_loop_with(&problem, &config.adapt_config(), |s| {
                if every > 0 && s.iter % every == 0 {
                    write_vtk_mesh(dir, s.iter, s.mesh, s.indicators)?;
                }
                Ok(())
            })?;
            write_history_csv(&dir.join("history.csv"), &outcome.history)?;
            write_indicator_csv(&dir.join("indicators.csv"), &outcome.indicators)?;
            let rate = eta_rate(&outcome.history);
            write_rate(&dir.join("rate.csv"), "log_eta_vs_log_dofs", rate)?;
            if every > 0 {
                write_vtk_mesh(dir, outcome.history.len() - 1, &outcome.mesh, &outcome.indicators)?;
            }
            if config.dump_system {
                dump_system(dir, &assemble_ipdg(outcome.solution.space(), &problem, config.alpha)?)?;
            }
            Ok(RunSummary::Adaptive { history: outcome.history, rate })
        }
        Mode::Table1 => {
            let rows = run_table1(config)?;
            let mut w = csv::Writer::from_writer(create(&dir.join("table1.csv"))?);
            w.write_record(["alpha", "dg_error", "cond", "cond_converged"])?;
            for r in &rows {
                w.write_record([fmt(r.alpha), fmt(r.dg_error), fmt(r.cond), r.cond_converged.to_string()])?;
            }
            w.flush().map_err(|e| Error::io(dir, e))?;
            if config.dump_system {
                let space = DGVectorSpace::new(Arc::new(build_unit_cube_mesh(config.m)), config.degree)?;
                let system = assemble_ipdg(&space, &problem, config.alpha)?;
                solve_linear(&system)?;
                dump_system(dir, &system)?;
            }
            Ok(RunSummary::Table1 { rows })
        }
    }
}

/// Human-readable summary lines for the terminal.
pub fn describe(summary: &RunSummary) -> Vec<String> {
    match summary {
        RunSummary::Uniform { rows, dg_rate } => {
            let mut out: Vec<String> = rows
                .iter()
                .map(|r| format!("M={:<3} dofs={:<8} eta={} dg={}", r.m, r.dofs, fmt(r.eta), fmt(r.dg_error)))
                .collect();
            if let Some(s) = dg_rate {
                out.push(format!("slope log(dg) vs log(h): {s:.3}"));
            }
            out
        }
        RunSummary::Adaptive { history, rate } => {
            let mut out: Vec<String> = history
                .records
                .iter()
                .map(|r| {
                    format!(
                        "iter={:<3} dofs={:<8} eta={} dg={} marked={}",
                        r.iter,
                        r.dofs,
                        fmt(r.eta),
                        fmt(r.dg_error),
                        r.marked
                    )
                })
                .collect();
            if let Some(r) = rate {
                out.push(format!("slope log(eta) vs log(N) over iterations {}..={}: {:.3}", r.first, r.last, r.slope));
            }
            out
        }
        RunSummary::Table1 { rows } => rows
            .iter()
            .map(|r| format!("alpha={:<8} dg={} cond={}", r.alpha, fmt(r.dg_error), fmt(r.cond)))
            .collect(),
    }
}
