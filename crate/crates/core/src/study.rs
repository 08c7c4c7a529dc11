//! Multi-level convergence studies.
//!
//! Grids are produced level by level from the icosahedron. For SCVT grids each
//! refined grid is relaxed by Lloyd iteration before being refined again, so
//! level `ℓ` is the end of a chain of `ℓ` optimizations.

use std::fmt::Write as _;
use std::io::Write;
use std::str::FromStr;

use crate::dual::SphericalMesh;
use crate::error::StudyError;
use crate::fv::{assemble, NodalField};
use crate::grid::{build_icosahedron, refine, vertex_count, DelaunayGrid};
use crate::metrics::{norms, ErrorReport};
use crate::problems::TestProblem;
use crate::quadrature::QuadratureRule;
use crate::scvt::{self, lloyd_optimize};
use crate::solver::{solve, SolveOptions, SolveReport};

/// Largest level a study accepts.
pub const MAX_LEVEL: u32 = 8;

pub const CSV_HEADER: &str = "level,N,h,err_L2,CR_L2,err_H1,CR_H1,err_max,CR_max,err_W1inf,CR_W1inf";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GridKind {
    /// Plain recursive bisection of the icosahedron.
    Nopt,
    /// Bisection followed by Lloyd relaxation at every level.
    Scvt,
}

impl FromStr for GridKind {
    type Err = StudyError;
    fn from_str(s: &str) -> Result<Self, StudyError> {
        match s {
            "nopt" => Ok(GridKind::Nopt),
            "scvt" => Ok(GridKind::Scvt),
            _ => Err(StudyError::Config(format!("unknown grid kind '{s}' (expected nopt or scvt)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScvtOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for ScvtOptions {
    fn default() -> Self {
        ScvtOptions { tol: scvt::DEFAULT_TOL, max_iter: scvt::DEFAULT_MAX_ITER }
    }
}

#[derive(Clone, Debug)]
pub struct StudyConfig {
    pub kind: GridKind,
    pub min_level: u32,
    pub max_level: u32,
    pub problem: TestProblem,
    pub solver: SolveOptions,
    pub quad_depth: u32,
    pub scvt: ScvtOptions,
}

impl StudyConfig {
    pub fn new(kind: GridKind, min_level: u32, max_level: u32, problem: TestProblem) -> Self {
        StudyConfig {
            kind,
            min_level,
            max_level,
            problem,
            solver: SolveOptions::default(),
            quad_depth: crate::quadrature::DEFAULT_DEPTH,
            scvt: ScvtOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<(), StudyError> {
        if self.min_level > self.max_level || self.max_level > MAX_LEVEL {
            return Err(StudyError::Config(format!(
                "levels must satisfy 0 <= min <= max <= {MAX_LEVEL}, got {}..{}",
                self.min_level, self.max_level
            )));
        }
        if !(self.scvt.tol > 0.0) {
            return Err(StudyError::Config(format!("scvt tolerance must be positive, got {}", self.scvt.tol)));
        }
        if !(self.solver.rel_tol > 0.0 && self.solver.rel_tol < 1.0) {
            return Err(StudyError::Config(format!("cg tolerance must lie in (0, 1), got {}", self.solver.rel_tol)));
        }
        if self.quad_depth > 6 {
            return Err(StudyError::Config(format!("quadrature depth must be at most 6, got {}", self.quad_depth)));
        }
        Ok(())
    }
}

/// Walks the grid chain from level 0, yielding each level's grid.
pub struct GridChain {
    kind: GridKind,
    scvt: ScvtOptions,
    current: Option<DelaunayGrid>,
}

impl GridChain {
    pub fn new(kind: GridKind, scvt: ScvtOptions) -> Self {
        GridChain { kind, scvt, current: None }
    }

    /// Grid of the next level.
    pub fn next_grid(&mut self) -> Result<&DelaunayGrid, StudyError> {
        let next = match &self.current {
            None => build_icosahedron(),
            Some(g) => refine(g),
        };
        let next = match self.kind {
            GridKind::Nopt => next,
            GridKind::Scvt => {
                let level = next.level();
                let (relaxed, report) = lloyd_optimize(&next, self.scvt.tol, self.scvt.max_iter)?;
                if !report.converged && self.scvt.max_iter > 0 {
                    return Err(StudyError::LloydNotConverged {
                        level,
                        iterations: report.iterations,
                        max_move: report.final_max_move,
                    });
                }
                relaxed
            }
        };
        Ok(self.current.insert(next))
    }
}

/// Grid of a single level.
pub fn build_grid(kind: GridKind, level: u32, scvt: ScvtOptions) -> Result<DelaunayGrid, StudyError> {
    if level > MAX_LEVEL {
        return Err(StudyError::Config(format!("level must be at most {MAX_LEVEL}, got {level}")));
    }
    let mut chain = GridChain::new(kind, scvt);
    for _ in 0..level {
        chain.next_grid()?;
    }
    Ok(chain.next_grid()?.clone())
}

#[derive(Clone, Debug)]
pub struct LevelSolution {
    pub u_h: NodalField,
    pub solve: SolveReport,
    pub errors: ErrorReport,
}

/// Assemble, solve and measure on one mesh.
pub fn solve_on_mesh(
    mesh: &SphericalMesh,
    problem: &TestProblem,
    solver: &SolveOptions,
    rule: &QuadratureRule,
) -> Result<LevelSolution, StudyError> {
    let mut sys = assemble(mesh, problem.f, rule)?;
    sys.deflate_rhs();
    let (u_h, report) = solve(&sys, solver)?;
    let errors = norms(mesh, rule, problem.u, problem.grad_u, &u_h)?;
    Ok(LevelSolution { u_h, solve: report, errors })
}

#[derive(Clone, Debug, PartialEq)]
pub struct StudyRow {
    pub level: u32,
    pub n: usize,
    pub h: f64,
    pub errors: ErrorReport,
}

/// Runs every level of the study in order. `progress` receives one line per level.
pub fn run_study<P: FnMut(&str)>(config: &StudyConfig, mut progress: P) -> Result<Vec<StudyRow>, StudyError> {
    config.validate()?;
    let rule = QuadratureRule::new(config.quad_depth);
    let mut chain = GridChain::new(config.kind, config.scvt);
    let mut rows: Vec<StudyRow> = Vec::new();
    for level in 0..=config.max_level {
        let grid = chain.next_grid()?;
        if level < config.min_level {
            continue;
        }
        let mesh = SphericalMesh::new(grid.clone())?;
        let sol = solve_on_mesh(&mesh, &config.problem, &config.solver, &rule)?;
        let mut errors = sol.errors;
        if let Some(prev) = rows.last() {
            errors = errors.with_rates_from(&prev.errors);
        }
        debug_assert_eq!(mesh.num_vertices(), vertex_count(level));
        progress(&format!(
            "level {level}: N = {}, cg iterations = {}, err_L2 = {:.3e}",
            mesh.num_vertices(),
            sol.solve.iterations,
            errors.err_l2
        ));
        rows.push(StudyRow { level, n: mesh.num_vertices(), h: mesh.dual.h, errors });
    }
    Ok(rows)
}

fn sci(v: f64) -> String {
    format!("{v:.9e}")
}

pub fn format_row(row: &StudyRow) -> String {
    let e = &row.errors;
    let rate = |f: fn(&crate::metrics::Rates) -> Option<f64>| e.rates.as_ref().and_then(f).map(sci).unwrap_or_default();
    let mut s = String::new();
    write!(
        s,
        "{},{},{},{},{},{},{},{},{},{},{}",
        row.level,
        row.n,
        sci(row.h),
        sci(e.err_l2),
        rate(|r| r.l2),
        sci(e.err_h1),
        rate(|r| r.h1),
        sci(e.err_max),
        rate(|r| r.max),
        sci(e.err_w1inf),
        rate(|r| r.w1inf)
    )
    .unwrap();
    s
}

pub fn write_csv<W: Write>(rows: &[StudyRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for row in rows {
        writeln!(out, "{}", format_row(row))?;
    }
    out.flush()
}

pub fn csv_string(rows: &[StudyRow]) -> String {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("csv is ASCII")
}
