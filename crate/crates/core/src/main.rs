use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sphere_fv::dual::{check_uniformity, SphericalMesh};
use sphere_fv::error::StudyError;
use sphere_fv::io::write_grid;
use sphere_fv::problems::TestProblem;
use sphere_fv::quadrature::QuadratureRule;
use sphere_fv::scvt;
use sphere_fv::solver::SolveOptions;
use sphere_fv::study::{
    build_grid, format_row, run_study, solve_on_mesh, write_csv, GridKind, ScvtOptions, StudyConfig, StudyRow,
    CSV_HEADER,
};

/// Finite volume Poisson solver on icosahedral and centroidal Voronoi grids of the sphere.
#[derive(Parser, Debug)]
#[command(name = "sphere-fv", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a grid and write it in SVDGRID format.
    Grid {
        #[arg(long)]
        level: u32,
        #[command(flatten)]
        grid: GridArgs,
        /// Output file; standard output if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve the test problem on one level and print its error row.
    Solve {
        #[arg(long)]
        level: u32,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        solve: SolveArgs,
        /// Optional dump of the nodal solution as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a convergence study over a range of levels and write a CSV table.
    Study {
        /// Inclusive level range, `A..B`.
        #[arg(long, default_value = "0..6", value_parser = parse_levels)]
        levels: (u32, u32),
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        solve: SolveArgs,
        /// Output CSV; standard output if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct GridArgs {
    #[arg(long, default_value = "nopt", value_parser = parse_kind)]
    kind: GridKind,
    /// Lloyd stopping tolerance on the largest generator move.
    #[arg(long, default_value_t = scvt::DEFAULT_TOL)]
    scvt_tol: f64,
    #[arg(long, default_value_t = scvt::DEFAULT_MAX_ITER)]
    scvt_max_iter: usize,
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[arg(long, default_value = "heikes", value_parser = parse_problem)]
    problem: TestProblem,
    /// Subdivision depth of the quadrature rule.
    #[arg(long, default_value_t = sphere_fv::quadrature::DEFAULT_DEPTH)]
    quad_depth: u32,
    /// Relative residual tolerance of conjugate gradients.
    #[arg(long, default_value_t = 1e-10)]
    cg_tol: f64,
    /// Diagonal preconditioning.
    #[arg(long)]
    jacobi: bool,
}

fn parse_kind(s: &str) -> Result<GridKind, String> {
    s.parse().map_err(|e: StudyError| e.to_string())
}

fn parse_problem(s: &str) -> Result<TestProblem, String> {
    TestProblem::by_name(s).ok_or_else(|| format!("unknown problem '{s}' (expected one of {:?})", TestProblem::names()))
}

fn parse_levels(s: &str) -> Result<(u32, u32), String> {
    let (a, b) = s.split_once("..").ok_or_else(|| format!("expected A..B, got '{s}'"))?;
    let a: u32 = a.trim().parse().map_err(|_| format!("bad level '{a}'"))?;
    let b: u32 = b.trim().parse().map_err(|_| format!("bad level '{b}'"))?;
    Ok((a, b))
}

impl GridArgs {
    fn scvt(&self) -> ScvtOptions {
        ScvtOptions { tol: self.scvt_tol, max_iter: self.scvt_max_iter }
    }
}

impl SolveArgs {
    fn options(&self) -> SolveOptions {
        SolveOptions { rel_tol: self.cg_tol, jacobi: self.jacobi, ..Default::default() }
    }
}

fn config(kind: &GridArgs, solve: &SolveArgs, min_level: u32, max_level: u32) -> Result<StudyConfig, StudyError> {
    let mut c = StudyConfig::new(kind.kind, min_level, max_level, solve.problem);
    c.solver = solve.options();
    c.quad_depth = solve.quad_depth;
    c.scvt = kind.scvt();
    c.validate()?;
    Ok(c)
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>, StudyError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

fn cmd_grid(level: u32, args: &GridArgs, out: Option<&Path>) -> Result<(), StudyError> {
    let c = StudyConfig { scvt: args.scvt(), ..StudyConfig::new(args.kind, level, level, sphere_fv::problems::constant_problem()) };
    c.validate()?;
    let grid = build_grid(args.kind, level, args.scvt())?;
    let mesh = SphericalMesh::new(grid)?;
    let u = check_uniformity(&mesh.dual);
    eprintln!(
        "N = {}, F = {}, h = {:.6e}, c0 = {:.4}, c1 = {:.4}",
        mesh.num_vertices(),
        mesh.grid.num_triangles(),
        u.h,
        u.c0,
        u.c1
    );
    write_grid(&mesh.grid, open_output(out)?)?;
    Ok(())
}

fn cmd_solve(level: u32, grid: &GridArgs, solve: &SolveArgs, out: Option<&Path>) -> Result<(), StudyError> {
    let c = config(grid, solve, level, level)?;
    let mesh = SphericalMesh::new(build_grid(c.kind, level, c.scvt)?)?;
    let rule = QuadratureRule::new(c.quad_depth);
    let sol = solve_on_mesh(&mesh, &c.problem, &c.solver, &rule)?;
    eprintln!(
        "cg: {} iterations, relative residual {:.3e}",
        sol.solve.iterations, sol.solve.final_relative_residual
    );
    let row = StudyRow { level, n: mesh.num_vertices(), h: mesh.dual.h, errors: sol.errors };
    let mut stdout = std::io::stdout().lock();
    writeln!(stdout, "{CSV_HEADER}")?;
    writeln!(stdout, "{}", format_row(&row))?;
    if let Some(path) = out {
        let mut w = BufWriter::new(File::create(path)?);
        writeln!(w, "i,x1,x2,x3,u_h,u")?;
        for (i, (x, v)) in mesh.grid.vertices().iter().zip(&sol.u_h.values).enumerate() {
            writeln!(w, "{i},{:.16e},{:.16e},{:.16e},{v:.16e},{:.16e}", x.x1(), x.x2(), x.x3(), (c.problem.u)(x))?;
        }
        w.flush()?;
    }
    Ok(())
}

fn cmd_study(levels: (u32, u32), grid: &GridArgs, solve: &SolveArgs, out: Option<&Path>) -> Result<(), StudyError> {
    let c = config(grid, solve, levels.0, levels.1)?;
    let rows = run_study(&c, |line| eprintln!("{line}"))?;
    write_csv(&rows, open_output(out)?)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match &cli.command {
        Command::Grid { level, grid, out } => cmd_grid(*level, grid, out.as_deref()),
        Command::Solve { level, grid, solve, out } => cmd_solve(*level, grid, solve, out.as_deref()),
        Command::Study { levels, grid, solve, out } => cmd_study(*levels, grid, solve, out.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
