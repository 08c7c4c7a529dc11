use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("vector is not unit-norm (norm = {0})")]
    NotUnit(f64),
    #[error("collinear vertices")]
    CollinearVertices,
    #[error("midpoint undefined for antipodal points")]
    MidpointUndefined,
    #[error("cannot project the zero vector onto the sphere")]
    ZeroVector,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GridError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("degenerate triangle {triangle}: {source}")]
    DegenerateTriangle { triangle: usize, source: GeometryError },
    #[error(
        "Delaunay criterion violated: vertex {vertex} lies inside the circumcircle of triangle {triangle} (margin {margin:.3e})"
    )]
    NotDelaunay { triangle: usize, vertex: usize, margin: f64 },
    #[error("invalid topology: {0}")]
    Topology(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LloydError {
    #[error("scvt: tolerance must be positive, got {0}")]
    BadTolerance(f64),
    #[error("scvt: centroid undefined{}", .0.map(|c| format!(" for cell {c}")).unwrap_or_default())]
    CentroidUndefined(Option<usize>),
    #[error("scvt: {0}; try a smaller level or fewer iterations")]
    Grid(#[from] GridError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiscretizationError {
    #[error("fv: vertex {j} is not a neighbor of vertex {i}")]
    NotNeighbor { i: usize, j: usize },
    #[error("fv: degenerate grid, dual edge {edge} has length {length:e}")]
    DegenerateDualEdge { edge: usize, length: f64 },
    #[error("fv: dimension mismatch (expected {expected}, got {got})")]
    DimensionMismatch { expected: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("solver: invalid options: {0}")]
    BadOptions(String),
    #[error("solver: incompatible source (sum of rhs {sum:e}, l1 norm {l1:e})")]
    IncompatibleSource { sum: f64, l1: f64 },
    #[error("solver: no convergence after {iterations} iterations (relative residual {:e})", history.last().copied().unwrap_or(f64::NAN))]
    NotConverged { iterations: usize, history: Vec<f64> },
    #[error("solver: dimension mismatch (expected {expected}, got {got})")]
    DimensionMismatch { expected: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("metrics: unsupported exponent p = {0}")]
    UnsupportedExponent(u32),
    #[error("metrics: convergence rate needs positive errors, got ({0}, {1})")]
    NonPositiveError(f64, f64),
    #[error("metrics: dimension mismatch (expected {expected}, got {got})")]
    DimensionMismatch { expected: usize, got: usize },
}

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("grid file line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum StudyError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Lloyd(#[from] LloydError),
    #[error("scvt: level {level} did not converge in {iterations} iterations (max move {max_move:e})")]
    LloydNotConverged { level: u32, iterations: usize, max_move: f64 },
    #[error(transparent)]
    Discretization(#[from] DiscretizationError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Format(#[from] FormatError),
}

impl StudyError {
    /// Process exit code: 2 config, 3 numerical failure, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            StudyError::Config(_) => 2,
            StudyError::Io(_) | StudyError::Format(_) => 4,
            _ => 3,
        }
    }
}
