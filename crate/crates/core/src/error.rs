use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("lattice basis is not positively oriented (det = {0})")]
    InvalidBasis(f64),
    #[error("approximated lattice is degenerate at N = {0}")]
    DegenerateLattice(usize),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("objects live on different grids")]
    GridMismatch,
    #[error("immersion is not periodic: defect {defect:e} at ({x}, {y})")]
    PeriodicityViolation { x: f64, y: f64, defect: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite value encountered")]
    NonFinite,
    #[error("solver did not converge: {0}")]
    SolverDiverged(String),
    #[error("operator kernel is larger than the deflation space")]
    DegenerateKernel,
    #[error("fixed-point iteration is not contracting (iteration {iteration}, growth {growth:.3})")]
    NoContraction { iteration: usize, growth: f64 },
    #[error("no nondegenerate rotation found among the scanned angles")]
    NoNondegenerateRotation,
    #[error("quadrilateral is not isotropic (|omega(D0,D1)| = {0:e})")]
    NotIsotropic(f64),
    #[error("quadrilateral has linearly dependent diagonals")]
    DegenerateDiagonals,
    #[error("face {face}: {source}")]
    Face {
        face: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("genericity perturbation failed: {0}")]
    GenericityFailed(String),
    #[error("Hölder norm: {0} faces is too many for exact pair enumeration")]
    TooLargeForExact(usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("format error: {0}")]
    Format(String),
    #[error("unsupported format version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("radial projection undefined at vertex {0} (origin)")]
    ProjectionOrigin(usize),
}

pub type Result<T> = std::result::Result<T, Error>;
