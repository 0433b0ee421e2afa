use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("matrix is {rows}x{cols}, expected square")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },
    #[error("{context}: expected dimension {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("expected a {expected:?} matrix, found {found:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("tolerance {name} = {value} must lie in (0, 1)")]
    InvalidTolerance { name: &'static str, value: f64 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AlgebraError {
    #[error("block algebra needs at least one block of positive size, got {0:?}")]
    InvalidBlocks(Vec<usize>),
    #[error("module rank must be positive")]
    ZeroRank,
    #[error("elements live over different algebras ({left:?} vs {right:?})")]
    AlgebraMismatch { left: Vec<usize>, right: Vec<usize> },
    #[error("elements live in different modules")]
    ModuleMismatch,
    #[error("{context}: expected {expected}, found {found}")]
    Dimension {
        context: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("ragged array: {0}")]
    Ragged(&'static str),
    #[error("non-finite entry")]
    NonFinite,
}

/// Failures of the operator-map layer (CP maps, dilations, corner splitting).
#[derive(Debug, Clone, PartialEq, Error)]
pub enum MapError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error("map is not completely positive (min Choi eigenvalue {min_eigenvalue:e})")]
    NotCompletelyPositive { min_eigenvalue: f64 },
    #[error("map is not a *-representation: {0}")]
    NotRepresentation(String),
    #[error("map must be square-valued, images are {rows}x{cols}")]
    NotSquareValued { rows: usize, cols: usize },
    #[error("numerical breakdown: {0}")]
    Breakdown(String),
    #[error("{context}: expected {expected}, found {found}")]
    Dimension {
        context: &'static str,
        expected: usize,
        found: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KernelError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error("kernel is not positive definite (min eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },
    #[error("kernel gram is not formally Hermitian")]
    NotHermitian,
    #[error("decompositions reproduce different kernels (relative residual {residual:e})")]
    KernelMismatch { residual: f64 },
    #[error("connecting operator is not an isometry ({0:?})")]
    NotIsometry(crate::linalg::IsometryClass),
    #[error("{context}: expected {expected}, found {found}")]
    Dimension {
        context: &'static str,
        expected: usize,
        found: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PhiError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error("module map is not a phi-map (relative residual {residual:e})")]
    NotPhiMap { residual: f64 },
    #[error("module map is not completely semi-phi (min defect eigenvalue {min_eigenvalue:e})")]
    NotSemiPhiMap { min_eigenvalue: f64 },
    #[error("Stinespring dilation is not minimal (rank {rank} < {dim_k})")]
    NonMinimalDilation { rank: usize, dim_k: usize },
    #[error("{what} failed its contract: {detail}")]
    Contract { what: &'static str, detail: String },
    #[error("{context}: expected {expected}, found {found}")]
    Dimension {
        context: &'static str,
        expected: usize,
        found: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CbError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Phi(#[from] PhiError),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error("certificate check failed: {0}")]
    Violation(String),
}
