use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ParamError {
    #[error("lattice too small: L = {0}")]
    LatticeTooSmall(usize),
    #[error("rate {name} must be finite and non-negative, got {value}")]
    NegativeRate { name: &'static str, value: f64 },
    #[error("eta + gamma must be positive")]
    NoDynamics,
    #[error("{name} must lie in [0, 1], got {value}")]
    OutOfUnitInterval { name: &'static str, value: f64 },
    #[error("mu = {0} is only meaningful with the chiral-open boundary")]
    MuWithPeriodic(f64),
    #[error("the chiral-open protocol carries no erasure flags")]
    ErasuresOnChiral,
    #[error("operation requires the {0} boundary")]
    WrongBoundary(&'static str),
}

#[derive(Debug, Error, PartialEq)]
pub enum ObservableError {
    #[error("window length {l} outside [1, {len}]")]
    BadLength { l: usize, len: usize },
    #[error("odd defect count {0} violates the parity symmetry")]
    OddDefects(usize),
}

#[derive(Debug, Error, PartialEq)]
pub enum MeanFieldError {
    #[error("mean-field state left [0, 1] at t = {t}: {field} = {value}; reduce the step size")]
    OutOfBounds { t: f64, field: &'static str, value: f64 },
    #[error("invalid step size {0}")]
    BadStep(f64),
}

#[derive(Debug, Error, PartialEq)]
pub enum ExactError {
    #[error("L = {0} exceeds the exact-generator limit of 8")]
    DimensionOverflow(usize),
    #[error("dense solve limited to dimension {limit}, got {dim}")]
    TooLargeForDense { dim: usize, limit: usize },
    #[error("distribution length {got} does not match generator dimension {dim}")]
    LengthMismatch { got: usize, dim: usize },
    #[error("propagation failed: {0}")]
    StepFailure(String),
    #[error("eigen-solver did not converge (residual {0:e})")]
    NoConvergence(f64),
    #[error("kernel dimension {found} exceeds the {expected} closed classes; tolerance too loose")]
    TolTooLoose { found: usize, expected: usize },
    #[error(transparent)]
    Param(#[from] ParamError),
}

#[derive(Debug, Error, PartialEq)]
pub enum ScalingError {
    #[error("series has fewer than {0} usable points")]
    TooFewPoints(usize),
    #[error("time axis must be strictly increasing")]
    NonMonotoneTime,
    #[error("family of {got} curves; at least {need} required")]
    TooFewCurves { got: usize, need: usize },
    #[error("late-time slopes all have the same sign; the family does not bracket the transition")]
    NoBracket,
    #[error("rescaled curves do not overlap")]
    InsufficientOverlap,
    #[error("no curve pairs on the same side of the critical point")]
    NoPairs,
    #[error("fit did not converge after restarts: {0}")]
    FitFailed(String),
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("input {path}: {msg}")]
    Input { path: String, msg: String },
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error(transparent)]
    Exact(#[from] ExactError),
    #[error(transparent)]
    Scaling(#[from] ScalingError),
    #[error(transparent)]
    MeanField(#[from] MeanFieldError),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl HarnessError {
    /// Process exit status: 1 for I/O, 2 for configuration, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Io(_) | HarnessError::Input { .. } | HarnessError::Json(_) => 1,
            HarnessError::Config(_) | HarnessError::Param(_) => 2,
            HarnessError::Exact(_) | HarnessError::Scaling(_) | HarnessError::MeanField(_) => 3,
        }
    }
}
