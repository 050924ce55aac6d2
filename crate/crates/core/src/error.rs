use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundsError {
    #[error("number of scenarios must be positive")]
    NoScenarios,
    #[error("complexity exceeds sample size (k = {complexity}, N = {n_scenarios})")]
    ComplexityExceedsSampleSize {
        complexity: usize,
        n_scenarios: usize,
    },
    #[error("confidence parameter must lie in (0, 1), got {0}")]
    InvalidConfidence(f64),
    #[error("binomial coefficient C({n}, {k}) is undefined for k > n")]
    BinomialDomain { n: u64, k: u64 },
    #[error("residual is defined for v <= 1 only, got {0}")]
    VOutOfRange(f64),
    #[error("the two-root residual requires complexity < number of scenarios")]
    FullComplexity,
    #[error("phi_(H,k) requires k <= H - 1 (H = {h}, k = {k})")]
    PhiDomain { h: u64, k: u64 },
    #[error("phi_(H,k)(v) requires 0 < v <= 1, got {0}")]
    PhiArgument(f64),
    #[error("failed to bracket a root for N = {n_scenarios}, k = {complexity}")]
    Bracketing {
        n_scenarios: usize,
        complexity: usize,
    },
    #[error("bisection stopped with bracket width {width:e}")]
    NotConverged { width: f64 },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QpError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("quadratic term is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("lower limit exceeds upper limit in constraint row {0}")]
    InvertedLimits(usize),
    #[error("problem data contains NaN")]
    NotANumber,
    #[error("linear system is not positive definite")]
    NotPositiveDefinite,
    #[error("lexicographic solve needs at least one stage")]
    NoStages,
    #[error("stage {stage} failed with status {status:?}")]
    StageFailed {
        stage: usize,
        status: crate::qp::SolveStatus,
    },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("input dimensions differ: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("no inputs given")]
    Empty,
    #[error("invalid kernel parameter: {0}")]
    InvalidParameter(String),
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("dataset is empty")]
    EmptyData,
    #[error("dataset has {inputs} inputs but {outputs} outputs")]
    LengthMismatch { inputs: usize, outputs: usize },
    #[error("method needs outputs but the dataset has none")]
    MissingOutputs,
    #[error("SVM labels must be -1 or +1, found {0}")]
    InvalidLabel(f64),
    #[error("parameter {name} must be positive, got {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("solver finished with status {status:?}")]
    Solver { status: crate::qp::SolveStatus },
    #[error("unknown method tag {0:?}")]
    UnknownMethod(String),
    #[error("model JSON is inconsistent: {0}")]
    Inconsistent(String),
    #[error(transparent)]
    Qp(#[from] QpError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Bounds(#[from] BoundsError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Error)]
pub enum DataError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("file has no data rows")]
    Empty,
    #[error("missing column {0:?}")]
    MissingColumn(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Bounds(#[from] BoundsError),
}
