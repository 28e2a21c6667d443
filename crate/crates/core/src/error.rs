use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by the library. Each variant maps to a stable,
/// module-qualified code via [`Error::code`].
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix must be square and non-empty (got {rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("generator entry q[{row}][{col}] = {value} is negative off the diagonal")]
    NegativeOffDiagonal { row: usize, col: usize, value: f64 },

    #[error("generator row {row} sums to {sum}, not 0 (chain is not conservative)")]
    RowSumNonzero { row: usize, sum: f64 },

    #[error("generator is reducible: state {to} is not reachable from state {from}")]
    Reducible { from: usize, to: usize },

    #[error("stationary system is singular; generator is numerically reducible")]
    SingularSystem,

    #[error("state {state} is outside 0..{count}")]
    InvalidState { state: usize, count: usize },

    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("{what} produced a non-finite value")]
    NonFiniteOutput { what: &'static str },

    #[error("ergodicity hypothesis violated: mu*beta = {mu_beta} (lambda = {lambda})")]
    HypothesisViolated { mu_beta: f64, lambda: f64 },

    #[error("eigenvalue iteration did not converge")]
    EigenSolverFailure,

    #[error("step size {delta} is not below the solvability bound {bound}")]
    StepTooLarge { delta: f64, bound: f64 },

    #[error("implicit solve did not converge: residual {residual:e} after {iterations} iterations")]
    NoConvergence { residual: f64, iterations: usize },

    #[error("path aborted at step {step}: {source}")]
    PathAborted { step: usize, source: Box<Error> },

    #[error("{failed} of {total} replicas failed; fewer than 95% succeeded")]
    EnsembleFailed { failed: usize, total: usize },

    #[error("exponent p = {0} is outside (0, 1]")]
    BadExponent(f64),

    #[error("sample counts differ: {left} vs {right}")]
    SizeMismatch { left: usize, right: usize },

    #[error("{size} samples exceed the exact transport limit of {max}")]
    TooLarge { size: usize, max: usize },

    #[error("series entry {index} = {value} is not positive")]
    NonPositiveEntry { index: usize, value: f64 },

    #[error("closed-form denominator {value} is not positive at node {index}")]
    DenominatorNonpositive { index: usize, value: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    /// Stable machine-readable code, prefixed by the module that raised it.
    pub fn code(&self) -> &'static str {
        match self {
            Error::NotSquare { .. } => "markov.not_square",
            Error::NegativeOffDiagonal { .. } => "markov.negative_off_diagonal",
            Error::RowSumNonzero { .. } => "markov.row_sum_nonzero",
            Error::Reducible { .. } => "markov.reducible",
            Error::SingularSystem => "markov.singular_system",
            Error::InvalidState { .. } => "markov.invalid_state",
            Error::DimensionMismatch { .. } => "model.dimension_mismatch",
            Error::NonFiniteOutput { .. } => "model.non_finite_output",
            Error::HypothesisViolated { .. } => "stability.hypothesis_violated",
            Error::EigenSolverFailure => "stability.eigen_solver_failure",
            Error::StepTooLarge { .. } => "bem.step_too_large",
            Error::NoConvergence { .. } => "bem.no_convergence",
            Error::PathAborted { .. } => "bem.path_aborted",
            Error::EnsembleFailed { .. } => "bem.ensemble_failed",
            Error::BadExponent(_) => "measure.bad_exponent",
            Error::SizeMismatch { .. } => "measure.size_mismatch",
            Error::TooLarge { .. } => "measure.too_large",
            Error::NonPositiveEntry { .. } => "measure.non_positive_entry",
            Error::DenominatorNonpositive { .. } => "oracle.denominator_nonpositive",
            Error::InvalidArgument(_) => "core.invalid_argument",
        }
    }
}
