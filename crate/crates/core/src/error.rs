use thiserror::Error;

/// Unified error type for the engine.
///
/// Variants are grouped by recovery strategy: `Parse` failures point at the
/// offending file location, `Convergence`/`StepFailure` carry enough context
/// to diagnose a diverging run, and the remaining numerical variants signal
/// inputs outside the admissible domain of an operation.
#[derive(Debug, Error)]
pub enum Error {
    /// Input carries NaN or infinity where a finite value is required.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Input violates a mathematical precondition (not SPD, not positive, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Result would overflow the floating-point range.
    #[error("range error: {0}")]
    Range(String),

    /// The local Newton iteration hit a zero Jacobian.
    #[error("singular Jacobian in local solve (gamma_hat = {gamma_hat})")]
    SingularJacobian { gamma_hat: f64 },

    /// The local solve did not reach tolerance within the iteration budget.
    #[error("no convergence after {iters} iterations (last residual {last_residual:e})")]
    Convergence { iters: usize, last_residual: f64 },

    /// A trajectory step failed; the index locates the step in the protocol.
    #[error("step {index} failed: {source}")]
    StepFailure {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    /// Training aborted; the epoch locates the failure in the loss history.
    #[error("training failed at epoch {epoch}: {source}")]
    TrainFailure {
        epoch: usize,
        #[source]
        source: Box<Error>,
    },

    /// Gradient evaluation produced a non-finite component.
    #[error("non-finite gradient component {component}")]
    NonFiniteGradient { component: usize },

    /// The linearized material response is degenerate (3*kappa + mu = 0).
    #[error("degenerate linearized moduli: {0}")]
    DegenerateModuli(String),

    /// A structured input file failed to parse.
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for errors caused by malformed input files rather than numerics.
    pub fn is_parse(&self) -> bool {
        matches!(self, Error::Parse { .. } | Error::Io { .. })
    }
}
