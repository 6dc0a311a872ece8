use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// An argument lies outside the region where the pool function is defined.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("insufficient liquidity: requested {requested} but only {available} available")]
    InsufficientLiquidity { requested: f64, available: f64 },

    /// Pool state and fill disagree, or a quote left the admissible region.
    #[error("inconsistent state: {0}")]
    Inconsistent(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("Newton iteration did not converge after {iterations} iterations (last step {last_step:e})")]
    NoConvergence { iterations: usize, last_step: f64 },

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("timestamp ordering error at line {line}: {message}")]
    Ordering { line: u64, message: String },

    #[error("degenerate session: {0}")]
    DegenerateSession(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("regressors are rank deficient")]
    RankDeficient,

    #[error("session {session}, step {step}: {source}")]
    Step {
        session: usize,
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    /// Attach a session index to a step error produced by the simulator.
    pub fn in_session(self, session: usize) -> Self {
        match self {
            Error::Step { step, source, .. } => Error::Step { session, step, source },
            other => other,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
