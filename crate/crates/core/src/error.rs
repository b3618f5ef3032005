use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("pressure assembly failed: {0}")]
    Assembly(String),

    #[error("source imbalance {imbalance:e} exceeds tolerance {tolerance:e}")]
    Solvability { imbalance: f64, tolerance: f64 },

    #[error("solver did not converge in {iterations} iterations (relative residual {residual:e})")]
    Solver { iterations: usize, residual: f64 },

    #[error("time step {dt:e} exceeds CFL bound {bound:e}")]
    Cfl { dt: f64, bound: f64 },

    #[error("explicit nudging unstable: dt*mu = {0} > 1")]
    NudgingStability(f64),

    #[error("config: {0}")]
    Config(String),

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("reference mismatch: {0}")]
    Reference(String),

    #[error("step {step} (t = {time}): {source}")]
    AtStep {
        step: usize,
        time: f64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn at_step(self, step: usize, time: f64) -> Self {
        Error::AtStep { step, time, source: Box::new(self) }
    }

    /// Short, stable identifier for machine-readable error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Grid(_) => "grid",
            Error::GridMismatch(_) => "grid_mismatch",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::Assembly(_) => "assembly",
            Error::Solvability { .. } => "solvability",
            Error::Solver { .. } => "solver",
            Error::Cfl { .. } => "cfl",
            Error::NudgingStability(_) => "nudging_stability",
            Error::Config(_) => "config",
            Error::Parse { .. } => "parse",
            Error::Reference(_) => "reference",
            Error::AtStep { source, .. } => source.kind(),
            Error::Io(_) => "io",
        }
    }
}
