use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("space mismatch: {0}")]
    SpaceMismatch(String),

    #[error("operator `{name}` is not Hermitian (max |M - M†| = {deviation:e})")]
    NotHermitian { name: String, deviation: f64 },

    #[error("unphysical bath: |M|^2 = {m_sq} exceeds N(N+1) = {bound}")]
    UnphysicalBath { m_sq: f64, bound: f64 },

    #[error("unphysical parameters: {0}")]
    Unphysical(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("malformed generator: {0}")]
    MalformedGenerator(String),

    #[error("no unique steady state: second-smallest singular value {second_smallest:e}")]
    NoUniqueSteadyState { second_smallest: f64 },

    #[error("state invariant violated at t = {time}: {detail}")]
    InvariantViolation { time: f64, detail: String },

    #[error("step too large: {0}")]
    StepTooLarge(String),

    #[error("conditioned state lost positivity (seed {seed}, step {step}): min eigenvalue {min_eigenvalue:e}")]
    PositivityFailure {
        seed: u64,
        step: usize,
        min_eigenvalue: f64,
    },

    #[error("time grid mismatch: {0}")]
    GridMismatch(String),
}

impl Error {
    /// True for errors caused by physically inadmissible parameters rather
    /// than malformed input or numerical trouble.
    pub fn is_unphysical(&self) -> bool {
        matches!(self, Error::UnphysicalBath { .. } | Error::Unphysical(_))
    }

    /// True for failures that happen while computing, as opposed to argument
    /// validation.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NoUniqueSteadyState { .. }
                | Error::InvariantViolation { .. }
                | Error::StepTooLarge(_)
                | Error::PositivityFailure { .. }
                | Error::MalformedGenerator(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
