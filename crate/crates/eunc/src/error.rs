use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum EuncError {
    #[error("column {name} is degenerate: sample sd {sd:.3e} is below {limit:.0e}")]
    DegenerateColumn { name: String, sd: f64, limit: f64 },

    #[error("non-finite value in column {name} at row {row}")]
    NonFinite { name: String, row: usize },

    #[error("invalid scenario: {reason}")]
    InvalidSpec { reason: String },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("unsupported moment: {0}")]
    UnsupportedMoment(String),

    #[error("sample too small: need at least {min} observations, got {got}")]
    SampleTooSmall { min: usize, got: usize },

    #[error("too few samples to fit: need at least {min}, got {got}")]
    TooFewSamples { min: usize, got: usize },

    #[error("singular basis: Gram matrix rank-deficient beyond ridge repair")]
    SingularBasis,

    #[error("unsupported spec for the conditional-expectation oracle: {0}")]
    UnsupportedSpec(String),

    #[error("collinear design: Gram condition number {cond:.3e} exceeds {limit:.1e}")]
    CollinearDesign { cond: f64, limit: f64 },

    #[error("rank-deficient instruments: Z'Z is numerically singular")]
    RankDeficientInstruments,

    #[error("too many bootstrap failures: {failed} of {total} resamples failed the pipeline")]
    TooManyFailures { failed: usize, total: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, EuncError>;
