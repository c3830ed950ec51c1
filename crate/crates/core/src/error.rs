use thiserror::Error;

/// Errors produced by estimation, tuning, and data handling.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("tuning-constant calibration failed: root not bracketed in [{lo}, {hi}]")]
    CalibrationFailure { lo: f64, hi: f64 },

    #[error("unsupported dimension: n = {n}, p = {p} (need n > p)")]
    UnsupportedDimension { n: usize, p: usize },

    #[error("no nonsingular elemental subset found after {attempts} attempts")]
    SingularSubsets { attempts: usize },

    #[error("singular linear system (offending coordinates: {coords:?})")]
    SingularSystem { coords: Vec<usize> },

    #[error("degenerate curvature: mean psi' = {0:e}")]
    DegenerateCurvature(f64),

    #[error("internal invariant violated: {0}")]
    InvariantViolation(String),

    #[error("all {} grid fits failed: {}", .0.len(), format_failures(.0))]
    SelectionFailed(Vec<(f64, String)>),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("data error: {0}")]
    Data(String),

    #[error("parse error at row {row}, column \"{column}\": cannot read {value:?} as a number")]
    Parse {
        row: usize,
        column: String,
        value: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn format_failures(failures: &[(f64, String)]) -> String {
    failures
        .iter()
        .map(|(lambda, msg)| format!("lambda={lambda}: {msg}"))
        .collect::<Vec<_>>()
        .join("; ")
}

impl Error {
    /// True for errors caused by the input data rather than the numerics.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidInput(_)
                | Error::Data(_)
                | Error::Parse { .. }
                | Error::Io(_)
                | Error::Csv(_)
                | Error::DimensionMismatch { .. }
                | Error::UnsupportedDimension { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
