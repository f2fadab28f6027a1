use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error{}: {msg}", fmt_row(.row))]
    Domain { row: Option<usize>, msg: String },

    #[error("integration failed at y = {location}: {msg}")]
    Integration { location: f64, msg: String },

    #[error("solver did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { residual: f64, iterations: usize },

    #[error("rank-deficient {what}: rank {rank} < {cols} columns")]
    RankDeficient {
        what: String,
        rank: usize,
        cols: usize,
    },

    #[error("complete separation in binary outcome fit: {0}")]
    Separation(String),

    #[error("degenerate missingness: {0}")]
    DegenerateMissingness(String),

    #[error("degenerate residual variance (exact fit)")]
    DegenerateVariance { coefficients: Vec<f64> },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("schema error{}: {msg}", fmt_row(.row))]
    Schema { row: Option<usize>, msg: String },
}

fn fmt_row(row: &Option<usize>) -> String {
    match row {
        Some(r) => format!(" at row {r}"),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain {
            row: None,
            msg: msg.into(),
        }
    }

    /// Attach a row index to domain and schema errors that lack one.
    pub fn at_row(self, row: usize) -> Self {
        match self {
            Error::Domain { row: None, msg } => Error::Domain {
                row: Some(row),
                msg,
            },
            Error::Schema { row: None, msg } => Error::Schema {
                row: Some(row),
                msg,
            },
            other => other,
        }
    }

    /// True for failures of the numerical machinery rather than of the input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Integration { .. }
                | Error::NonConvergence { .. }
                | Error::Separation(_)
                | Error::DegenerateVariance { .. }
        )
    }
}
