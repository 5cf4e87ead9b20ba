use std::path::PathBuf;

use crate::energy::TermKind;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    /// A logarithmic term left its admissible domain (`1 - a*x^p <= 0`).
    #[error(
        "term {kind} infeasible at I1 = {i1}, I2 = {i2}: log argument {argument} is not positive"
    )]
    Infeasible {
        kind: TermKind,
        i1: f64,
        i2: f64,
        argument: f64,
    },

    #[error("point {index} (control {control}): {source}")]
    AtPoint {
        index: usize,
        control: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("infeasible model: {0}")]
    Feasibility(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("degenerate loss: {0}")]
    DegenerateLoss(String),

    #[error("degenerate R²: observed series has zero total sum of squares")]
    DegenerateRSquared,

    #[error("fit failed: {0}")]
    FitFailure(String),

    #[error("discovery failed: {0}")]
    Discovery(String),
}

impl Error {
    pub(crate) fn at_point(self, index: usize, control: f64) -> Self {
        Error::AtPoint {
            index,
            control,
            source: Box::new(self),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
