use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse grouping used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Input,
    Data,
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("non-numeric value {value:?} in column `{column}` at data row {row}")]
    NonNumeric {
        row: usize,
        column: String,
        value: String,
    },

    #[error("need at least {needed} rows, got {got}")]
    TooFewRows { needed: usize, got: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{which} is numerically singular (reciprocal condition {rcond:.3e})")]
    SingularGram { which: &'static str, rcond: f64 },

    #[error("k-class at kappa = 1 needs at least as many excluded instruments as endogenous regressors")]
    UnidentifiedAtOne,

    #[error("estimator requires a just- or over-identified model")]
    UnderIdentified,

    #[error("constraint A'Z a = A'y has no solution in an over-identified model")]
    InfeasibleConstraint,

    #[error("OLS residual is numerically zero")]
    ZeroResidual,

    #[error("OLS loss minus IV loss is numerically zero")]
    DegenerateResidual,

    #[error("TSLS is rejected by the test and no fallback estimator was given")]
    DualInfeasible,

    #[error("test statistic still above threshold at lambda = {lambda:.3e}")]
    NonMonotoneDetected { lambda: f64 },

    #[error("constraint level {t:.6e} is outside ({lower:.6e}, {upper:.6e}]")]
    OutOfDomain { t: f64, lower: f64, upper: f64 },

    #[error("spectral radius {radius:.6} of B is not below 1")]
    NonStationary { radius: f64 },

    #[error("population {0} is singular")]
    SingularPopulationGram(&'static str),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::MissingColumn(_)
            | Error::NonNumeric { .. }
            | Error::TooFewRows { .. }
            | Error::Io(_)
            | Error::Csv(_)
            | Error::Json(_) => ErrorKind::Data,
            Error::DimensionMismatch(_)
            | Error::InvalidParameter(_)
            | Error::UnidentifiedAtOne
            | Error::UnderIdentified
            | Error::InfeasibleConstraint
            | Error::OutOfDomain { .. } => ErrorKind::Input,
            Error::SingularGram { .. }
            | Error::ZeroResidual
            | Error::DegenerateResidual
            | Error::NonMonotoneDetected { .. }
            | Error::DualInfeasible
            | Error::NonStationary { .. }
            | Error::SingularPopulationGram(_) => ErrorKind::Numerical,
        }
    }
}
