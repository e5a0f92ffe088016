//! Crate-wide error type.
//!
//! Errors split into two classes: `Input` (bad data, bad configuration,
//! degenerate designs — things the caller can fix) and `Numeric` (the
//! estimation itself broke down, e.g. a rank-deficient final stage).
//! The CLI maps the classes to distinct exit codes.

use thiserror::Error;

/// Broad classification used for exit-code mapping.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Input,
    Numeric,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("required column `{0}` is missing")]
    MissingColumn(String),
    #[error("column `{0}` does not belong to the panel schema")]
    UnknownColumn(String),
    #[error("contest `{0}` appears with conflicting treatment values")]
    TreatmentInconsistent(String),
    #[error("contest `{contest}`: cluster covariate `{column}` is not constant")]
    ZInconsistent { contest: String, column: String },
    #[error("line {line}, column `{column}`: value {value} outside [0, 1] in strict mode")]
    RangeViolation {
        line: usize,
        column: String,
        value: f64,
    },
    #[error("line {line}, column `{column}`: {message}")]
    ParseField {
        line: usize,
        column: String,
        message: String,
    },
    #[error("dataset contains no data rows")]
    EmptyDataset,
    #[error("contest `{0}` has no precinct rows")]
    EmptyCluster(String),
    #[error("treatment is degenerate: need at least one treated and one control cluster")]
    DegenerateTreatment,
    #[error("cannot build {k} folds from {clusters} clusters")]
    TooFewClusters { k: usize, clusters: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("fits use different polynomial degrees ({0} vs {1})")]
    SpecMismatch(usize, usize),
    #[error("restriction matrix is not full row rank ({0})")]
    RankMismatch(String),
    #[error("I/O error on `{path}`: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("CSV error on `{path}`: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },

    #[error("nuisance design matrix is rank deficient (unpenalized fit)")]
    SingularDesign,
    #[error("final-stage design matrix is rank deficient (relative tolerance 1e-10)")]
    RankDeficient,
    #[error("scaling matrix J is singular")]
    SingularJ,
    #[error("restricted covariance R Var R' is singular")]
    SingularRestriction,
    #[error("linear combination has zero variance")]
    ZeroVariance,
    #[error("pointwise standard error is zero at grid point x = {0}")]
    ZeroSe(f64),
    #[error("Monte Carlo repetition {rep} failed: {source}")]
    McRep {
        rep: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Stable machine-readable kind string.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::MissingColumn(_) => "MissingColumn",
            Error::UnknownColumn(_) => "UnknownColumn",
            Error::TreatmentInconsistent(_) => "TreatmentInconsistent",
            Error::ZInconsistent { .. } => "ZInconsistent",
            Error::RangeViolation { .. } => "RangeViolation",
            Error::ParseField { .. } => "ParseField",
            Error::EmptyDataset => "EmptyDataset",
            Error::EmptyCluster(_) => "EmptyCluster",
            Error::DegenerateTreatment => "DegenerateTreatment",
            Error::TooFewClusters { .. } => "TooFewClusters",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::SpecMismatch(..) => "SpecMismatch",
            Error::RankMismatch(_) => "RankMismatch",
            Error::Io { .. } => "Io",
            Error::Csv { .. } => "Csv",
            Error::SingularDesign => "SingularDesign",
            Error::RankDeficient => "RankDeficient",
            Error::SingularJ => "SingularJ",
            Error::SingularRestriction => "SingularRestriction",
            Error::ZeroVariance => "ZeroVariance",
            Error::ZeroSe(_) => "ZeroSe",
            Error::McRep { source, .. } => source.kind(),
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::SingularDesign
            | Error::RankDeficient
            | Error::SingularJ
            | Error::SingularRestriction
            | Error::ZeroVariance
            | Error::ZeroSe(_) => ErrorClass::Numeric,
            // a repetition failing mid-study is a runtime failure of the
            // study regardless of the underlying kind
            Error::McRep { .. } => ErrorClass::Numeric,
            _ => ErrorClass::Input,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
