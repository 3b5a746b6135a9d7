use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("training set contains a single class")]
    SingleClass,

    #[error("class {class} has {count} examples, at least 2 required")]
    TooFewExamples { class: u8, count: usize },

    #[error("solver did not converge after {iterations} iterations (violation {violation:.3e}, objective {objective:.6e})")]
    NonConvergence {
        iterations: usize,
        violation: f64,
        objective: f64,
    },

    #[error("pair ({0},{1}): {2}")]
    Pair(u8, u8, #[source] Box<Error>),

    #[error("{malformed} of {total} lines malformed, above threshold {threshold}")]
    TooManyMalformed {
        malformed: usize,
        total: usize,
        threshold: f64,
    },

    #[error("duplicate day {date} for site {site}")]
    DuplicateDay { site: String, date: String },

    #[error("cluster {0} has no labeled training profile")]
    EmptyCluster(usize),

    #[error("need at least {needed} distinct points, found {found}")]
    TooFewDistinct { needed: usize, found: usize },

    #[error("unknown cell {0}")]
    UnknownCell(String),

    #[error("coverage mismatch: {0}")]
    Coverage(String),

    #[error("every fold was skipped")]
    AllFoldsSkipped,

    #[error("every grid cell failed")]
    AllCellsFailed,

    #[error("model format: {0}")]
    ModelFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short stable identifier for machine-readable reporting.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::InvalidInput(_) => "invalid_input",
            Error::Empty(_) => "empty_input",
            Error::SingleClass => "single_class",
            Error::TooFewExamples { .. } => "too_few_examples",
            Error::NonConvergence { .. } => "non_convergence",
            Error::Pair(_, _, inner) => inner.kind(),
            Error::TooManyMalformed { .. } => "malformed_input",
            Error::DuplicateDay { .. } => "duplicate_day",
            Error::EmptyCluster(_) => "empty_cluster",
            Error::TooFewDistinct { .. } => "too_few_distinct",
            Error::UnknownCell(_) => "unknown_cell",
            Error::Coverage(_) => "coverage_mismatch",
            Error::AllFoldsSkipped => "all_folds_skipped",
            Error::AllCellsFailed => "all_cells_failed",
            Error::ModelFormat(_) => "model_format",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
