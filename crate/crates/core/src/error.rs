use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("node index {index} out of range for a graph with {p} nodes")]
    NodeOutOfRange { index: usize, p: usize },

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("invalid motif: {0}")]
    InvalidMotif(String),

    #[error("CyclicInput: SID is only applicable to DAGs")]
    CyclicInput,

    #[error("SidOnCyclic: SID is only applicable to DAGs (trace contains a cyclic graph)")]
    SidOnCyclic,

    #[error("SingularSystem: |det(I - B)| = {det:e} is at or below the guard 1e-10")]
    SingularSystem { det: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("empty trace")]
    EmptyTrace,

    #[error("EmptyConditional: no samples include this edge")]
    EmptyConditional,

    #[error("NonNumericCell at row {row}, column {col}: {value:?}")]
    NonNumericCell { row: usize, col: usize, value: String },

    #[error("MissingValue at row {row}, column {col}")]
    MissingValue { row: usize, col: usize },

    #[error("RaggedRows: row {row} has {found} fields, expected {expected}")]
    RaggedRows { row: usize, expected: usize, found: usize },

    #[error("VersionMismatch: trace format version {found}, expected {expected}")]
    VersionMismatch { expected: u32, found: u32 },

    #[error("TruncatedRecord at line {line}: {reason}")]
    TruncatedRecord { line: usize, reason: String },

    #[error("malformed record at line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },

    #[error("custom distance failed: {0}")]
    CustomDistance(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Stable variant name, for machine-readable error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::NodeOutOfRange { .. } => "NodeOutOfRange",
            Error::InvalidGraph(_) => "InvalidGraph",
            Error::InvalidMotif(_) => "InvalidMotif",
            Error::CyclicInput => "CyclicInput",
            Error::SidOnCyclic => "SidOnCyclic",
            Error::SingularSystem { .. } => "SingularSystem",
            Error::InvalidParameter(_) => "InvalidParameter",
            Error::InvalidData(_) => "InvalidData",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::EmptyTrace => "EmptyTrace",
            Error::EmptyConditional => "EmptyConditional",
            Error::NonNumericCell { .. } => "NonNumericCell",
            Error::MissingValue { .. } => "MissingValue",
            Error::RaggedRows { .. } => "RaggedRows",
            Error::VersionMismatch { .. } => "VersionMismatch",
            Error::TruncatedRecord { .. } => "TruncatedRecord",
            Error::MalformedRecord { .. } => "MalformedRecord",
            Error::CustomDistance(_) => "CustomDistance",
            Error::Io(_) => "Io",
            Error::Csv(_) => "Csv",
        }
    }
}
