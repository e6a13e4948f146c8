use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A single field of an input record failed validation.
    #[error("row {row}: field `{field}`: {reason}")]
    Validation {
        row: usize,
        field: String,
        reason: String,
    },

    #[error("unknown {kind}: `{token}`")]
    UnknownCode { kind: &'static str, token: String },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("matching failed: {0}")]
    Matching(String),

    /// CSV header does not match the observation schema.
    #[error("header mismatch: missing [{}], unexpected [{}]", missing.join(", "), extra.join(", "))]
    Header {
        missing: Vec<String>,
        extra: Vec<String>,
    },

    /// Several rows failed validation; the diagnostics are kept in file order.
    #[error("{} invalid row(s); first: {}", .0.len(), .0.first().map(|e| e.to_string()).unwrap_or_default())]
    Rows(Vec<Error>),

    #[error("unsupported model format version {found} (this build reads {expected})")]
    UnsupportedVersion { found: u32, expected: u32 },

    #[error("{stage} stage: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Coarse failure classes, used by the command line to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Data,
    Numeric,
}

impl Error {
    pub fn argument(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    pub(crate) fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Numeric(_) => ErrorClass::Numeric,
            Error::Stage { source, .. } => source.class(),
            _ => ErrorClass::Data,
        }
    }
}

pub(crate) fn ensure_finite(values: &[f64], what: &str) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::numeric(format!("{what}: non-finite value at index {i}"))),
        None => Ok(()),
    }
}
