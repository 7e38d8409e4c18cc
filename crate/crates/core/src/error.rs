use thiserror::Error;

/// Errors raised by the solvers.
///
/// Variants are grouped by what the caller can do about them: input problems
/// (`Scenario`, `Parse`, `Argument`, `Io`) are fixable by the user, numeric
/// and sampling failures indicate a degenerate instance, and `Invariant`
/// means an internal post-condition did not hold.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid scenario field `{field}`: {reason}")]
    Scenario { field: String, reason: String },

    #[error("parse error in field `{field}`: {reason}")]
    Parse { field: String, reason: String },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("numeric failure in {module}: {detail}")]
    Numeric { module: &'static str, detail: String },

    #[error("sampling failure: {0}")]
    Sampling(String),

    #[error("grid of {cells} cells exceeds the budget of {limit}; {suggestion}")]
    Budget {
        cells: u64,
        limit: u64,
        suggestion: String,
    },

    #[error("invariant violated in {module}: {detail}")]
    Invariant { module: &'static str, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn scenario(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Scenario {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn parse(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Parse {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn numeric(module: &'static str, detail: impl Into<String>) -> Self {
        Error::Numeric {
            module,
            detail: detail.into(),
        }
    }

    pub(crate) fn invariant(module: &'static str, detail: impl Into<String>) -> Self {
        Error::Invariant {
            module,
            detail: detail.into(),
        }
    }

    /// True for errors caused by bad user input rather than numerics.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Scenario { .. }
                | Error::Parse { .. }
                | Error::Argument(_)
                | Error::Io(_)
                | Error::Json(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
