use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// The configuration text could not be parsed.
    #[error("configuration error: {0}")]
    Config(String),

    /// A value parsed fine but violates an invariant.
    #[error("validation error: {field}: {message}")]
    Validation { field: String, message: String },

    /// An input is outside the mathematical domain of an operation.
    #[error("domain error in {op}: {message}")]
    Domain { op: &'static str, message: String },

    #[error("fit error: {0}")]
    Fit(String),

    #[error("analysis error: {0}")]
    Analysis(String),

    #[error("malformed {what}: {message}")]
    Format { what: &'static str, message: String },

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn domain(op: &'static str, message: impl Into<String>) -> Self {
        Error::Domain {
            op,
            message: message.into(),
        }
    }

    /// True for errors caused by user input rather than runtime failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::Validation { .. }
                | Error::Domain { .. }
                | Error::Format { .. }
        )
    }
}

/// Fails with a validation error unless `value > 0` and finite.
pub(crate) fn require_positive(field: &str, label: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::validation(
            field,
            format!("{label} must be > 0, got {value}"),
        ))
    }
}

/// Fails unless `lo < value <= hi`.
pub(crate) fn require_in_half_open(
    field: &str,
    label: &str,
    value: f64,
    lo: f64,
    hi: f64,
) -> Result<()> {
    if value.is_finite() && value > lo && value <= hi {
        Ok(())
    } else {
        Err(Error::validation(
            field,
            format!("{label} must be in ({lo}, {hi}], got {value}"),
        ))
    }
}

pub(crate) fn require_in_closed(
    field: &str,
    label: &str,
    value: f64,
    lo: f64,
    hi: f64,
) -> Result<()> {
    if value.is_finite() && (lo..=hi).contains(&value) {
        Ok(())
    } else {
        Err(Error::validation(
            field,
            format!("{label} must be in [{lo}, {hi}], got {value}"),
        ))
    }
}
