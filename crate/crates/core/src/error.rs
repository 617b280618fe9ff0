use std::io;

use thiserror::Error;

/// Errors produced by the library.
///
/// Every variant maps onto one of the CLI exit classes through
/// [`Error::is_numeric`]: numeric failures exit with 3, everything else with 2.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter lies outside its admissible domain.
    #[error("parameter out of domain: {0}")]
    Param(String),

    /// Malformed textual input. `line` is 1-based when known.
    #[error("{}", fmt_input(.line, .message))]
    Input {
        line: Option<usize>,
        message: String,
    },

    /// A binary or JSON document does not follow its declared format.
    #[error("format error: {0}")]
    Format(String),

    /// A versioned document declares a schema this build does not understand.
    #[error("unsupported schema {found:?} (expected {expected:?})")]
    Version { found: String, expected: String },

    /// Well-formed data that violates a domain invariant.
    #[error("validation error: {0}")]
    Validation(String),

    /// The integrator produced a non-finite state.
    #[error("numeric failure at step {step}: {message}")]
    Numeric { step: usize, message: String },

    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

fn fmt_input(line: &Option<usize>, message: &str) -> String {
    match line {
        Some(l) => format!("{message} at line {l}"),
        None => message.to_string(),
    }
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Param(msg.into())
    }

    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input {
            line: None,
            message: msg.into(),
        }
    }

    pub(crate) fn input_at(line: usize, msg: impl Into<String>) -> Self {
        Error::Input {
            line: Some(line),
            message: msg.into(),
        }
    }

    pub(crate) fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }

    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    /// True for integration failures (non-finite state).
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::Numeric { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
