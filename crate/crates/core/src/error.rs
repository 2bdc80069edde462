use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("malformed file: {0}")]
    Format(String),

    #[error("unsupported bit depth: maxval {0} (only 255 is supported)")]
    UnsupportedDepth(u32),

    #[error("manifest error for case {case_id:?}: {message}")]
    Manifest { case_id: String, message: String },

    #[error("cannot split mask: {0}")]
    Split(String),

    #[error("mask has empty support")]
    EmptyMask,

    #[error("degenerate mask: {0}")]
    DegenerateMask(String),

    #[error("point ({row}, {col}) lies outside the mask support")]
    OutOfSupport { row: f64, col: f64 },

    #[error("shape mismatch: expected {expected:?}, got {actual:?}")]
    Shape {
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("invalid synthetic spec: {0}")]
    Spec(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("backend failure: {message}")]
    Backend { message: String, stderr: String },

    #[error("case {case_id}: {source}")]
    Case {
        case_id: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn shape(expected: (usize, usize), actual: (usize, usize)) -> Self {
        Error::Shape { expected, actual }
    }

    /// Wraps the error with the case it occurred in, unless already tagged.
    pub fn for_case(self, case_id: &str) -> Self {
        match self {
            e @ Error::Case { .. } => e,
            e => Error::Case {
                case_id: case_id.to_string(),
                source: Box::new(e),
            },
        }
    }

    /// Stable short code used in machine-readable error lines.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Format(_) => "format",
            Error::UnsupportedDepth(_) => "unsupported_depth",
            Error::Manifest { .. } => "manifest",
            Error::Split(_) => "split",
            Error::EmptyMask => "empty_mask",
            Error::DegenerateMask(_) => "degenerate_mask",
            Error::OutOfSupport { .. } => "out_of_support",
            Error::Shape { .. } => "shape",
            Error::Spec(_) => "spec",
            Error::Input(_) => "input",
            Error::Backend { .. } => "backend",
            Error::Case { source, .. } => source.code(),
        }
    }

    /// Case id attached to this error, if any.
    pub fn case_id(&self) -> Option<&str> {
        match self {
            Error::Case { case_id, .. } | Error::Manifest { case_id, .. } => Some(case_id),
            _ => None,
        }
    }
}
