use std::path::PathBuf;

use thiserror::Error;

use crate::detector::codec::{EncodeError, ParseError, ParseFailure};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("infeasible slower design: {reason} (minimum length {min_length_m:.4} m)")]
    InfeasibleDesign { reason: String, min_length_m: f64 },

    #[error("infeasible winding constraints: {0}")]
    InfeasibleLayout(String),

    #[error("radially unstable trap: B'^2/B0 = {gradient_term:.4e} T/m^2 < B''/2 = {curvature_term:.4e} T/m^2")]
    UnstableTrap { gradient_term: f64, curvature_term: f64 },

    #[error("unknown stage `{0}`")]
    UnknownStage(String),

    #[error("bimodal fit did not converge after {iterations} iterations (residual {residual:.4e})")]
    FitFailure { iterations: usize, residual: f64 },

    #[error("hit stream not time-ordered in quadrant {quadrant} at index {index}")]
    UnorderedStream { quadrant: u8, index: usize },

    #[error("corrupt hit in quadrant {quadrant}: delay-line sum residual {residual_s:.3e} s exceeds {tolerance_s:.3e} s")]
    CorruptHit { quadrant: u8, residual_s: f64, tolerance_s: f64 },

    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error(transparent)]
    Encode(#[from] EncodeError),

    #[error("line {line}: {message}")]
    Csv { line: usize, message: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("refusing to write outside the output directory: {0}")]
    OutsideOutputDir(PathBuf),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Innermost error below any stage context.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            e => e,
        }
    }

    /// Wraps an error with the pipeline stage it came from.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage { stage, source: Box::new(self) }
    }
}

impl From<ParseFailure> for Error {
    fn from(f: ParseFailure) -> Self {
        Error::Parse(f.error)
    }
}
