//! Error type shared across the toolkit.

use std::fmt;
use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors emitted by tensor ops, training, datasets, and the pipeline.
#[derive(Debug)]
pub enum Error {
    /// Two tensors fed to `op` had incompatible shapes.
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    /// An op produced a NaN or infinity.
    NonFinite { op: &'static str },
    /// A precondition on an argument failed (bad probability, empty set, ...).
    InvalidArg { ctx: &'static str, msg: String },
    /// Experiment configuration rejected before any work started.
    Config { msg: String },
    /// Generator loss became non-finite at the given step.
    Diverged { step: usize },
    /// Checkpoint bytes did not match the expected layout.
    CheckpointFormat { msg: String },
    /// Loaded parameters do not line up with the configured model/method.
    ModelMismatch { msg: String },
    /// Malformed PGM payload; `offset` is the byte where parsing failed.
    PgmParse {
        path: PathBuf,
        offset: usize,
        msg: String,
    },
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl Error {
    pub fn invalid(ctx: &'static str, msg: impl Into<String>) -> Self {
        Error::InvalidArg {
            ctx,
            msg: msg.into(),
        }
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config { msg: msg.into() }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the CLI: 2 config, 3 runtime, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } => 2,
            Error::Io { .. } | Error::PgmParse { .. } => 4,
            _ => 3,
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::ShapeMismatch { op, lhs, rhs } => {
                write!(f, "{op}: shape mismatch between {lhs:?} and {rhs:?}")
            }
            Error::NonFinite { op } => write!(f, "{op}: produced a non-finite value"),
            Error::InvalidArg { ctx, msg } => write!(f, "{ctx}: {msg}"),
            Error::Config { msg } => write!(f, "config error: {msg}"),
            Error::Diverged { step } => {
                write!(f, "training diverged: non-finite generator loss at step {step}")
            }
            Error::CheckpointFormat { msg } => write!(f, "checkpoint format error: {msg}"),
            Error::ModelMismatch { msg } => write!(f, "model mismatch: {msg}"),
            Error::PgmParse { path, offset, msg } => {
                write!(f, "{}: malformed PGM at byte {offset}: {msg}", path.display())
            }
            Error::Io { path, source } => write!(f, "{}: {source}", path.display()),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io { source, .. } => Some(source),
            _ => None,
        }
    }
}
