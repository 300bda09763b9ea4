use std::path::{Path, PathBuf};

use mixfrac::DegeneracyReport;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },

    #[error("estimation failed: {}", .0.reason)]
    Degenerate(Box<DegeneracyReport>),

    #[error(transparent)]
    Model(mixfrac::Error),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Attaches `path` to I/O failures from the library.
    pub fn at(path: &Path) -> impl FnOnce(mixfrac::Error) -> Self + '_ {
        move |e| match e {
            mixfrac::Error::Io(source) => Self::io(path, source),
            other => Self::from(other),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) | Self::Model(_) => 2,
            Self::Io { .. } => 3,
            Self::Degenerate(_) => 4,
        }
    }
}

impl From<mixfrac::Error> for CliError {
    fn from(e: mixfrac::Error) -> Self {
        match e {
            mixfrac::Error::DegenerateDenominator(r) => Self::Degenerate(r),
            mixfrac::Error::Io(source) => Self::Io {
                path: PathBuf::new(),
                source,
            },
            other => Self::Model(other),
        }
    }
}
