use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("cannot attenuate vacuum to {target} photons")]
    VacuumAmplification { target: f64 },

    #[error("phase code {0} outside [0, 4095]")]
    CodeOutOfRange(i64),

    #[error("pattern has {found} codes, frame length is {expected}")]
    PatternLength { expected: usize, found: usize },

    #[error("no sifted bits, QBER is undefined")]
    InsufficientStatistics,

    #[error("{found} samples is too few for {bins} bins (need at least {required})")]
    Undersampled {
        bins: usize,
        required: usize,
        found: usize,
    },

    #[error("scan point at delay {delay_ns} ns: {source}")]
    ScanPoint {
        delay_ns: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("{}:{line}: {reason}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
