use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty neighborhood")]
    EmptyNeighborhood,

    #[error(
        "dimension out of range: flat dimension {d} must be below ambient dimension {ambient}"
    )]
    DimensionOutOfRange { d: usize, ambient: usize },

    #[error("dimension mismatch: point has dimension {point}, flat lives in dimension {ambient}")]
    DimensionMismatch { point: usize, ambient: usize },

    #[error("start size exceeds data: start {start} > {n} points")]
    StartSizeExceedsData { start: usize, n: usize },

    #[error("empty flat list")]
    EmptyFlatList,

    #[error("candidate count {c} must exceed cluster count {k}")]
    TooFewCandidates { c: usize, k: usize },

    #[error("degenerate energy: W values must be positive")]
    DegenerateEnergy,

    #[error("angle constraint infeasible: no draw met the minimum angle in {attempts} attempts")]
    AngleConstraintInfeasible { attempts: usize },

    #[error("no inliers: every point carries the outlier label")]
    NoInliers,

    #[error("label count {labels} does not match point count {points}")]
    LabelCountMismatch { labels: usize, points: usize },

    #[error("non-finite coordinate at point {row}")]
    NonFinite { row: usize },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

impl Error {
    /// True for errors caused by a bad configuration rather than bad input data.
    /// The CLI maps these to a distinct exit code.
    pub fn is_config(&self) -> bool {
        !matches!(
            self,
            Error::Io { .. } | Error::Parse { .. } | Error::NonFinite { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
