use std::fmt;
use std::path::PathBuf;

/// Pipeline stage a hash failure originated from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Detect,
    Graph,
    Spectrum,
    Saliency,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Stage::Detect => "detect",
            Stage::Graph => "graph",
            Stage::Spectrum => "spectrum",
            Stage::Saliency => "saliency",
        };
        f.write_str(name)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: cannot decode image: {reason}", path.display())]
    Decode { path: PathBuf, reason: String },
    #[error("{}: unsupported image format: {reason}", path.display())]
    UnsupportedFormat { path: PathBuf, reason: String },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid image: {0}")]
    InvalidImage(String),
    #[error("no corners detected")]
    NoCorners,
    #[error("degenerate saliency graph: {0}")]
    DegenerateGraph(String),
    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("distance undefined: {0}")]
    UndefinedDistance(String),
    #[error("hash failure at {stage} stage: {source}")]
    HashFailure {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },
    #[error("malformed hash file: {0}")]
    Format(String),
    #[error("hash format version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("output canvas {width}x{height} exceeds the size limit")]
    CanvasTooLarge { width: usize, height: usize },
    #[error("evaluation harness: {0}")]
    Harness(String),
}

impl Error {
    pub(crate) fn at(stage: Stage) -> impl FnOnce(Error) -> Error {
        move |source| Error::HashFailure {
            stage,
            source: Box::new(source),
        }
    }

    /// The innermost error, looking through stage tags.
    pub fn root(&self) -> &Error {
        match self {
            Error::HashFailure { source, .. } => source.root(),
            other => other,
        }
    }

    pub fn is_no_corners(&self) -> bool {
        matches!(self.root(), Error::NoCorners)
    }
}

pub type Result<T> = std::result::Result<T, Error>;
