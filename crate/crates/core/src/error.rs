use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the toolkit can report.
///
/// Variants are grouped by who is at fault: [`Error::is_usage`] marks bad
/// arguments or configuration, [`Error::is_internal`] marks numeric
/// breakdowns, and everything else is a problem with the data on disk.
#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {}", .0.display())]
    NotFound(PathBuf),

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: String, found: String },

    #[error("unsupported format version {0}")]
    UnsupportedVersion(u32),

    #[error("truncated payload: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },

    #[error("{0} trailing bytes after payload")]
    TrailingBytes(usize),

    #[error("non-finite pixel value at index {0}")]
    NonFinite(usize),

    #[error("mask value {value} at index {index} is not 0 or 1")]
    InvalidMaskValue { index: usize, value: f32 },

    #[error("invalid dimensions {height}x{width}")]
    InvalidDimensions { height: usize, width: usize },

    #[error("shape mismatch: {left:?} vs {right:?}")]
    ShapeMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("mask selects no pixels")]
    EmptyMask,

    #[error("no positive pixels inside the evaluation region")]
    NoPositives,

    #[error("no admissible center for radius {radius} inside the object mask")]
    NoAdmissibleCenter { radius: f64 },

    #[error("region centered at ({row}, {col}) with radius {radius} leaves the {height}x{width} image")]
    RegionOutOfBounds {
        row: f64,
        col: f64,
        radius: f64,
        height: usize,
        width: usize,
    },

    #[error("missing reconstructions: {}", .0.join(", "))]
    MissingReconstruction(Vec<String>),

    #[error("manifest {}: {message}", path.display())]
    Manifest { path: PathBuf, message: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("image {id}: {source}")]
    Image {
        id: String,
        #[source]
        source: Box<Error>,
    },

    #[error("malformed file {}: {message}", path.display())]
    Malformed { path: PathBuf, message: String },

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::NotFound(path)
        } else {
            Error::Io { path, source }
        }
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Attach the identity of the image being processed.
    pub fn for_image(self, id: impl Into<String>) -> Self {
        Error::Image {
            id: id.into(),
            source: Box::new(self),
        }
    }

    pub fn is_usage(&self) -> bool {
        match self {
            Error::InvalidArgument(_) | Error::Config(_) => true,
            Error::Image { source, .. } => source.is_usage(),
            _ => false,
        }
    }

    pub fn is_internal(&self) -> bool {
        match self {
            Error::Numerical(_) => true,
            Error::Image { source, .. } => source.is_internal(),
            _ => false,
        }
    }
}
