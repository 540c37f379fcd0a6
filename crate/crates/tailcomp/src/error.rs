//! Error types shared across the crate.

use std::fmt;
use std::io;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors emitted by dataset handling, training, transfer and evaluation.
#[derive(Debug)]
pub enum Error {
    /// A vector with norm below the zero-detection threshold was passed to an
    /// operation that requires normalization.
    ZeroVector,
    /// A dataset (or batch source) contains no usable samples.
    EmptyDataset,
    /// No class satisfies the eligibility threshold `n_l > k`.
    EmptyEligibleSet { k: usize },
    /// An ensemble prediction was requested with no member classifiers.
    EmptyEnsemble,
    /// A prototype was required for a class that has none in its source split.
    AbsentPrototype { class: usize },
    /// A candidate class has no prototype but was included in prediction.
    AbsentClass { class: usize },
    /// Two operands disagree on dimension or class count.
    DimensionMismatch { expected: usize, got: usize },
    /// A configuration value violates its invariant.
    ConfigInvalid(String),
    /// Training encountered a non-finite loss.
    DivergedLoss { step: usize },
    /// A binary file did not start with the expected magic bytes.
    BadMagic { expected: [u8; 4], found: [u8; 4] },
    /// A binary file declared an unsupported format version.
    BadVersion(u32),
    /// An unknown classifier-kind byte was found in a HEAD file.
    BadKind(u8),
    /// A binary file ended before its declared payload was complete.
    TruncatedFile,
    /// A binary file has bytes beyond its declared payload.
    TrailingBytes { extra: usize },
    /// A stored label is not a valid class index.
    LabelOutOfRange { label: u32, num_classes: u32 },
    /// Underlying I/O failure.
    Io(io::Error),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::ZeroVector => write!(f, "vector has (near-)zero norm"),
            Error::EmptyDataset => write!(f, "dataset contains no samples"),
            Error::EmptyEligibleSet { k } => {
                write!(f, "no class has more than {k} training samples")
            }
            Error::EmptyEnsemble => write!(f, "ensemble has no member classifiers"),
            Error::AbsentPrototype { class } => {
                write!(f, "class {class} has no prototype in its source split")
            }
            Error::AbsentClass { class } => {
                write!(f, "class {class} is absent from the prototype set")
            }
            Error::DimensionMismatch { expected, got } => {
                write!(f, "dimension mismatch: expected {expected}, got {got}")
            }
            Error::ConfigInvalid(msg) => write!(f, "invalid configuration: {msg}"),
            Error::DivergedLoss { step } => {
                write!(f, "training loss became non-finite at step {step}")
            }
            Error::BadMagic { expected, found } => write!(
                f,
                "bad magic: expected {:?}, found {:?}",
                String::from_utf8_lossy(expected),
                String::from_utf8_lossy(found)
            ),
            Error::BadVersion(v) => write!(f, "unsupported format version {v}"),
            Error::BadKind(b) => write!(f, "unknown classifier kind byte {b}"),
            Error::TruncatedFile => write!(f, "file is truncated"),
            Error::TrailingBytes { extra } => {
                write!(f, "file has {extra} bytes beyond the declared payload")
            }
            Error::LabelOutOfRange { label, num_classes } => {
                write!(f, "label {label} out of range for {num_classes} classes")
            }
            Error::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(e) => Some(e),
            _ => None,
        }
    }
}

impl From<io::Error> for Error {
    fn from(e: io::Error) -> Self {
        Error::Io(e)
    }
}

impl Error {
    /// Process exit code convention: 2 for configuration/usage errors, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::ConfigInvalid(_) => 2,
            _ => 1,
        }
    }
}
