use thiserror::Error;

/// Errors raised by the pipeline.
///
/// Variants are grouped by how the CLI reports them: [`Error::Parse`] and
/// [`Error::Io`] are input problems, everything else is a contract violation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid bounding box: {0}")]
    InvalidBox(String),

    #[error("mask dimension mismatch: {0}x{1} vs {2}x{3}")]
    MaskDimensions(usize, usize, usize, usize),

    #[error("both masks are empty")]
    EmptyMasks,

    #[error("invalid scores: {0}")]
    InvalidScores(String),

    #[error("invalid detection: {0}")]
    InvalidDetection(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("frame too small: {width}x{height} cannot hold a {block}px block")]
    FrameTooSmall { width: usize, height: usize, block: usize },

    #[error("frame size mismatch: {0}x{1} vs {2}x{3}")]
    FrameDimensions(usize, usize, usize, usize),

    #[error("need at least {needed} items, got {got}")]
    TooFew { needed: usize, got: usize },

    #[error("detection for frame {found} passed to tracker step for frame {expected}")]
    FrameMismatch { expected: u64, found: u64 },

    #[error("frames must be strictly increasing: {previous} then {next}")]
    UnsortedFrames { previous: u64, next: u64 },

    #[error("track {track_id} has no {kind} scores")]
    MissingScores { track_id: u64, kind: &'static str },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("no matching entry for AFO '{0}'")]
    UnmatchedAfo(String),

    #[error("ground-truth total must be positive")]
    ZeroGroundTruth,

    #[error("class '{label}' has {count} members, fewer than {folds} folds")]
    ClassTooSmall { label: String, count: usize, folds: usize },

    #[error("'{0}' is not a leaf label")]
    NotALeaf(String),

    #[error("infeasible scenario: {0}")]
    Infeasible(String),

    #[error("{source_name}:{line}: {message}")]
    Parse { source_name: String, line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(source_name: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse { source_name: source_name.into(), line, message: message.into() }
    }

    /// True for malformed input as opposed to a violated contract.
    pub fn is_parse(&self) -> bool {
        matches!(self, Error::Parse { .. } | Error::Io(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
