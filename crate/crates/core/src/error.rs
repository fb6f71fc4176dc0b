use thiserror::Error;

/// Why a PBM file failed to parse.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PbmErrorKind {
    MalformedHeader,
    Truncated,
    DimensionOverflow,
    BadPixel,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("pbm {kind:?} at byte {offset}: {detail}")]
    Pbm {
        kind: PbmErrorKind,
        offset: usize,
        detail: String,
    },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("invalid dimensions {width}x{height}")]
    InvalidDimensions { width: usize, height: usize },

    #[error("dimension mismatch: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),

    #[error("invalid filter: {0}")]
    InvalidFilter(String),

    #[error("pixel index {index} out of bounds for {len} pixels")]
    OutOfBounds { index: usize, len: usize },

    #[error("dictionary is empty")]
    EmptyDictionary,

    #[error("symbol {0} has no mapped dictionary entry")]
    UnmappedSymbol(usize),

    #[error("mapping does not match the image symbols: {0}")]
    InconsistentMapping(String),

    #[error("entry dimensions {width}x{height} exceed 65535")]
    EntryTooLarge { width: usize, height: usize },

    #[error("bad magic bytes")]
    BadMagic,

    #[error("unsupported stream version {0}")]
    UnsupportedVersion(u8),

    #[error("truncated stream: {0}")]
    Truncated(String),

    #[error("segment {segment} length mismatch: declared {declared}, consumed {consumed}")]
    SegmentLength {
        segment: &'static str,
        declared: usize,
        consumed: usize,
    },

    #[error("{0} unexpected trailing bytes")]
    TrailingBytes(usize),

    #[error("corrupt stream: {0}")]
    Corrupt(String),

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("config: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
