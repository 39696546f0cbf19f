use thiserror::Error;

/// Errors surfaced by the core protocol and storage layers.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("unsupported security level: {0} (only 128 is supported)")]
    UnsupportedSecurityLevel(u16),

    #[error("payload width {n_bits} bits does not fit the field ({max_bits} embeddable bits)")]
    PayloadTooWide { n_bits: u16, max_bits: u16 },

    #[error("invalid parameter: {0}")]
    InvalidParams(&'static str),

    #[error("malformed encoding: {0}")]
    BadEncoding(&'static str),

    #[error("point encoding failed after exhausting retries")]
    EncodingFailed,

    #[error("invalid file identifier: {0}")]
    InvalidIdentifier(&'static str),

    #[error("unknown keyword")]
    UnknownKeyword,

    #[error("update counter overflow")]
    CounterOverflow,

    #[error("epoch mismatch: expected {expected}, got {got}")]
    EpochMismatch { expected: u64, got: u64 },

    #[error("duplicate ciphertext label")]
    DuplicateLabel,

    #[error("response shorter than expected: need {need}, got {got}")]
    ShortResponse { need: usize, got: usize },

    #[error("corrupt database: {0}")]
    CorruptDatabase(&'static str),

    #[error("corrupt client state: {0}")]
    CorruptState(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CoreError {
    /// True for errors caused by a stale or wrong epoch.
    pub fn is_epoch_mismatch(&self) -> bool {
        matches!(self, CoreError::EpochMismatch { .. })
    }
}
