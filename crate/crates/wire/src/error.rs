use thiserror::Error;

/// Error codes carried in ERROR frames.
pub mod code {
    pub const EPOCH_MISMATCH: u8 = 1;
    pub const DUPLICATE_LABEL: u8 = 2;
    pub const MALFORMED: u8 = 3;
    pub const INTERNAL: u8 = 4;
    pub const OVERSIZE: u8 = 5;
    pub const UNSUPPORTED_VERSION: u8 = 6;
}

#[derive(Debug, Error)]
pub enum WireError {
    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("peer closed the stream mid-frame")]
    Truncated,

    #[error("frame body of {got} bytes exceeds the {max}-byte limit")]
    Oversize { got: u64, max: u32 },

    #[error("malformed frame: {0}")]
    Malformed(&'static str),

    #[error("handshake failed: {0}")]
    Handshake(&'static str),

    #[error("unsupported protocol version {0}")]
    UnsupportedVersion(u8),

    #[error("server identity does not match the pinned fingerprint")]
    FingerprintMismatch,

    #[error("sealed frame failed to authenticate")]
    Seal,

    #[error("nonce counter out of sequence (expected {expected}, got {got})")]
    NonceReplay { expected: u64, got: u64 },

    #[error("peer reported error {code}: {message}")]
    Remote {
        code: u8,
        /// Epoch of the database that answered, echoed from the frame header.
        epoch: u64,
        message: String,
    },

    #[error("protocol violation: {0}")]
    Protocol(&'static str),
}

impl WireError {
    /// True when the failure is the server's epoch fence.
    pub fn is_epoch_mismatch(&self) -> bool {
        matches!(self, WireError::Remote { code: code::EPOCH_MISMATCH, .. })
    }
}
