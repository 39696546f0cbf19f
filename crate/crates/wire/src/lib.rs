//! Framed request/response transport between the client and the server.
//!
//! Frames are `{type, epoch, length, body}`; data updates travel in the
//! clear, while search and key-update exchanges run inside a temporary
//! secure channel (ephemeral ECDH, HKDF-SHA256 with transcript binding,
//! ChaCha20-Poly1305 with counter nonces). Large search responses stream in
//! fixed-size chunks.

pub mod channel;
pub mod error;
pub mod frame;
pub mod inmem;
pub mod messages;
pub mod session;

pub use channel::{fingerprint_of, Fingerprint, SecureChannel, PROTOCOL_VERSION};
pub use error::WireError;
pub use frame::{Frame, FrameConn, MsgType, DEFAULT_MAX_BODY};
pub use session::{ClientSession, EdbService, SessionSummary, CHUNK_ELEMENTS};
