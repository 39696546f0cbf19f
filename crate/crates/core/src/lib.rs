//! Core building blocks for a searchable encrypted index with delegated,
//! non-interactive key rotation.
//!
//! The crate is split along the protocol roles:
//!
//! - [`group`]: prime-order group arithmetic, the invertible string-to-point
//!   mapping, and the hash-to-group oracles.
//! - [`client`]: keyword state, ciphertext and trapdoor generation, result
//!   decryption, padding policies, and the persistent state file.
//! - [`server`]: the encrypted label-indexed database, chained search,
//!   whole-database key rotation, and snapshots.

pub mod client;
pub mod error;
pub mod group;
pub mod server;

pub use error::CoreError;
pub use group::{pgen, BitString, FileId, GroupElement, GroupParams, Op, Payload, Scalar, SearchToken};
