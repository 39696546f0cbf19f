//! Snapshot format: `"BSEKU1" | epoch u64 BE | count u64 BE | sha256(body)`
//! followed by `count` records of `label || D || C` (33 bytes each part).
//! Records are sorted by label so equal databases persist to equal bytes.

use sha2::{Digest, Sha256};

use super::backend::{EdbBackend, MemoryBackend};
use super::EncryptedDatabase;
use crate::error::CoreError;
use crate::group::ELEMENT_BYTES;

const MAGIC: &[u8; 6] = b"BSEKU1";
const HEADER_LEN: usize = 6 + 8 + 8 + 32;
const RECORD_LEN: usize = 3 * ELEMENT_BYTES;

pub(super) fn persist<B: EdbBackend>(backend: &B) -> Vec<u8> {
    let mut records = Vec::with_capacity(backend.len() as usize);
    backend.scan(&mut |label, d, c| {
        let mut rec = [0u8; RECORD_LEN];
        rec[..33].copy_from_slice(label);
        rec[33..66].copy_from_slice(d);
        rec[66..].copy_from_slice(c);
        records.push(rec);
    });
    records.sort_unstable();

    let mut body = Vec::with_capacity(records.len() * RECORD_LEN);
    for rec in &records {
        body.extend_from_slice(rec);
    }
    let checksum = Sha256::digest(&body);

    let mut out = Vec::with_capacity(HEADER_LEN + body.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&backend.epoch().to_be_bytes());
    out.extend_from_slice(&(records.len() as u64).to_be_bytes());
    out.extend_from_slice(&checksum);
    out.extend_from_slice(&body);
    out
}

pub(super) fn restore(bytes: &[u8]) -> Result<EncryptedDatabase<MemoryBackend>, CoreError> {
    if bytes.len() < HEADER_LEN {
        return Err(CoreError::CorruptDatabase("snapshot shorter than its header"));
    }
    if &bytes[..6] != MAGIC {
        return Err(CoreError::CorruptDatabase("bad snapshot magic"));
    }
    let epoch = u64::from_be_bytes(bytes[6..14].try_into().unwrap());
    let count = u64::from_be_bytes(bytes[14..22].try_into().unwrap());
    let checksum: [u8; 32] = bytes[22..54].try_into().unwrap();

    let body = &bytes[HEADER_LEN..];
    let expected_len = (count as usize).checked_mul(RECORD_LEN);
    if expected_len != Some(body.len()) {
        return Err(CoreError::CorruptDatabase("snapshot length does not match entry count"));
    }
    if <[u8; 32]>::from(Sha256::digest(body)) != checksum {
        return Err(CoreError::CorruptDatabase("snapshot checksum mismatch"));
    }

    let mut backend = MemoryBackend::with_capacity(epoch, count as usize);
    for rec in body.chunks_exact(RECORD_LEN) {
        let label: [u8; 33] = rec[..33].try_into().unwrap();
        let d: [u8; 33] = rec[33..66].try_into().unwrap();
        let c: [u8; 33] = rec[66..].try_into().unwrap();
        backend
            .put(label, d, c)
            .map_err(|_| CoreError::CorruptDatabase("snapshot contains a duplicate label"))?;
    }
    Ok(EncryptedDatabase::new(backend))
}
