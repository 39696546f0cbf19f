//! Pluggable record storage for the encrypted database.
//!
//! The backend sees opaque 33-byte labels and component bytes only; nothing
//! keyword-scoped is ever stored. An external key-value service can stand in
//! by implementing [`EdbBackend`].

use std::collections::HashMap;

use crate::error::CoreError;
use crate::group::ELEMENT_BYTES;

/// Serialized label / component widths.
pub type LabelBytes = [u8; ELEMENT_BYTES];

/// One stored record: label, encrypted previous token, encrypted payload.
pub type RecordBytes = (LabelBytes, LabelBytes, LabelBytes);

/// Storage contract: point lookups by label, full scans, and an atomic
/// whole-space swap used by key rotation.
pub trait EdbBackend: Send {
    fn epoch(&self) -> u64;

    fn len(&self) -> u64;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn get(&self, label: &LabelBytes) -> Option<(LabelBytes, LabelBytes)>;

    /// Inserts a record; a duplicate label is a protocol error.
    fn put(&mut self, label: LabelBytes, d: LabelBytes, c: LabelBytes) -> Result<(), CoreError>;

    fn delete(&mut self, label: &LabelBytes) -> bool;

    fn scan(&self, visit: &mut dyn FnMut(&LabelBytes, &LabelBytes, &LabelBytes));

    /// Replaces the whole record space and advances the epoch in one step.
    /// No reader of this backend may observe a half-swapped state; with the
    /// in-memory backend the `&mut` receiver guarantees that.
    fn swap_epoch(&mut self, new_epoch: u64, records: Vec<RecordBytes>);
}

/// The default heap-backed store.
#[derive(Debug, Default)]
pub struct MemoryBackend {
    epoch: u64,
    records: HashMap<LabelBytes, (LabelBytes, LabelBytes)>,
}

impl MemoryBackend {
    pub fn new(epoch: u64) -> MemoryBackend {
        MemoryBackend {
            epoch,
            records: HashMap::new(),
        }
    }

    pub fn with_capacity(epoch: u64, capacity: usize) -> MemoryBackend {
        MemoryBackend {
            epoch,
            records: HashMap::with_capacity(capacity),
        }
    }
}

impl EdbBackend for MemoryBackend {
    fn epoch(&self) -> u64 {
        self.epoch
    }

    fn len(&self) -> u64 {
        self.records.len() as u64
    }

    fn get(&self, label: &LabelBytes) -> Option<(LabelBytes, LabelBytes)> {
        self.records.get(label).copied()
    }

    fn put(&mut self, label: LabelBytes, d: LabelBytes, c: LabelBytes) -> Result<(), CoreError> {
        match self.records.entry(label) {
            std::collections::hash_map::Entry::Occupied(_) => Err(CoreError::DuplicateLabel),
            std::collections::hash_map::Entry::Vacant(slot) => {
                slot.insert((d, c));
                Ok(())
            }
        }
    }

    fn delete(&mut self, label: &LabelBytes) -> bool {
        self.records.remove(label).is_some()
    }

    fn scan(&self, visit: &mut dyn FnMut(&LabelBytes, &LabelBytes, &LabelBytes)) {
        for (label, (d, c)) in &self.records {
            visit(label, d, c);
        }
    }

    fn swap_epoch(&mut self, new_epoch: u64, records: Vec<RecordBytes>) {
        let mut fresh = HashMap::with_capacity(records.len());
        for (label, d, c) in records {
            fresh.insert(label, (d, c));
        }
        self.records = fresh;
        self.epoch = new_epoch;
    }
}
