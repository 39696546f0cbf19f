//! The plaintext reference oracle: an unencrypted replay of the update
//! history that defines the ground-truth result set for every search.

use std::collections::{BTreeSet, HashMap};

use bamboo_core::{FileId, Op};

/// One step of a workload script.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Step {
    Add(String, FileId),
    Del(String, FileId),
    Search(String),
    Rotate,
}

/// Ordered per-keyword update history plus replay semantics: a search
/// returns the identifiers with an add not followed by a later delete.
/// Deleting an absent identifier is a no-op; rotations change nothing.
#[derive(Debug, Default, Clone)]
pub struct PlainIndex {
    history: HashMap<String, Vec<(u64, Op, FileId)>>,
    seq: u64,
}

impl PlainIndex {
    pub fn new() -> PlainIndex {
        PlainIndex::default()
    }

    pub fn apply(&mut self, step: &Step) {
        match step {
            Step::Add(w, id) => self.update(w, Op::Add, id.clone()),
            Step::Del(w, id) => self.update(w, Op::Del, id.clone()),
            Step::Search(_) | Step::Rotate => {}
        }
    }

    pub fn update(&mut self, keyword: &str, op: Op, id: FileId) {
        self.seq += 1;
        self.history
            .entry(keyword.to_string())
            .or_default()
            .push((self.seq, op, id));
    }

    /// Number of updates recorded for a keyword.
    pub fn update_count(&self, keyword: &str) -> usize {
        self.history.get(keyword).map_or(0, |h| h.len())
    }

    /// The live identifier set for a keyword, sorted.
    pub fn search(&self, keyword: &str) -> Vec<FileId> {
        let mut live = BTreeSet::new();
        if let Some(history) = self.history.get(keyword) {
            for (_, op, id) in history {
                match op {
                    Op::Add => {
                        live.insert(id.clone());
                    }
                    Op::Del => {
                        live.remove(id);
                    }
                }
            }
        }
        live.into_iter().collect()
    }

    pub fn keywords(&self) -> impl Iterator<Item = &str> {
        self.history.keys().map(|k| k.as_str())
    }
}
