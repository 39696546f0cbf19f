//! Server side: encrypted database storage, chained keyword search with
//! padding, and delegated parallel key rotation.

mod backend;
mod snapshot;

pub use backend::{EdbBackend, LabelBytes, MemoryBackend, RecordBytes};

use std::thread;

use rand_core::CryptoRngCore;

use crate::client::{KeyUpdateToken, SearchTrapdoor};
use crate::error::CoreError;
use crate::group::{GroupElement, GroupParams};

/// One encrypted entry: the label indexing it, the encrypted previous
/// search token, and the encrypted payload.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ciphertext {
    pub label: GroupElement,
    pub d: GroupElement,
    pub c: GroupElement,
}

/// A search result: partially decrypted components, real matches first in
/// reverse insertion order, then dummies up to the requested pad target.
#[derive(Debug, Clone)]
pub struct SearchResponse {
    pub components: Vec<GroupElement>,
    /// Number of real components at the front of `components`.
    pub found: usize,
}

impl SearchResponse {
    /// True when the real results exceeded the pad target, i.e. the response
    /// went out unpadded. Worth a configuration warning upstream.
    pub fn overflowed(&self, pad_target: u64) -> bool {
        self.found as u64 > pad_target
    }
}

/// The label-indexed encrypted database.
#[derive(Debug)]
pub struct EncryptedDatabase<B: EdbBackend = MemoryBackend> {
    backend: B,
}

impl EncryptedDatabase<MemoryBackend> {
    /// An empty in-memory database at epoch 0.
    pub fn empty() -> Self {
        EncryptedDatabase {
            backend: MemoryBackend::new(0),
        }
    }

    /// Rebuilds a database from a snapshot produced by [`Self::persist`].
    pub fn restore(bytes: &[u8]) -> Result<Self, CoreError> {
        snapshot::restore(bytes)
    }

    /// Loads a snapshot file.
    pub fn load(path: &std::path::Path) -> Result<Self, CoreError> {
        let bytes = std::fs::read(path)?;
        snapshot::restore(&bytes)
    }
}

impl<B: EdbBackend> EncryptedDatabase<B> {
    pub fn new(backend: B) -> Self {
        EncryptedDatabase { backend }
    }

    pub fn epoch(&self) -> u64 {
        self.backend.epoch()
    }

    pub fn len(&self) -> u64 {
        self.backend.len()
    }

    pub fn is_empty(&self) -> bool {
        self.backend.is_empty()
    }

    pub fn backend(&self) -> &B {
        &self.backend
    }

    /// Inserts one ciphertext. The sender's epoch must match.
    pub fn store(&mut self, epoch: u64, ct: &Ciphertext) -> Result<(), CoreError> {
        if epoch != self.backend.epoch() {
            return Err(CoreError::EpochMismatch {
                expected: self.backend.epoch(),
                got: epoch,
            });
        }
        self.backend
            .put(ct.label.to_bytes(), ct.d.to_bytes(), ct.c.to_bytes())
    }

    /// Walks one keyword's hidden chain starting at the trapdoor label,
    /// collecting partially decrypted components, then pads with uniform
    /// dummies up to the trapdoor's pad target. Does not mutate the database.
    ///
    /// An absent starting label yields a pure-dummy response instead of an
    /// error, so the server behaves identically for "never updated" and
    /// "wrong token".
    pub fn search(
        &self,
        params: &GroupParams,
        td: &SearchTrapdoor,
        rng: &mut impl CryptoRngCore,
    ) -> Result<SearchResponse, CoreError> {
        if td.epoch != self.backend.epoch() {
            return Err(CoreError::EpochMismatch {
                expected: self.backend.epoch(),
                got: td.epoch,
            });
        }
        let k1_inv = td.k1.invert();
        let mut label = td.label;
        let mut mask_d = td.mask_d;
        let mut mask_c = td.mask_c;
        let mut components = Vec::new();
        while let Some((d_bytes, c_bytes)) = self.backend.get(&label.to_bytes()) {
            let d = GroupElement::from_bytes(&d_bytes)?;
            let c = GroupElement::from_bytes(&c_bytes)?;
            components.push(c.div(&mask_c));
            // Recover the previous ciphertext's token and hop to it.
            let token = params.decode(&d.div(&mask_d).exp(&k1_inv));
            label = params.hash_h1(&token).exp(&td.k1);
            mask_d = params.hash_h2(&token).exp(&td.k1);
            mask_c = params.hash_hg(&token).exp(&td.k1);
            if components.len() as u64 > self.backend.len() {
                return Err(CoreError::CorruptDatabase("label chain cycles"));
            }
        }
        let found = components.len();
        while (components.len() as u64) < td.pad_target {
            components.push(GroupElement::random(rng));
        }
        Ok(SearchResponse { components, found })
    }

    /// Re-keys every record by the update token, in `workers` independent
    /// shards, then swaps the record space and advances the epoch in one
    /// step. Callers hold `&mut`, so no concurrent query can observe a
    /// half-rotated database.
    pub fn rotate(&mut self, token: &KeyUpdateToken, workers: usize) -> Result<(), CoreError> {
        if workers == 0 {
            return Err(CoreError::InvalidParams("rotation needs at least one worker"));
        }
        let expected = self.backend.epoch() + 1;
        if token.new_epoch != expected {
            return Err(CoreError::EpochMismatch {
                expected,
                got: token.new_epoch,
            });
        }

        // Partition by label hash so shards are independent.
        let mut shards: Vec<Vec<RecordBytes>> = vec![Vec::new(); workers];
        self.backend.scan(&mut |label, d, c| {
            let shard = (u64::from_be_bytes(label[1..9].try_into().unwrap()) % workers as u64) as usize;
            shards[shard].push((*label, *d, *c));
        });

        let delta = &token.delta;
        let rotated: Vec<Result<Vec<RecordBytes>, CoreError>> = if workers == 1 {
            vec![rotate_shard(&shards.pop().unwrap(), delta)]
        } else {
            thread::scope(|scope| {
                let handles: Vec<_> = shards
                    .iter()
                    .map(|shard| scope.spawn(move || rotate_shard(shard, delta)))
                    .collect();
                handles.into_iter().map(|h| h.join().expect("rotation worker panicked")).collect()
            })
        };

        let mut merged = Vec::with_capacity(self.backend.len() as usize);
        for result in rotated {
            merged.extend(result?);
        }
        self.backend.swap_epoch(token.new_epoch, merged);
        Ok(())
    }

    /// Serializes the database to a checksummed snapshot.
    pub fn persist(&self) -> Vec<u8> {
        snapshot::persist(&self.backend)
    }

    /// Atomically writes a snapshot file (temp file + rename).
    pub fn save(&self, path: &std::path::Path) -> Result<(), CoreError> {
        let bytes = self.persist();
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, &bytes)?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }
}

fn rotate_shard(
    records: &[RecordBytes],
    delta: &crate::group::Scalar,
) -> Result<Vec<RecordBytes>, CoreError> {
    let mut out = Vec::with_capacity(records.len());
    for (label, d, c) in records {
        let label = GroupElement::from_bytes(label)?.exp(delta);
        let d = GroupElement::from_bytes(d)?.exp(delta);
        let c = GroupElement::from_bytes(c)?.exp(delta);
        out.push((label.to_bytes(), d.to_bytes(), c.to_bytes()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{pgen, Scalar};
    use rand::thread_rng;

    fn random_ciphertext(rng: &mut impl CryptoRngCore) -> Ciphertext {
        Ciphertext {
            label: GroupElement::random(rng),
            d: GroupElement::random(rng),
            c: GroupElement::random(rng),
        }
    }

    #[test]
    fn store_and_lookup() {
        let mut rng = thread_rng();
        let mut edb = EncryptedDatabase::empty();
        let ct = random_ciphertext(&mut rng);
        edb.store(0, &ct).unwrap();
        assert_eq!(edb.len(), 1);
        let (d, c) = edb.backend().get(&ct.label.to_bytes()).unwrap();
        assert_eq!(d, ct.d.to_bytes());
        assert_eq!(c, ct.c.to_bytes());
    }

    #[test]
    fn store_rejects_stale_epoch_and_duplicates() {
        let mut rng = thread_rng();
        let mut edb = EncryptedDatabase::empty();
        let ct = random_ciphertext(&mut rng);
        assert!(matches!(
            edb.store(3, &ct),
            Err(CoreError::EpochMismatch { expected: 0, got: 3 })
        ));
        edb.store(0, &ct).unwrap();
        assert!(matches!(edb.store(0, &ct), Err(CoreError::DuplicateLabel)));
        assert_eq!(edb.len(), 1);
    }

    #[test]
    fn absent_label_searches_to_pure_dummies() {
        let mut rng = thread_rng();
        let params = pgen(128, 128).unwrap();
        let edb = EncryptedDatabase::empty();
        let td = SearchTrapdoor {
            k1: Scalar::random(&mut rng),
            label: GroupElement::random(&mut rng),
            mask_d: GroupElement::random(&mut rng),
            mask_c: GroupElement::random(&mut rng),
            pad_target: 17,
            epoch: 0,
        };
        let resp = edb.search(&params, &td, &mut rng).unwrap();
        assert_eq!(resp.found, 0);
        assert_eq!(resp.components.len(), 17);
    }

    #[test]
    fn rotation_demands_the_next_epoch() {
        let mut rng = thread_rng();
        let mut edb = EncryptedDatabase::empty();
        let token = KeyUpdateToken {
            delta: Scalar::random(&mut rng),
            new_epoch: 2,
        };
        assert!(matches!(
            edb.rotate(&token, 1),
            Err(CoreError::EpochMismatch { expected: 1, got: 2 })
        ));
        assert!(edb.rotate(&KeyUpdateToken { delta: Scalar::random(&mut rng), new_epoch: 1 }, 0).is_err());
    }

    #[test]
    fn rotation_roundtrips_bitwise() {
        let mut rng = thread_rng();
        let mut edb = EncryptedDatabase::empty();
        let mut originals = Vec::new();
        for _ in 0..64 {
            let ct = random_ciphertext(&mut rng);
            edb.store(0, &ct).unwrap();
            originals.push(ct);
        }
        let delta = Scalar::random(&mut rng);
        edb.rotate(&KeyUpdateToken { delta, new_epoch: 1 }, 3).unwrap();
        assert_eq!(edb.len(), 64);
        // Labels are all different after rotation.
        for ct in &originals {
            assert!(edb.backend().get(&ct.label.to_bytes()).is_none());
        }
        edb.rotate(
            &KeyUpdateToken { delta: delta.invert(), new_epoch: 2 },
            2,
        )
        .unwrap();
        assert_eq!(edb.len(), 64);
        for ct in &originals {
            let (d, c) = edb.backend().get(&ct.label.to_bytes()).expect("label restored");
            assert_eq!(d, ct.d.to_bytes());
            assert_eq!(c, ct.c.to_bytes());
        }
    }

    #[test]
    fn snapshot_roundtrip() {
        let mut rng = thread_rng();
        let mut edb = EncryptedDatabase::empty();
        for _ in 0..32 {
            edb.store(0, &random_ciphertext(&mut rng)).unwrap();
        }
        let token = KeyUpdateToken { delta: Scalar::random(&mut rng), new_epoch: 1 };
        edb.rotate(&token, 1).unwrap();

        let bytes = edb.persist();
        let restored = EncryptedDatabase::restore(&bytes).unwrap();
        assert_eq!(restored.epoch(), 1);
        assert_eq!(restored.len(), 32);
        assert_eq!(restored.persist(), bytes);

        // Empty database round-trips too.
        let empty = EncryptedDatabase::empty();
        let restored = EncryptedDatabase::restore(&empty.persist()).unwrap();
        assert_eq!(restored.len(), 0);
        assert_eq!(restored.epoch(), 0);
    }

    #[test]
    fn snapshot_rejects_corruption() {
        let mut rng = thread_rng();
        let mut edb = EncryptedDatabase::empty();
        for _ in 0..4 {
            edb.store(0, &random_ciphertext(&mut rng)).unwrap();
        }
        let bytes = edb.persist();

        // Truncation.
        assert!(matches!(
            EncryptedDatabase::restore(&bytes[..bytes.len() - 10]),
            Err(CoreError::CorruptDatabase(_))
        ));
        // Bit flip in the body.
        let mut flipped = bytes.clone();
        let last = flipped.len() - 1;
        flipped[last] ^= 0x40;
        assert!(matches!(
            EncryptedDatabase::restore(&flipped),
            Err(CoreError::CorruptDatabase(_))
        ));
        // Bad magic.
        let mut bad = bytes.clone();
        bad[0] ^= 0xff;
        assert!(EncryptedDatabase::restore(&bad).is_err());
    }
}
