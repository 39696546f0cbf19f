//! Client-side protocol logic: keyword state, ciphertext generation, search
//! trapdoors, result decryption, key-update tokens, and the two padding
//! policies.

mod store;

pub use store::StateFile;

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use rand_core::CryptoRngCore;

use crate::error::CoreError;
use crate::group::{FileId, GroupElement, GroupParams, Op, Payload, Scalar, SearchToken};
use crate::server::Ciphertext;

/// The client's secret key pair plus the key generation it belongs to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SecretKey {
    pub(crate) k1: Scalar,
    pub(crate) k2: Scalar,
    pub(crate) epoch: u64,
}

impl SecretKey {
    /// The search key, revealed to the server inside each trapdoor.
    pub fn k1(&self) -> &Scalar {
        &self.k1
    }

    /// The encryption key; never leaves the client.
    pub fn k2(&self) -> &Scalar {
        &self.k2
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }
}

/// Per-keyword record: the token labeling the keyword's newest ciphertext
/// and the number of data updates issued for it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeywordState {
    pub token: SearchToken,
    pub count: u32,
}

/// How search responses are padded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PaddingPolicy {
    /// Always pad to the fixed maximum.
    Max,
    /// Bucketed padding: powers of `x`, falling back to the maximum.
    Adjustable,
}

impl std::str::FromStr for PaddingPolicy {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self, CoreError> {
        match s {
            "max" => Ok(PaddingPolicy::Max),
            "adjustable" => Ok(PaddingPolicy::Adjustable),
            _ => Err(CoreError::InvalidParams("policy must be `max` or `adjustable`")),
        }
    }
}

/// The keyword map plus an incrementally maintained bucket index
/// (bucket `i` counts keywords whose update counter lies in `(x^(i-1), x^i]`).
#[derive(Debug, Clone)]
pub struct ClientState {
    keywords: HashMap<String, KeywordState>,
    buckets: HashMap<u32, u64>,
    a_max: u64,
    x: u64,
}

impl ClientState {
    pub fn new(a_max: u64, x: u64) -> Result<ClientState, CoreError> {
        if a_max == 0 {
            return Err(CoreError::InvalidParams("a_max must be positive"));
        }
        if x < 2 {
            return Err(CoreError::InvalidParams("x must be at least 2"));
        }
        Ok(ClientState {
            keywords: HashMap::new(),
            buckets: HashMap::new(),
            a_max,
            x,
        })
    }

    /// Rebuilds the bucket index from a raw keyword map (state-file load).
    pub fn from_parts(
        keywords: HashMap<String, KeywordState>,
        a_max: u64,
        x: u64,
    ) -> Result<ClientState, CoreError> {
        let mut state = ClientState::new(a_max, x)?;
        for (_, ks) in keywords.iter() {
            if ks.count == 0 {
                return Err(CoreError::CorruptState("keyword record with zero counter".into()));
            }
            *state.buckets.entry(bucket_index(x, ks.count)).or_insert(0) += 1;
        }
        state.keywords = keywords;
        Ok(state)
    }

    pub fn a_max(&self) -> u64 {
        self.a_max
    }

    pub fn x(&self) -> u64 {
        self.x
    }

    pub fn keyword(&self, keyword: &str) -> Option<&KeywordState> {
        self.keywords.get(keyword)
    }

    pub fn keyword_count(&self, keyword: &str) -> Option<u32> {
        self.keywords.get(keyword).map(|ks| ks.count)
    }

    pub fn len(&self) -> usize {
        self.keywords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keywords.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &KeywordState)> {
        self.keywords.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// Bucket occupancy for the bucket holding `count`.
    fn occupancy(&self, count: u32) -> u64 {
        *self.buckets.get(&bucket_index(self.x, count)).unwrap_or(&0)
    }

    /// Applies a committed update, keeping the bucket index in sync.
    pub(crate) fn commit_update(&mut self, keyword: &str, token: SearchToken, count: u32) {
        if let Some(prev) = self.keywords.get(keyword) {
            let old_bucket = bucket_index(self.x, prev.count);
            if let Some(n) = self.buckets.get_mut(&old_bucket) {
                *n -= 1;
                if *n == 0 {
                    self.buckets.remove(&old_bucket);
                }
            }
        }
        *self.buckets.entry(bucket_index(self.x, count)).or_insert(0) += 1;
        self.keywords.insert(keyword.to_string(), KeywordState { token, count });
    }

    /// Rebuild-and-compare audit of the incremental bucket index.
    pub fn audit_buckets(&self) -> bool {
        let mut rebuilt: HashMap<u32, u64> = HashMap::new();
        for ks in self.keywords.values() {
            *rebuilt.entry(bucket_index(self.x, ks.count)).or_insert(0) += 1;
        }
        rebuilt == self.buckets
    }
}

/// The bucket index of a counter value: the smallest `i >= 1` with
/// `count <= x^i`. A counter of 1 shares the first bucket; giving it a
/// bucket of its own would pad to exactly one element and reveal the count.
fn bucket_index(x: u64, count: u32) -> u32 {
    let mut i = 1u32;
    let mut bound = x as u128;
    while (count as u128) > bound {
        bound *= x as u128;
        i += 1;
    }
    i
}

/// `x^i`, saturating into `u128` territory only transiently.
fn bucket_bound(x: u64, i: u32) -> u128 {
    (x as u128).pow(i)
}

/// Everything the server needs to walk one keyword's ciphertext chain.
#[derive(Debug, Clone)]
pub struct SearchTrapdoor {
    pub k1: Scalar,
    pub label: GroupElement,
    pub mask_d: GroupElement,
    pub mask_c: GroupElement,
    pub pad_target: u64,
    pub epoch: u64,
}

/// The multiplicative re-keying token sent to the server.
#[derive(Debug, Clone)]
pub struct KeyUpdateToken {
    pub delta: Scalar,
    pub new_epoch: u64,
}

/// Draws a fresh key pair and an empty state.
pub fn setup(
    _params: &GroupParams,
    a_max: u64,
    x: u64,
    rng: &mut impl CryptoRngCore,
) -> Result<(SecretKey, ClientState), CoreError> {
    let state = ClientState::new(a_max, x)?;
    let key = SecretKey {
        k1: Scalar::random(rng),
        k2: Scalar::random(rng),
        epoch: 0,
    };
    Ok((key, state))
}

/// Computes the ciphertext and the state transition for one data update
/// without committing it, so callers can persist before mutating.
pub fn prepare_data_update(
    params: &GroupParams,
    key: &SecretKey,
    state: &ClientState,
    op: Op,
    keyword: &str,
    id: &FileId,
    rng: &mut impl CryptoRngCore,
) -> Result<(Ciphertext, SearchToken, u32), CoreError> {
    let (prev_token, count) = match state.keyword(keyword) {
        Some(ks) => (ks.token.clone(), ks.count),
        None => (SearchToken::random(params.n_bits(), rng), 0),
    };
    let new_count = count.checked_add(1).ok_or(CoreError::CounterOverflow)?;
    let token = SearchToken::random(params.n_bits(), rng);

    let label = params.hash_h1(&token).exp(&key.k1);
    let d = params
        .encode(&prev_token, rng)?
        .mul(&params.hash_h2(&token))
        .exp(&key.k1);
    let payload = Payload::new(params, op, id);
    let c = params
        .encode(payload.bits(), rng)?
        .exp(&key.k2)
        .mul(&params.hash_hg(&token).exp(&key.k1));

    Ok((Ciphertext { label, d, c }, token, new_count))
}

/// Encrypts one `(op, keyword, id)` entry and commits the state transition.
pub fn gen_data_update(
    params: &GroupParams,
    key: &SecretKey,
    state: &mut ClientState,
    op: Op,
    keyword: &str,
    id: &FileId,
    rng: &mut impl CryptoRngCore,
) -> Result<Ciphertext, CoreError> {
    let (ciphertext, token, count) = prepare_data_update(params, key, state, op, keyword, id, rng)?;
    state.commit_update(keyword, token, count);
    Ok(ciphertext)
}

/// The adjustable padding value for a keyword. Returns `a_max` when the
/// keyword is alone in its bucket or the bucket bound exceeds `a_max`;
/// otherwise a fair coin picks between the bucket bound and `a_max`.
pub fn padding_value(
    state: &ClientState,
    keyword: &str,
    rng: &mut impl CryptoRngCore,
) -> Result<u64, CoreError> {
    let ks = state.keyword(keyword).ok_or(CoreError::UnknownKeyword)?;
    if state.occupancy(ks.count) < 2 {
        return Ok(state.a_max());
    }
    let bound = bucket_bound(state.x(), bucket_index(state.x(), ks.count));
    if bound > state.a_max() as u128 {
        return Ok(state.a_max());
    }
    if rng.next_u32() & 1 == 1 {
        Ok(state.a_max())
    } else {
        Ok(bound as u64)
    }
}

/// Builds the search trapdoor for a keyword; aborts if the keyword was never
/// updated. Does not mutate state.
pub fn gen_trapdoor(
    params: &GroupParams,
    key: &SecretKey,
    state: &ClientState,
    keyword: &str,
    policy: PaddingPolicy,
    rng: &mut impl CryptoRngCore,
) -> Result<SearchTrapdoor, CoreError> {
    let ks = state.keyword(keyword).ok_or(CoreError::UnknownKeyword)?;
    let pad_target = match policy {
        PaddingPolicy::Max => state.a_max(),
        PaddingPolicy::Adjustable => padding_value(state, keyword, rng)?,
    };
    Ok(SearchTrapdoor {
        k1: key.k1,
        label: params.hash_h1(&ks.token).exp(&key.k1),
        mask_d: params.hash_h2(&ks.token).exp(&key.k1),
        mask_c: params.hash_hg(&ks.token).exp(&key.k1),
        pad_target,
        epoch: key.epoch,
    })
}

/// Decrypts a search response. The server returns components newest-first
/// (chain traversal order); they are replayed oldest-first so deletes land
/// after the adds they cancel. Deleting an absent identifier is a no-op.
/// The dummy tail beyond the keyword's counter is ignored.
pub fn decrypt_results(
    params: &GroupParams,
    key: &SecretKey,
    state: &ClientState,
    keyword: &str,
    components: &[GroupElement],
) -> Result<BTreeSet<FileId>, CoreError> {
    let ks = state.keyword(keyword).ok_or(CoreError::UnknownKeyword)?;
    let count = ks.count as usize;
    if components.len() < count {
        return Err(CoreError::ShortResponse {
            need: count,
            got: components.len(),
        });
    }
    let k2_inv = key.k2.invert();
    let mut entries = Vec::with_capacity(count);
    for component in &components[..count] {
        entries.push(Payload::from_bits(params.decode(&component.exp(&k2_inv))));
    }
    let mut live = BTreeSet::new();
    for payload in entries.iter().rev() {
        match payload.op() {
            Op::Add => {
                live.insert(payload.file_id());
            }
            Op::Del => {
                live.remove(&payload.file_id());
            }
        }
    }
    Ok(live)
}

/// The successor key pair under a given update token.
fn apply_key_update(key: &SecretKey, token: &KeyUpdateToken) -> SecretKey {
    SecretKey {
        k1: key.k1.mul(&token.delta),
        k2: key.k2.mul(&token.delta),
        epoch: token.new_epoch,
    }
}

/// Draws a key-update token and derives the successor key pair.
pub fn gen_key_update(
    key: &SecretKey,
    rng: &mut impl CryptoRngCore,
) -> (SecretKey, KeyUpdateToken) {
    let token = KeyUpdateToken {
        delta: Scalar::random(rng),
        new_epoch: key.epoch + 1,
    };
    (apply_key_update(key, &token), token)
}

/// A client handle bundling key, state, and (optionally) the write-through
/// state file. Every data update is persisted before the ciphertext is
/// handed to the caller; losing a token would orphan the keyword's chain.
pub struct Client {
    params: GroupParams,
    key: SecretKey,
    state: ClientState,
    store: Option<StateFile>,
    pending: Option<KeyUpdateToken>,
}

impl Client {
    /// A client with no backing file (tests, harnesses).
    pub fn in_memory(
        params: GroupParams,
        a_max: u64,
        x: u64,
        rng: &mut impl CryptoRngCore,
    ) -> Result<Client, CoreError> {
        let (key, state) = setup(&params, a_max, x, rng)?;
        Ok(Client {
            params,
            key,
            state,
            store: None,
            pending: None,
        })
    }

    /// Creates a fresh state file (refusing to clobber an existing one) and
    /// the client over it.
    pub fn create(
        path: &Path,
        params: GroupParams,
        a_max: u64,
        x: u64,
        rng: &mut impl CryptoRngCore,
    ) -> Result<Client, CoreError> {
        let (key, state) = setup(&params, a_max, x, rng)?;
        let store = StateFile::create(path, &params, &key, &state)?;
        Ok(Client {
            params,
            key,
            state,
            store: Some(store),
            pending: None,
        })
    }

    /// Opens an existing state file. A pending rotation token whose epoch
    /// the keys already reached (a crash between finalize writes) is cleared
    /// here; a genuinely in-flight one is surfaced via
    /// [`Client::pending_rotation`].
    pub fn open(path: &Path, params: GroupParams) -> Result<Client, CoreError> {
        let (mut store, key, state, mut pending) = StateFile::open(path, &params)?;
        if let Some(token) = &pending {
            if token.new_epoch <= key.epoch {
                store.write_pending(None)?;
                pending = None;
            }
        }
        Ok(Client {
            params,
            key,
            state,
            store: Some(store),
            pending,
        })
    }

    pub fn params(&self) -> &GroupParams {
        &self.params
    }

    pub fn key(&self) -> &SecretKey {
        &self.key
    }

    pub fn state(&self) -> &ClientState {
        &self.state
    }

    pub fn epoch(&self) -> u64 {
        self.key.epoch
    }

    pub fn a_max(&self) -> u64 {
        self.state.a_max()
    }

    /// Seconds since the Unix epoch of the last persisted operation, if a
    /// state file is attached.
    pub fn last_op(&self) -> Option<u64> {
        self.store.as_ref().map(|s| s.last_op())
    }

    pub fn data_update(
        &mut self,
        op: Op,
        keyword: &str,
        id: &FileId,
        rng: &mut impl CryptoRngCore,
    ) -> Result<Ciphertext, CoreError> {
        let (ciphertext, token, count) =
            prepare_data_update(&self.params, &self.key, &self.state, op, keyword, id, rng)?;
        if let Some(store) = &mut self.store {
            store.append_keyword(keyword, &token, count)?;
        }
        self.state.commit_update(keyword, token, count);
        Ok(ciphertext)
    }

    pub fn trapdoor(
        &self,
        keyword: &str,
        policy: PaddingPolicy,
        rng: &mut impl CryptoRngCore,
    ) -> Result<SearchTrapdoor, CoreError> {
        gen_trapdoor(&self.params, &self.key, &self.state, keyword, policy, rng)
    }

    pub fn decrypt_results(
        &self,
        keyword: &str,
        components: &[GroupElement],
    ) -> Result<BTreeSet<FileId>, CoreError> {
        decrypt_results(&self.params, &self.key, &self.state, keyword, components)
    }

    /// The rotation token persisted but not yet finalized, if any.
    pub fn pending_rotation(&self) -> Option<&KeyUpdateToken> {
        self.pending.as_ref()
    }

    /// Draws a rotation token and persists it WITHOUT touching the keys, so
    /// a crash before the server applies it can be resumed or abandoned.
    pub fn begin_key_update(&mut self, rng: &mut impl CryptoRngCore) -> Result<KeyUpdateToken, CoreError> {
        if self.pending.is_some() {
            return Err(CoreError::InvalidParams("a key rotation is already in flight"));
        }
        let token = KeyUpdateToken {
            delta: Scalar::random(rng),
            new_epoch: self.key.epoch + 1,
        };
        if let Some(store) = &mut self.store {
            store.write_pending(Some(&token))?;
        }
        self.pending = Some(token.clone());
        Ok(token)
    }

    /// Applies the pending token to the local keys, overwriting the
    /// persisted key material and clearing the pending slot. Call once the
    /// server has acknowledged the rotation.
    pub fn finalize_key_update(&mut self) -> Result<u64, CoreError> {
        let token = self
            .pending
            .take()
            .ok_or(CoreError::InvalidParams("no key rotation in flight"))?;
        let new_key = apply_key_update(&self.key, &token);
        if let Some(store) = &mut self.store {
            store.write_keys(&new_key)?;
            store.write_pending(None)?;
        }
        self.key = new_key;
        Ok(self.key.epoch)
    }

    /// Drops a pending token that was never applied anywhere.
    pub fn abandon_key_update(&mut self) -> Result<(), CoreError> {
        self.pending = None;
        if let Some(store) = &mut self.store {
            store.write_pending(None)?;
        }
        Ok(())
    }

    /// Rotates the key pair in one step, overwriting the persisted key
    /// material before the old key is dropped. Callers that must survive a
    /// crash between client and server use the begin/finalize pair instead.
    pub fn key_update(&mut self, rng: &mut impl CryptoRngCore) -> Result<KeyUpdateToken, CoreError> {
        let token = self.begin_key_update(rng)?;
        self.finalize_key_update()?;
        Ok(token)
    }
}
