//! The embedded key-value state file.
//!
//! Layout: a fixed-width header holding the key material and padding config,
//! followed by an append-only log of keyword records (latest record wins).
//! Appends land before the matching ciphertext is released, so a torn tail
//! record can only describe an update whose ciphertext never left the
//! process; recovery truncates it.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use crate::client::{ClientState, KeyUpdateToken, KeywordState, SecretKey};
use crate::error::CoreError;
use crate::group::{BitString, GroupParams, Scalar, SCALAR_BYTES};

const MAGIC: &[u8; 7] = b"BSKUST1";
const VERSION: u8 = 1;

// Header offsets.
const OFF_VERSION: u64 = 7;
const OFF_N_BITS: u64 = 8;
const OFF_EPOCH: u64 = 10;
const OFF_A_MAX: u64 = 18;
const OFF_X: u64 = 26;
const OFF_LAST_OP: u64 = 34;
const OFF_K1: u64 = 42;
const OFF_K2: u64 = 74;
const OFF_PENDING: u64 = 106;
const HEADER_LEN: u64 = 147;

/// Handle to an open state file. Writes go straight to the file; the
/// in-memory [`ClientState`] is committed only after the bytes are down.
pub struct StateFile {
    file: File,
    path: PathBuf,
    last_op: u64,
}

fn now_unix() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn open_options(create_new: bool) -> OpenOptions {
    let mut opts = OpenOptions::new();
    opts.read(true).write(true);
    if create_new {
        opts.create_new(true);
    }
    #[cfg(unix)]
    {
        use std::os::unix::fs::OpenOptionsExt;
        opts.mode(0o600);
    }
    opts
}

impl StateFile {
    /// Creates a fresh state file (mode 0600); fails if the path exists.
    pub fn create(
        path: &Path,
        params: &GroupParams,
        key: &SecretKey,
        state: &ClientState,
    ) -> Result<StateFile, CoreError> {
        let mut file = open_options(true).open(path)?;
        let last_op = now_unix();
        let mut header = Vec::with_capacity(HEADER_LEN as usize);
        header.extend_from_slice(MAGIC);
        header.push(VERSION);
        header.extend_from_slice(&params.n_bits().to_be_bytes());
        header.extend_from_slice(&key.epoch.to_be_bytes());
        header.extend_from_slice(&state.a_max().to_be_bytes());
        header.extend_from_slice(&state.x().to_be_bytes());
        header.extend_from_slice(&last_op.to_be_bytes());
        header.extend_from_slice(&key.k1.to_bytes());
        header.extend_from_slice(&key.k2.to_bytes());
        header.extend_from_slice(&[0u8; 41]); // empty pending-rotation slot
        debug_assert_eq!(header.len() as u64, HEADER_LEN);
        file.write_all(&header)?;
        file.flush()?;
        Ok(StateFile {
            file,
            path: path.to_path_buf(),
            last_op,
        })
    }

    /// Opens and replays an existing state file. A truncated trailing record
    /// (torn write) is discarded and the file trimmed back to it.
    pub fn open(
        path: &Path,
        params: &GroupParams,
    ) -> Result<(StateFile, SecretKey, ClientState, Option<KeyUpdateToken>), CoreError> {
        let mut file = open_options(false).open(path)?;
        let mut raw = Vec::new();
        file.read_to_end(&mut raw)?;
        if raw.len() < HEADER_LEN as usize {
            return Err(CoreError::CorruptState("state file shorter than its header".into()));
        }
        if &raw[..7] != MAGIC {
            return Err(CoreError::CorruptState("bad state file magic".into()));
        }
        if raw[OFF_VERSION as usize] != VERSION {
            return Err(CoreError::CorruptState(format!(
                "unsupported state file version {}",
                raw[OFF_VERSION as usize]
            )));
        }
        let n_bits = u16::from_be_bytes(raw[OFF_N_BITS as usize..OFF_N_BITS as usize + 2].try_into().unwrap());
        if n_bits != params.n_bits() {
            return Err(CoreError::CorruptState(format!(
                "state file was created for n={n_bits}, parameters say n={}",
                params.n_bits()
            )));
        }
        let read_u64 = |off: u64| u64::from_be_bytes(raw[off as usize..off as usize + 8].try_into().unwrap());
        let epoch = read_u64(OFF_EPOCH);
        let a_max = read_u64(OFF_A_MAX);
        let x = read_u64(OFF_X);
        let last_op = read_u64(OFF_LAST_OP);
        let k1 = Scalar::from_bytes(&raw[OFF_K1 as usize..OFF_K1 as usize + SCALAR_BYTES])
            .map_err(|_| CoreError::CorruptState("invalid search key".into()))?;
        let k2 = Scalar::from_bytes(&raw[OFF_K2 as usize..OFF_K2 as usize + SCALAR_BYTES])
            .map_err(|_| CoreError::CorruptState("invalid encryption key".into()))?;
        let pending = if raw[OFF_PENDING as usize] == 1 {
            let delta = Scalar::from_bytes(&raw[OFF_PENDING as usize + 1..OFF_PENDING as usize + 33])
                .map_err(|_| CoreError::CorruptState("invalid pending rotation token".into()))?;
            let new_epoch =
                u64::from_be_bytes(raw[OFF_PENDING as usize + 33..HEADER_LEN as usize].try_into().unwrap());
            Some(KeyUpdateToken { delta, new_epoch })
        } else {
            None
        };

        let token_len = params.n_len();
        let mut keywords: HashMap<String, KeywordState> = HashMap::new();
        let mut pos = HEADER_LEN as usize;
        let mut good_end = pos;
        while pos < raw.len() {
            let Some(record) = parse_record(&raw[pos..], token_len, params.n_bits())? else {
                break; // torn tail
            };
            let (keyword, state, consumed) = record;
            keywords.insert(keyword, state);
            pos += consumed;
            good_end = pos;
        }
        if good_end < raw.len() {
            file.set_len(good_end as u64)?;
        }
        file.seek(SeekFrom::End(0))?;

        let key = SecretKey { k1, k2, epoch };
        let state = ClientState::from_parts(keywords, a_max, x)?;
        Ok((
            StateFile {
                file,
                path: path.to_path_buf(),
                last_op,
            },
            key,
            state,
            pending,
        ))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Seconds since the Unix epoch of the last persisted operation.
    pub fn last_op(&self) -> u64 {
        self.last_op
    }

    /// Appends one keyword record and bumps the last-op stamp.
    pub fn append_keyword(
        &mut self,
        keyword: &str,
        token: &BitString,
        count: u32,
    ) -> Result<(), CoreError> {
        let kw = keyword.as_bytes();
        let mut record = Vec::with_capacity(4 + kw.len() + token.as_bytes().len() + 4);
        record.extend_from_slice(&(kw.len() as u32).to_be_bytes());
        record.extend_from_slice(kw);
        record.extend_from_slice(token.as_bytes());
        record.extend_from_slice(&count.to_be_bytes());
        self.file.seek(SeekFrom::End(0))?;
        self.file.write_all(&record)?;
        self.touch()?;
        self.file.flush()?;
        Ok(())
    }

    /// Overwrites the persisted key material and epoch in place.
    pub fn write_keys(&mut self, key: &SecretKey) -> Result<(), CoreError> {
        self.file.seek(SeekFrom::Start(OFF_EPOCH))?;
        self.file.write_all(&key.epoch.to_be_bytes())?;
        self.file.seek(SeekFrom::Start(OFF_K1))?;
        self.file.write_all(&key.k1.to_bytes())?;
        self.file.write_all(&key.k2.to_bytes())?;
        self.touch()?;
        self.file.seek(SeekFrom::End(0))?;
        self.file.flush()?;
        Ok(())
    }

    /// Records or clears the in-flight rotation token. The token persists
    /// before it is offered to the server, so an interrupted rotation can be
    /// resumed or abandoned instead of stranding the two sides in different
    /// epochs.
    pub fn write_pending(&mut self, pending: Option<&KeyUpdateToken>) -> Result<(), CoreError> {
        let mut slot = [0u8; 41];
        if let Some(token) = pending {
            slot[0] = 1;
            slot[1..33].copy_from_slice(&token.delta.to_bytes());
            slot[33..].copy_from_slice(&token.new_epoch.to_be_bytes());
        }
        self.file.seek(SeekFrom::Start(OFF_PENDING))?;
        self.file.write_all(&slot)?;
        self.file.seek(SeekFrom::End(0))?;
        self.file.flush()?;
        Ok(())
    }

    fn touch(&mut self) -> Result<(), CoreError> {
        self.last_op = now_unix();
        self.file.seek(SeekFrom::Start(OFF_LAST_OP))?;
        self.file.write_all(&self.last_op.to_be_bytes())?;
        self.file.seek(SeekFrom::End(0))?;
        Ok(())
    }
}

type ParsedRecord = (String, KeywordState, usize);

/// Parses one record; `Ok(None)` means the tail is torn short.
fn parse_record(
    buf: &[u8],
    token_len: usize,
    n_bits: u16,
) -> Result<Option<ParsedRecord>, CoreError> {
    if buf.len() < 4 {
        return Ok(None);
    }
    let klen = u32::from_be_bytes(buf[..4].try_into().unwrap()) as usize;
    if klen == 0 || klen > 64 * 1024 {
        return Err(CoreError::CorruptState("implausible keyword length".into()));
    }
    let total = 4 + klen + token_len + 4;
    if buf.len() < total {
        return Ok(None);
    }
    let keyword = std::str::from_utf8(&buf[4..4 + klen])
        .map_err(|_| CoreError::CorruptState("keyword is not valid UTF-8".into()))?
        .to_string();
    let token = BitString::from_bytes(n_bits, &buf[4 + klen..4 + klen + token_len])
        .map_err(|_| CoreError::CorruptState("invalid token bytes".into()))?;
    let count = u32::from_be_bytes(buf[total - 4..total].try_into().unwrap());
    if count == 0 {
        return Err(CoreError::CorruptState("keyword record with zero counter".into()));
    }
    Ok(Some((keyword, KeywordState { token, count }, total)))
}
