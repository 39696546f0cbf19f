//! Protocol sessions: the client's request/response driver and the server's
//! per-connection dispatch loop around a shared encrypted database.
//!
//! Data updates travel in the clear (the ciphertext protects itself); search
//! and key update run inside a temporary sealed channel, one handshake per
//! exchange. Within an epoch, stores and searches interleave freely across
//! sessions; a key rotation takes the exclusive write fence.

use std::io::{Read, Write};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::RwLock;

use bamboo_core::client::{KeyUpdateToken, SearchTrapdoor};
use bamboo_core::group::{GroupElement, GroupParams};
use bamboo_core::server::{Ciphertext, EncryptedDatabase, MemoryBackend};
use bamboo_core::CoreError;

use crate::channel::{handshake_client, handshake_server, Fingerprint, SecureChannel};
use crate::error::{code, WireError};
use crate::frame::{Frame, FrameConn, MsgType, DEFAULT_MAX_BODY};
use crate::messages;

/// Components per SEARCH_RESP chunk; keeps a 410k-element response far away
/// from any single-frame limit.
pub const CHUNK_ELEMENTS: usize = 1000;

/// Hard cap on a response total accepted by the client.
const MAX_RESPONSE_TOTAL: u64 = 1 << 24;

/// Client end of a session.
pub struct ClientSession<S: Read + Write> {
    conn: FrameConn<S>,
    pin: Option<Fingerprint>,
}

impl<S: Read + Write> ClientSession<S> {
    pub fn new(stream: S) -> ClientSession<S> {
        ClientSession {
            conn: FrameConn::new(stream, DEFAULT_MAX_BODY),
            pin: None,
        }
    }

    pub fn with_limits(stream: S, max_body: u32) -> ClientSession<S> {
        ClientSession {
            conn: FrameConn::new(stream, max_body),
            pin: None,
        }
    }

    /// Pins the server's long-term fingerprint for subsequent handshakes.
    pub fn pin_server(&mut self, fingerprint: Fingerprint) {
        self.pin = Some(fingerprint);
    }

    /// Sends one ciphertext in the clear and waits for the ACK.
    pub fn data_update(&mut self, epoch: u64, ct: &Ciphertext) -> Result<(), WireError> {
        self.conn.send(&Frame::new(
            MsgType::DataUpdate,
            epoch,
            messages::encode_ciphertext(ct),
        ))?;
        let reply = self.conn.recv()?;
        match reply.msg_type {
            MsgType::Ack => Ok(()),
            MsgType::Error => Err(remote_error(&reply)?),
            _ => Err(WireError::Protocol("unexpected reply to a data update")),
        }
    }

    /// Runs one search exchange over a fresh sealed channel. Returns the
    /// padded component list, exactly as many elements as the server's
    /// response total.
    pub fn search(&mut self, td: &SearchTrapdoor) -> Result<Vec<GroupElement>, WireError> {
        let mut channel = handshake_client(&mut self.conn, self.pin.as_ref())?;
        let req = Frame::new(MsgType::SearchReq, td.epoch, messages::encode_trapdoor(td));
        let sealed = channel.seal(&req)?;
        self.conn.send(&sealed)?;

        let mut components: Vec<GroupElement> = Vec::new();
        let mut expected_total: Option<u64> = None;
        loop {
            let inner = self.recv_sealed(&mut channel)?;
            match inner.msg_type {
                MsgType::SearchResp => {
                    let (total, chunk) = messages::decode_resp_chunk(&inner.body)?;
                    if total > MAX_RESPONSE_TOTAL {
                        return Err(WireError::Protocol("response total is implausibly large"));
                    }
                    match expected_total {
                        None => {
                            expected_total = Some(total);
                            components.reserve(total as usize);
                        }
                        Some(t) if t != total => {
                            return Err(WireError::Protocol("response total changed mid-stream"));
                        }
                        _ => {}
                    }
                    components.extend(chunk);
                    let total = expected_total.unwrap();
                    if components.len() as u64 > total {
                        return Err(WireError::Protocol("server sent more components than announced"));
                    }
                    if components.len() as u64 == total {
                        return Ok(components);
                    }
                }
                MsgType::Error => return Err(remote_error(&inner)?),
                _ => return Err(WireError::Protocol("unexpected reply to a search")),
            }
        }
    }

    /// Delegates a key update over a fresh sealed channel; returns the
    /// server's new epoch.
    pub fn key_update(&mut self, token: &KeyUpdateToken) -> Result<u64, WireError> {
        let mut channel = handshake_client(&mut self.conn, self.pin.as_ref())?;
        let req = Frame::new(
            MsgType::KeyUpdate,
            token.new_epoch,
            messages::encode_key_update(token),
        );
        let sealed = channel.seal(&req)?;
        self.conn.send(&sealed)?;
        let reply = self.recv_sealed(&mut channel)?;
        match reply.msg_type {
            MsgType::Ack => Ok(reply.epoch),
            MsgType::Error => Err(remote_error(&reply)?),
            _ => Err(WireError::Protocol("unexpected reply to a key update")),
        }
    }

    fn recv_sealed(&mut self, channel: &mut SecureChannel) -> Result<Frame, WireError> {
        let frame = self.conn.recv()?;
        match frame.msg_type {
            MsgType::Sealed => channel.open(&frame),
            // Errors raised before the server sealed anything arrive plain.
            MsgType::Error => Err(remote_error(&frame)?),
            _ => Err(WireError::Protocol("expected a sealed frame")),
        }
    }
}

fn remote_error(frame: &Frame) -> Result<WireError, WireError> {
    let (code, message) = messages::decode_error(&frame.body)?;
    Ok(WireError::Remote { code, epoch: frame.epoch, message })
}

/// What one connection did; the daemon uses it to decide when to persist
/// and what to log.
#[derive(Debug, Default, Clone, Copy)]
pub struct SessionSummary {
    pub updates: u64,
    pub searches: u64,
    pub rotations: u64,
    /// Searches in this session whose results outgrew their pad target.
    pub overflows: u64,
}

/// The shared server state behind every session: the database under a
/// read/write lock, the group parameters, and the rotation worker count.
pub struct EdbService {
    edb: RwLock<EncryptedDatabase<MemoryBackend>>,
    params: GroupParams,
    workers: usize,
    max_body: u32,
    static_key: Option<p256::SecretKey>,
    overflow_warnings: AtomicU64,
}

impl EdbService {
    pub fn new(edb: EncryptedDatabase<MemoryBackend>, params: GroupParams, workers: usize) -> EdbService {
        EdbService {
            edb: RwLock::new(edb),
            params,
            workers: workers.max(1),
            max_body: DEFAULT_MAX_BODY,
            static_key: None,
            overflow_warnings: AtomicU64::new(0),
        }
    }

    pub fn with_static_key(mut self, key: p256::SecretKey) -> EdbService {
        self.static_key = Some(key);
        self
    }

    pub fn with_max_body(mut self, max_body: u32) -> EdbService {
        self.max_body = max_body;
        self
    }

    /// Fingerprint of the long-term identity, when one is configured.
    pub fn fingerprint(&self) -> Option<Fingerprint> {
        self.static_key.as_ref().map(|k| {
            let point = p256::elliptic_curve::sec1::ToEncodedPoint::to_encoded_point(
                &k.public_key(),
                true,
            );
            let mut share = [0u8; 33];
            share.copy_from_slice(point.as_bytes());
            crate::channel::fingerprint_of(&share)
        })
    }

    pub fn epoch(&self) -> u64 {
        self.edb.read().expect("edb lock poisoned").epoch()
    }

    pub fn len(&self) -> u64 {
        self.edb.read().expect("edb lock poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Searches that outgrew their pad target since startup.
    pub fn overflow_warnings(&self) -> u64 {
        self.overflow_warnings.load(Ordering::Relaxed)
    }

    /// Serializes the current database to snapshot bytes.
    pub fn snapshot(&self) -> Vec<u8> {
        self.edb.read().expect("edb lock poisoned").persist()
    }

    /// Serves one connection to completion (peer hang-up ends it cleanly).
    pub fn serve_connection<S: Read + Write>(&self, stream: S) -> Result<SessionSummary, WireError> {
        let mut conn = FrameConn::new(stream, self.max_body);
        let mut summary = SessionSummary::default();
        let overflows_at_start = self.overflow_warnings();
        loop {
            let Some(frame) = conn.recv_opt()? else {
                summary.overflows = self.overflow_warnings() - overflows_at_start;
                return Ok(summary);
            };
            match frame.msg_type {
                MsgType::DataUpdate => {
                    self.handle_data_update(&mut conn, &frame)?;
                    summary.updates += 1;
                }
                MsgType::Hello => {
                    self.handle_channel(&mut conn, &frame, &mut summary)?;
                }
                _ => {
                    let epoch = self.epoch();
                    conn.send(&Frame::new(
                        MsgType::Error,
                        epoch,
                        messages::encode_error(code::MALFORMED, "unexpected message type"),
                    ))?;
                }
            }
        }
    }

    fn handle_data_update<S: Read + Write>(
        &self,
        conn: &mut FrameConn<S>,
        frame: &Frame,
    ) -> Result<(), WireError> {
        let reply = match messages::decode_ciphertext(&frame.body) {
            Err(_) => error_frame(self.epoch(), code::MALFORMED, "bad ciphertext encoding"),
            Ok(ct) => {
                let mut edb = self.edb.write().expect("edb lock poisoned");
                match edb.store(frame.epoch, &ct) {
                    Ok(()) => Frame::new(MsgType::Ack, edb.epoch(), Vec::new()),
                    Err(e) => core_error_frame(edb.epoch(), &e),
                }
            }
        };
        conn.send(&reply)
    }

    /// Runs one sealed exchange: handshake, a single request, its response.
    fn handle_channel<S: Read + Write>(
        &self,
        conn: &mut FrameConn<S>,
        client_hello: &Frame,
        summary: &mut SessionSummary,
    ) -> Result<(), WireError> {
        let mut channel = match handshake_server(conn, client_hello, self.static_key.as_ref()) {
            Ok(channel) => channel,
            Err(WireError::UnsupportedVersion(v)) => {
                conn.send(&error_frame(
                    self.epoch(),
                    code::UNSUPPORTED_VERSION,
                    &format!("protocol version {v} is not supported"),
                ))?;
                return Ok(());
            }
            Err(e) => return Err(e),
        };
        let request = channel.open(&conn.recv()?)?;
        match request.msg_type {
            MsgType::SearchReq => {
                summary.searches += 1;
                let reply_frames = self.run_search(&request);
                for frame in reply_frames {
                    let sealed = channel.seal(&frame)?;
                    conn.send(&sealed)?;
                }
            }
            MsgType::KeyUpdate => {
                let reply = self.run_key_update(&request);
                if reply.msg_type == MsgType::Ack {
                    summary.rotations += 1;
                }
                let sealed = channel.seal(&reply)?;
                conn.send(&sealed)?;
            }
            _ => {
                let sealed = channel.seal(&error_frame(
                    self.epoch(),
                    code::MALFORMED,
                    "unexpected sealed request",
                ))?;
                conn.send(&sealed)?;
            }
        }
        Ok(())
    }

    fn run_search(&self, request: &Frame) -> Vec<Frame> {
        let td = match messages::decode_trapdoor(&request.body, request.epoch) {
            Ok(td) => td,
            Err(_) => {
                return vec![error_frame(self.epoch(), code::MALFORMED, "bad trapdoor encoding")]
            }
        };
        let edb = self.edb.read().expect("edb lock poisoned");
        match edb.search(&self.params, &td, &mut rand::thread_rng()) {
            Ok(resp) => {
                if resp.overflowed(td.pad_target) {
                    self.overflow_warnings.fetch_add(1, Ordering::Relaxed);
                }
                let epoch = edb.epoch();
                let total = resp.components.len() as u64;
                let mut frames = Vec::new();
                if resp.components.is_empty() {
                    frames.push(Frame::new(
                        MsgType::SearchResp,
                        epoch,
                        messages::encode_resp_chunk(0, &[]),
                    ));
                } else {
                    for chunk in resp.components.chunks(CHUNK_ELEMENTS) {
                        frames.push(Frame::new(
                            MsgType::SearchResp,
                            epoch,
                            messages::encode_resp_chunk(total, chunk),
                        ));
                    }
                }
                frames
            }
            Err(e) => vec![core_error_frame(edb.epoch(), &e)],
        }
    }

    fn run_key_update(&self, request: &Frame) -> Frame {
        let token = match messages::decode_key_update(&request.body, request.epoch) {
            Ok(token) => token,
            Err(_) => return error_frame(self.epoch(), code::MALFORMED, "bad key update encoding"),
        };
        let mut edb = self.edb.write().expect("edb lock poisoned");
        match edb.rotate(&token, self.workers) {
            Ok(()) => Frame::new(MsgType::Ack, edb.epoch(), Vec::new()),
            Err(e) => core_error_frame(edb.epoch(), &e),
        }
    }
}

fn error_frame(epoch: u64, code: u8, message: &str) -> Frame {
    Frame::new(MsgType::Error, epoch, messages::encode_error(code, message))
}

fn core_error_frame(epoch: u64, err: &CoreError) -> Frame {
    let code = match err {
        CoreError::EpochMismatch { .. } => code::EPOCH_MISMATCH,
        CoreError::DuplicateLabel => code::DUPLICATE_LABEL,
        CoreError::BadEncoding(_) => code::MALFORMED,
        _ => code::INTERNAL,
    };
    error_frame(epoch, code, &err.to_string())
}
