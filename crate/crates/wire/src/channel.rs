//! The temporary secure channel: an ephemeral ECDH handshake over HELLO
//! frames, HKDF key derivation bound to the full handshake transcript, and
//! ChaCha20-Poly1305 sealing with strictly sequential counter nonces.
//!
//! Ephemeral secrets live only inside the handshake functions and are wiped
//! on drop; the session keys die with the channel value.

use chacha20poly1305::aead::Aead;
use chacha20poly1305::{ChaCha20Poly1305, Key, KeyInit, Nonce};
use hkdf::Hkdf;
use p256::ecdh::EphemeralSecret;
use p256::elliptic_curve::sec1::ToEncodedPoint;
use p256::PublicKey;
use sha2::{Digest, Sha256};

use crate::error::WireError;
use crate::frame::{Frame, FrameConn, MsgType};

pub const PROTOCOL_VERSION: u8 = 1;
const FLAG_STATIC: u8 = 0x01;
const KDF_SALT: &[u8] = b"BAMBOO-WIRE-V1";
const SHARE_LEN: usize = 33;

/// SHA-256 of a server's long-term public share; operators pin this.
pub type Fingerprint = [u8; 32];

/// Computes the fingerprint of a serialized public share.
pub fn fingerprint_of(share: &[u8; SHARE_LEN]) -> Fingerprint {
    Sha256::digest(share).into()
}

/// One direction's sealing state.
struct SealKey {
    cipher: ChaCha20Poly1305,
    counter: u64,
}

/// An established channel. Sealed frames carry `{8-byte counter, AEAD ct}`
/// as the body of a SEALED carrier frame; counters are strictly sequential
/// per direction, so replayed or reordered frames fail.
pub struct SecureChannel {
    seal: SealKey,
    open: SealKey,
}

impl SecureChannel {
    /// Seals an inner frame into a SEALED carrier frame.
    pub fn seal(&mut self, inner: &Frame) -> Result<Frame, WireError> {
        let nonce = nonce_for(self.seal.counter);
        let ct = self
            .seal
            .cipher
            .encrypt(&nonce, inner.encode().as_slice())
            .map_err(|_| WireError::Seal)?;
        let mut body = Vec::with_capacity(8 + ct.len());
        body.extend_from_slice(&self.seal.counter.to_be_bytes());
        body.extend_from_slice(&ct);
        self.seal.counter = self
            .seal
            .counter
            .checked_add(1)
            .ok_or(WireError::Protocol("nonce counter exhausted"))?;
        Ok(Frame::new(MsgType::Sealed, 0, body))
    }

    /// Opens a SEALED carrier frame back into the inner frame.
    pub fn open(&mut self, sealed: &Frame) -> Result<Frame, WireError> {
        if sealed.msg_type != MsgType::Sealed {
            return Err(WireError::Protocol("expected a sealed frame"));
        }
        if sealed.body.len() < 8 {
            return Err(WireError::Malformed("sealed frame shorter than its counter"));
        }
        let counter = u64::from_be_bytes(sealed.body[..8].try_into().unwrap());
        if counter != self.open.counter {
            return Err(WireError::NonceReplay {
                expected: self.open.counter,
                got: counter,
            });
        }
        let nonce = nonce_for(counter);
        let plain = self
            .open
            .cipher
            .decrypt(&nonce, &sealed.body[8..])
            .map_err(|_| WireError::Seal)?;
        self.open.counter += 1;
        Frame::decode(&plain)
    }
}

fn nonce_for(counter: u64) -> Nonce {
    let mut bytes = [0u8; 12];
    bytes[4..].copy_from_slice(&counter.to_be_bytes());
    Nonce::from(bytes)
}

fn encode_share(public: &PublicKey) -> [u8; SHARE_LEN] {
    let point = public.to_encoded_point(true);
    let mut out = [0u8; SHARE_LEN];
    out.copy_from_slice(point.as_bytes());
    out
}

fn decode_share(bytes: &[u8]) -> Result<PublicKey, WireError> {
    PublicKey::from_sec1_bytes(bytes).map_err(|_| WireError::Handshake("invalid public share"))
}

struct HelloBody {
    version: u8,
    static_flag: bool,
    share: [u8; SHARE_LEN],
    static_share: Option<[u8; SHARE_LEN]>,
}

fn encode_hello(body: &HelloBody) -> Vec<u8> {
    let mut out = Vec::with_capacity(2 + SHARE_LEN * 2);
    out.push(body.version);
    out.push(if body.static_flag { FLAG_STATIC } else { 0 });
    out.extend_from_slice(&body.share);
    if let Some(s) = &body.static_share {
        out.extend_from_slice(s);
    }
    out
}

fn decode_hello(bytes: &[u8]) -> Result<HelloBody, WireError> {
    if bytes.len() < 2 + SHARE_LEN {
        return Err(WireError::Malformed("hello body too short"));
    }
    let version = bytes[0];
    if version != PROTOCOL_VERSION {
        return Err(WireError::UnsupportedVersion(version));
    }
    let static_flag = bytes[1] & FLAG_STATIC != 0;
    let share: [u8; SHARE_LEN] = bytes[2..2 + SHARE_LEN].try_into().unwrap();
    let static_share = if bytes.len() > 2 + SHARE_LEN {
        if bytes.len() != 2 + 2 * SHARE_LEN {
            return Err(WireError::Malformed("hello body has a bad length"));
        }
        Some(bytes[2 + SHARE_LEN..].try_into().unwrap())
    } else {
        None
    };
    Ok(HelloBody {
        version,
        static_flag,
        share,
        static_share,
    })
}

fn derive_keys(
    ikm: &[u8],
    client_hello: &[u8],
    server_hello: &[u8],
) -> (SealKey, SealKey) {
    let hk = Hkdf::<Sha256>::new(Some(KDF_SALT), ikm);
    let mut transcript = Vec::with_capacity(client_hello.len() + server_hello.len());
    transcript.extend_from_slice(client_hello);
    transcript.extend_from_slice(server_hello);
    let mut okm = [0u8; 64];
    hk.expand(&transcript, &mut okm).expect("64 bytes is a valid HKDF length");
    let c2s = SealKey {
        cipher: ChaCha20Poly1305::new(&Key::from(<[u8; 32]>::try_from(&okm[..32]).unwrap())),
        counter: 0,
    };
    let s2c = SealKey {
        cipher: ChaCha20Poly1305::new(&Key::from(<[u8; 32]>::try_from(&okm[32..]).unwrap())),
        counter: 0,
    };
    (c2s, s2c)
}

/// Client side of the handshake. With a pinned fingerprint the server must
/// present a matching static share, and the static ECDH secret is mixed into
/// the key derivation so only the true key holder can speak on the channel.
pub fn handshake_client<S: std::io::Read + std::io::Write>(
    conn: &mut FrameConn<S>,
    pin: Option<&Fingerprint>,
) -> Result<SecureChannel, WireError> {
    let ephemeral = EphemeralSecret::random(&mut rand::thread_rng());
    let hello = HelloBody {
        version: PROTOCOL_VERSION,
        static_flag: pin.is_some(),
        share: encode_share(&ephemeral.public_key()),
        static_share: None,
    };
    let client_body = encode_hello(&hello);
    conn.send(&Frame::new(MsgType::Hello, 0, client_body.clone()))?;

    let reply = conn.recv()?;
    if reply.msg_type == MsgType::Error {
        let (code, message) = crate::messages::decode_error(&reply.body)?;
        return Err(WireError::Remote { code, epoch: reply.epoch, message });
    }
    if reply.msg_type != MsgType::Hello {
        return Err(WireError::Handshake("expected a hello reply"));
    }
    let server = decode_hello(&reply.body)?;
    let server_pub = decode_share(&server.share)?;

    let mut ikm = Vec::with_capacity(64);
    ikm.extend_from_slice(ephemeral.diffie_hellman(&server_pub).raw_secret_bytes());
    if let Some(pin) = pin {
        let static_share = server
            .static_share
            .ok_or(WireError::Handshake("server presented no static share to pin"))?;
        if fingerprint_of(&static_share) != *pin {
            return Err(WireError::FingerprintMismatch);
        }
        let static_pub = decode_share(&static_share)?;
        ikm.extend_from_slice(ephemeral.diffie_hellman(&static_pub).raw_secret_bytes());
    }

    let (c2s, s2c) = derive_keys(&ikm, &client_body, &reply.body);
    Ok(SecureChannel { seal: c2s, open: s2c })
}

/// Server side of the handshake, given the already-received client HELLO.
/// The static key is offered only when the client asked to pin.
pub fn handshake_server<S: std::io::Read + std::io::Write>(
    conn: &mut FrameConn<S>,
    client_hello: &Frame,
    static_key: Option<&p256::SecretKey>,
) -> Result<SecureChannel, WireError> {
    let client = decode_hello(&client_hello.body)?;
    let client_pub = decode_share(&client.share)?;

    let ephemeral = EphemeralSecret::random(&mut rand::thread_rng());
    let offered_static = if client.static_flag { static_key } else { None };
    let hello = HelloBody {
        version: PROTOCOL_VERSION,
        static_flag: offered_static.is_some(),
        share: encode_share(&ephemeral.public_key()),
        static_share: offered_static.map(|k| encode_share(&k.public_key())),
    };
    let server_body = encode_hello(&hello);
    conn.send(&Frame::new(MsgType::Hello, 0, server_body.clone()))?;

    let mut ikm = Vec::with_capacity(64);
    ikm.extend_from_slice(ephemeral.diffie_hellman(&client_pub).raw_secret_bytes());
    if let Some(static_key) = offered_static {
        let shared = p256::ecdh::diffie_hellman(
            static_key.to_nonzero_scalar(),
            client_pub.as_affine(),
        );
        ikm.extend_from_slice(shared.raw_secret_bytes());
    }

    let (c2s, s2c) = derive_keys(&ikm, &client_hello.body, &server_body);
    Ok(SecureChannel { seal: s2c, open: c2s })
}
