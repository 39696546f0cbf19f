//! Prime-order group arithmetic over NIST P-256, the invertible mapping
//! between n-bit strings and group elements, and the three domain-separated
//! hash-to-group oracles used by the protocol.
//!
//! The invertible mapping embeds the payload into the low `n` bits of a
//! candidate X-coordinate; the bits directly above it hold a random salt plus
//! a retry counter that is incremented until the candidate lands on the
//! curve. Decoding reads the low `n` bits of the X-coordinate back and is
//! total over the group, so callers may decode arbitrary (e.g. dummy)
//! elements without faulting.

use p256::elliptic_curve::hash2curve::{ExpandMsgXmd, GroupDigest};
use p256::elliptic_curve::ops::{Invert, MulByGenerator};
use p256::elliptic_curve::point::DecompressPoint;
use p256::elliptic_curve::sec1::{FromEncodedPoint, ToEncodedPoint};
use p256::elliptic_curve::subtle::Choice;
use p256::elliptic_curve::PrimeField;
use p256::{AffinePoint, EncodedPoint, FieldBytes, NistP256, NonZeroScalar, ProjectivePoint};
use rand_core::CryptoRngCore;
use sha2::Sha256;

use crate::error::CoreError;

/// Serialized size of a group element (SEC1 compressed point).
pub const ELEMENT_BYTES: usize = 33;
/// Serialized size of a scalar (big-endian).
pub const SCALAR_BYTES: usize = 32;

/// The field has 256 bits; embedded X-coordinates keep the top bit clear so
/// every candidate is below the field prime.
const EMBED_BITS: u16 = 255;
const MIN_HEADROOM: u16 = 16;
const MAX_HEADROOM: u16 = 64;
/// Candidate headroom values tried per encode call. Each candidate is a valid
/// X-coordinate with probability about 1/2, so running out is a non-event.
const ENCODE_RETRIES: u64 = 256;

const DST_H1: &[u8] = b"BAMBOO-H1";
const DST_H2: &[u8] = b"BAMBOO-H2";
const DST_HG: &[u8] = b"BAMBOO-HG";

/// Fixed parameter set produced by [`pgen`]: the curve is pinned at compile
/// time, so this only carries the payload width and encoding headroom.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GroupParams {
    n_bits: u16,
    headroom: u16,
}

/// Initializes the group parameters for a given security level and payload
/// bit-length. Deterministic: the same inputs always name the same group.
pub fn pgen(security_bits: u16, n_bits: u16) -> Result<GroupParams, CoreError> {
    if security_bits != 128 {
        return Err(CoreError::UnsupportedSecurityLevel(security_bits));
    }
    if n_bits < 2 {
        return Err(CoreError::InvalidParams(
            "payload needs at least an operation bit and one identifier bit",
        ));
    }
    if n_bits > EMBED_BITS - MIN_HEADROOM {
        return Err(CoreError::PayloadTooWide {
            n_bits,
            max_bits: EMBED_BITS - MIN_HEADROOM,
        });
    }
    let headroom = (EMBED_BITS - n_bits).min(MAX_HEADROOM);
    Ok(GroupParams { n_bits, headroom })
}

impl GroupParams {
    /// Payload/token width in bits.
    pub fn n_bits(&self) -> u16 {
        self.n_bits
    }

    /// Bits reserved above the payload for encoding retries.
    pub fn headroom(&self) -> u16 {
        self.headroom
    }

    /// Serialized width of an n-bit string.
    pub fn n_len(&self) -> usize {
        (self.n_bits as usize + 7) / 8
    }

    /// File identifier width in bits (one bit of the payload is the op).
    pub fn id_bits(&self) -> u16 {
        self.n_bits - 1
    }

    /// Serialized width of a file identifier.
    pub fn id_len(&self) -> usize {
        (self.id_bits() as usize + 7) / 8
    }

    /// The probabilistic mapping of an n-bit string to a group element.
    pub fn encode(
        &self,
        m: &BitString,
        rng: &mut impl CryptoRngCore,
    ) -> Result<GroupElement, CoreError> {
        if m.bits() != self.n_bits {
            return Err(CoreError::BadEncoding("bit string width does not match n"));
        }
        let mask = headroom_mask(self.headroom);
        let salt = rng.next_u64() & mask;
        // The Y parity is pinned by the salt so a seeded RNG reproduces the
        // exact serialized point.
        let y_is_odd = Choice::from((salt & 1) as u8);
        for attempt in 0..ENCODE_RETRIES {
            let headroom_value = salt.wrapping_add(attempt) & mask;
            let x = self.candidate_x(m, headroom_value);
            let point = AffinePoint::decompress((&x).into(), y_is_odd);
            if point.is_some().into() {
                return Ok(GroupElement(ProjectivePoint::from(point.unwrap())));
            }
        }
        Err(CoreError::EncodingFailed)
    }

    /// The deterministic inverse of [`encode`]. Total on the group: elements
    /// that were never produced by `encode` (including the identity) still
    /// yield an n-bit string.
    pub fn decode(&self, p: &GroupElement) -> BitString {
        if p.is_identity() {
            return BitString::zero(self.n_bits);
        }
        let encoded = p.0.to_affine().to_encoded_point(true);
        // Compressed SEC1: tag byte then the 32-byte big-endian X coordinate.
        let x = &encoded.as_bytes()[1..33];
        let len = self.n_len();
        let mut bytes = x[32 - len..].to_vec();
        bytes[0] &= high_byte_mask(self.n_bits);
        BitString {
            bits: self.n_bits,
            bytes,
        }
    }

    /// Hash oracle H1 (labels).
    pub fn hash_h1(&self, tk: &BitString) -> GroupElement {
        hash_to_group(tk.as_bytes(), DST_H1)
    }

    /// Hash oracle H2 (search-token masks).
    pub fn hash_h2(&self, tk: &BitString) -> GroupElement {
        hash_to_group(tk.as_bytes(), DST_H2)
    }

    /// Hash oracle G (payload masks).
    pub fn hash_hg(&self, tk: &BitString) -> GroupElement {
        hash_to_group(tk.as_bytes(), DST_HG)
    }

    fn candidate_x(&self, m: &BitString, headroom_value: u64) -> [u8; 32] {
        let mut x = [0u8; 32];
        let payload = m.as_bytes();
        x[32 - payload.len()..].copy_from_slice(payload);
        for i in 0..self.headroom {
            if headroom_value >> i & 1 == 1 {
                set_bit(&mut x, self.n_bits + i);
            }
        }
        x
    }
}

fn headroom_mask(headroom: u16) -> u64 {
    if headroom >= 64 {
        u64::MAX
    } else {
        (1u64 << headroom) - 1
    }
}

/// Mask for the top byte of a big-endian bit string of the given width.
fn high_byte_mask(bits: u16) -> u8 {
    let rem = bits % 8;
    if rem == 0 {
        0xff
    } else {
        0xff >> (8 - rem)
    }
}

/// Sets bit `pos` (counting from the least-significant end) of a big-endian
/// byte array.
fn set_bit(bytes: &mut [u8; 32], pos: u16) {
    bytes[31 - (pos / 8) as usize] |= 1 << (pos % 8);
}

fn hash_to_group(input: &[u8], dst: &[u8]) -> GroupElement {
    let point = NistP256::hash_from_bytes::<ExpandMsgXmd<Sha256>>(&[input], &[dst])
        .expect("hash-to-curve with a fixed-size DST cannot fail");
    GroupElement(point)
}

/// A bit string of fixed width, stored big-endian with the unused high bits
/// of the leading byte forced to zero.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitString {
    bits: u16,
    bytes: Vec<u8>,
}

impl BitString {
    /// All-zero string of the given width.
    pub fn zero(bits: u16) -> Self {
        BitString {
            bits,
            bytes: vec![0u8; (bits as usize + 7) / 8],
        }
    }

    /// Uniformly random string of the given width.
    pub fn random(bits: u16, rng: &mut impl CryptoRngCore) -> Self {
        let mut bytes = vec![0u8; (bits as usize + 7) / 8];
        rng.fill_bytes(&mut bytes);
        bytes[0] &= high_byte_mask(bits);
        BitString { bits, bytes }
    }

    /// Parses the canonical serialized form: exact width, high bits zero.
    pub fn from_bytes(bits: u16, bytes: &[u8]) -> Result<Self, CoreError> {
        if bytes.len() != (bits as usize + 7) / 8 {
            return Err(CoreError::BadEncoding("bit string has the wrong length"));
        }
        if bytes[0] & !high_byte_mask(bits) != 0 {
            return Err(CoreError::BadEncoding("bit string has nonzero padding bits"));
        }
        Ok(BitString {
            bits,
            bytes: bytes.to_vec(),
        })
    }

    pub fn bits(&self) -> u16 {
        self.bits
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn is_zero(&self) -> bool {
        self.bytes.iter().all(|&b| b == 0)
    }

    /// Bit `pos`, counting from the least-significant end.
    pub fn bit(&self, pos: u16) -> bool {
        debug_assert!(pos < self.bits);
        let byte = self.bytes.len() - 1 - (pos / 8) as usize;
        self.bytes[byte] >> (pos % 8) & 1 == 1
    }

    fn set_bit(&mut self, pos: u16, value: bool) {
        debug_assert!(pos < self.bits);
        let byte = self.bytes.len() - 1 - (pos / 8) as usize;
        if value {
            self.bytes[byte] |= 1 << (pos % 8);
        } else {
            self.bytes[byte] &= !(1 << (pos % 8));
        }
    }

    /// Reinterprets as a wider string (zero-extends on the big end).
    fn widen(&self, bits: u16) -> BitString {
        debug_assert!(bits >= self.bits);
        let len = (bits as usize + 7) / 8;
        let mut bytes = vec![0u8; len];
        bytes[len - self.bytes.len()..].copy_from_slice(&self.bytes);
        BitString { bits, bytes }
    }

    /// The low `bits` bits as a narrower string.
    fn truncate(&self, bits: u16) -> BitString {
        debug_assert!(bits <= self.bits);
        let len = (bits as usize + 7) / 8;
        let mut bytes = self.bytes[self.bytes.len() - len..].to_vec();
        bytes[0] &= high_byte_mask(bits);
        BitString { bits, bytes }
    }
}

impl std::fmt::Debug for BitString {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "BitString({}:{})", self.bits, hex::encode(&self.bytes))
    }
}

/// Per-ciphertext random search token (an n-bit string).
pub type SearchToken = BitString;

/// An update operation: insert or logically delete a keyword/file pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Op {
    Add,
    Del,
}

/// A file identifier: a nonzero (n-1)-bit string. The all-zero value is
/// reserved and never a valid identifier.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FileId(BitString);

impl FileId {
    /// Parses the canonical fixed-width form.
    pub fn from_bytes(params: &GroupParams, bytes: &[u8]) -> Result<Self, CoreError> {
        let bits = BitString::from_bytes(params.id_bits(), bytes)
            .map_err(|_| CoreError::InvalidIdentifier("wrong width or padding"))?;
        if bits.is_zero() {
            return Err(CoreError::InvalidIdentifier("the all-zero identifier is reserved"));
        }
        Ok(FileId(bits))
    }

    /// Builds an identifier from an integer. Handy for tests and workloads.
    pub fn from_u64(params: &GroupParams, value: u64) -> Result<Self, CoreError> {
        if value == 0 {
            return Err(CoreError::InvalidIdentifier("the all-zero identifier is reserved"));
        }
        let len = params.id_len();
        if len < 8 && value >> (params.id_bits().min(63)) != 0 {
            return Err(CoreError::InvalidIdentifier("value does not fit the identifier width"));
        }
        let mut bytes = vec![0u8; len];
        let be = value.to_be_bytes();
        let take = len.min(8);
        bytes[len - take..].copy_from_slice(&be[8 - take..]);
        FileId::from_bytes(params, &bytes)
    }

    /// Parses a hex identifier (optional 0x prefix), left-padded to the
    /// identifier width.
    pub fn from_hex(params: &GroupParams, s: &str) -> Result<Self, CoreError> {
        let digits = s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")).unwrap_or(s);
        if digits.is_empty() {
            return Err(CoreError::InvalidIdentifier("empty hex string"));
        }
        let padded = if digits.len() % 2 == 1 {
            format!("0{digits}")
        } else {
            digits.to_string()
        };
        let raw = hex::decode(&padded).map_err(|_| CoreError::InvalidIdentifier("invalid hex"))?;
        let raw: &[u8] = {
            let first = raw.iter().position(|&b| b != 0).unwrap_or(raw.len());
            &raw[first..]
        };
        let len = params.id_len();
        if raw.len() > len {
            return Err(CoreError::InvalidIdentifier("value does not fit the identifier width"));
        }
        let mut bytes = vec![0u8; len];
        bytes[len - raw.len()..].copy_from_slice(raw);
        FileId::from_bytes(params, &bytes)
    }

    /// Minimal lowercase hex (no 0x prefix, no leading zeros).
    pub fn to_hex(&self) -> String {
        let s = hex::encode(self.0.as_bytes());
        let trimmed = s.trim_start_matches('0');
        if trimmed.is_empty() {
            "0".to_string()
        } else {
            trimmed.to_string()
        }
    }

    pub fn as_bytes(&self) -> &[u8] {
        self.0.as_bytes()
    }
}

impl std::fmt::Debug for FileId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "FileId({})", self.to_hex())
    }
}

/// The n-bit plaintext of a ciphertext payload: one operation bit (add=1)
/// followed by the (n-1)-bit file identifier.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Payload(BitString);

impl Payload {
    pub fn new(params: &GroupParams, op: Op, id: &FileId) -> Payload {
        let mut bits = id.0.widen(params.n_bits());
        bits.set_bit(params.n_bits() - 1, matches!(op, Op::Add));
        Payload(bits)
    }

    /// Wraps a decoded n-bit string. Total: decoded dummies are representable
    /// even when they do not name a valid identifier.
    pub fn from_bits(bits: BitString) -> Payload {
        Payload(bits)
    }

    pub fn op(&self) -> Op {
        if self.0.bit(self.0.bits() - 1) {
            Op::Add
        } else {
            Op::Del
        }
    }

    pub fn file_id(&self) -> FileId {
        FileId(self.0.truncate(self.0.bits() - 1))
    }

    pub fn bits(&self) -> &BitString {
        &self.0
    }
}

/// A nonzero scalar modulo the group order.
#[derive(Clone, Copy)]
pub struct Scalar(NonZeroScalar);

impl Scalar {
    /// Uniform on [1, q-1].
    pub fn random(rng: &mut impl CryptoRngCore) -> Scalar {
        Scalar(NonZeroScalar::random(rng))
    }

    /// Field multiplication; the product of nonzero scalars stays nonzero.
    pub fn mul(&self, other: &Scalar) -> Scalar {
        let product = self.0.as_ref() * other.0.as_ref();
        Scalar(NonZeroScalar::new(product).expect("product of nonzero scalars is nonzero"))
    }

    /// Multiplicative inverse; always exists for a nonzero scalar.
    pub fn invert(&self) -> Scalar {
        Scalar(self.0.invert())
    }

    pub fn to_bytes(&self) -> [u8; SCALAR_BYTES] {
        self.0.to_repr().into()
    }

    /// Parses a big-endian scalar, rejecting zero and out-of-range values.
    pub fn from_bytes(bytes: &[u8]) -> Result<Scalar, CoreError> {
        if bytes.len() != SCALAR_BYTES {
            return Err(CoreError::BadEncoding("scalar has the wrong length"));
        }
        let repr = FieldBytes::from(<[u8; SCALAR_BYTES]>::try_from(bytes).unwrap());
        let inner = Option::from(NonZeroScalar::from_repr(repr))
            .ok_or(CoreError::BadEncoding("scalar is zero or not reduced"))?;
        Ok(Scalar(inner))
    }
}

impl PartialEq for Scalar {
    fn eq(&self, other: &Self) -> bool {
        self.0.as_ref() == other.0.as_ref()
    }
}

impl Eq for Scalar {}

impl std::fmt::Debug for Scalar {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Scalar({})", hex::encode(self.to_bytes()))
    }
}

/// A group element. The identity is representable (it can arise from
/// division of equal elements) and serializes to 33 zero bytes; everything
/// else uses the canonical SEC1 compressed form.
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct GroupElement(ProjectivePoint);

impl GroupElement {
    pub fn generator() -> GroupElement {
        GroupElement(ProjectivePoint::GENERATOR)
    }

    pub fn identity() -> GroupElement {
        GroupElement(ProjectivePoint::IDENTITY)
    }

    pub fn is_identity(&self) -> bool {
        self.0 == ProjectivePoint::IDENTITY
    }

    /// Uniform over the group minus the identity, by rejection-sampling an
    /// X-coordinate and a sign. Each X hosts exactly two points and P-256 has
    /// no y=0 points, so the distribution matches exponentiating the
    /// generator by a uniform nonzero scalar at a fraction of the cost.
    pub fn random(rng: &mut impl CryptoRngCore) -> GroupElement {
        loop {
            let mut x = [0u8; 32];
            rng.fill_bytes(&mut x);
            let y_is_odd = Choice::from((rng.next_u32() & 1) as u8);
            let point = AffinePoint::decompress((&x).into(), y_is_odd);
            if point.is_some().into() {
                return GroupElement(ProjectivePoint::from(point.unwrap()));
            }
        }
    }

    /// Exponentiation: `self^k` in multiplicative notation.
    pub fn exp(&self, k: &Scalar) -> GroupElement {
        GroupElement(self.0 * k.0.as_ref())
    }

    /// The group operation.
    pub fn mul(&self, other: &GroupElement) -> GroupElement {
        GroupElement(self.0 + other.0)
    }

    /// `self / other`.
    pub fn div(&self, other: &GroupElement) -> GroupElement {
        GroupElement(self.0 - other.0)
    }

    /// `generator^k`.
    pub fn generator_exp(k: &Scalar) -> GroupElement {
        GroupElement(ProjectivePoint::mul_by_generator(k.0.as_ref()))
    }

    pub fn to_bytes(&self) -> [u8; ELEMENT_BYTES] {
        let mut out = [0u8; ELEMENT_BYTES];
        if self.is_identity() {
            return out;
        }
        let encoded = self.0.to_affine().to_encoded_point(true);
        out.copy_from_slice(encoded.as_bytes());
        out
    }

    /// Parses the canonical 33-byte form, rejecting off-curve points.
    pub fn from_bytes(bytes: &[u8]) -> Result<GroupElement, CoreError> {
        if bytes.len() != ELEMENT_BYTES {
            return Err(CoreError::BadEncoding("group element has the wrong length"));
        }
        if bytes.iter().all(|&b| b == 0) {
            return Ok(GroupElement::identity());
        }
        let encoded = EncodedPoint::from_bytes(bytes)
            .map_err(|_| CoreError::BadEncoding("invalid point encoding"))?;
        let point = Option::from(ProjectivePoint::from_encoded_point(&encoded))
            .ok_or(CoreError::BadEncoding("point is not on the curve"))?;
        Ok(GroupElement(point))
    }
}

impl std::fmt::Debug for GroupElement {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "GroupElement({})", hex::encode(self.to_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::thread_rng;

    fn params() -> GroupParams {
        pgen(128, 128).unwrap()
    }

    #[test]
    fn pgen_rejects_out_of_range() {
        assert!(matches!(pgen(256, 128), Err(CoreError::UnsupportedSecurityLevel(256))));
        assert!(matches!(pgen(128, 300), Err(CoreError::PayloadTooWide { .. })));
        assert!(matches!(pgen(128, 1), Err(CoreError::InvalidParams(_))));
        let p = pgen(128, 129).unwrap();
        assert_eq!(p.n_bits(), 129);
        assert_eq!(p.id_bits(), 128);
        assert!(p.headroom() >= 16);
    }

    #[test]
    fn encode_decode_roundtrip() {
        let params = params();
        let mut rng = thread_rng();
        for _ in 0..200 {
            let m = BitString::random(128, &mut rng);
            let p = params.encode(&m, &mut rng).unwrap();
            assert_eq!(params.decode(&p), m);
        }
    }

    #[test]
    fn encode_is_probabilistic_but_consistent() {
        let params = params();
        let mut rng = thread_rng();
        let m = BitString::random(128, &mut rng);
        let p1 = params.encode(&m, &mut rng).unwrap();
        let p2 = params.encode(&m, &mut rng).unwrap();
        assert_eq!(params.decode(&p1), m);
        assert_eq!(params.decode(&p2), m);
        // Fresh salt per call: equal points would need a 64-bit salt collision.
        assert_ne!(p1.to_bytes(), p2.to_bytes());
    }

    #[test]
    fn decode_is_total() {
        let params = params();
        let mut rng = thread_rng();
        assert_eq!(params.decode(&GroupElement::identity()), BitString::zero(128));
        let zero = params.decode(&GroupElement::random(&mut rng));
        assert_eq!(zero.bits(), 128);
        assert_eq!(params.decode(&params.encode(&BitString::zero(128), &mut rng).unwrap()),
            BitString::zero(128));
    }

    #[test]
    fn roundtrip_at_odd_widths() {
        let mut rng = thread_rng();
        for n in [2u16, 7, 65, 129, 239] {
            let params = pgen(128, n).unwrap();
            for _ in 0..50 {
                let m = BitString::random(n, &mut rng);
                let p = params.encode(&m, &mut rng).unwrap();
                assert_eq!(params.decode(&p), m, "width {n}");
            }
        }
    }

    #[test]
    fn hash_oracles_are_deterministic_and_separated() {
        let params = params();
        let mut rng = thread_rng();
        let t = BitString::random(128, &mut rng);
        assert_eq!(params.hash_h1(&t), params.hash_h1(&t));
        assert_eq!(params.hash_h2(&t), params.hash_h2(&t));
        assert_eq!(params.hash_hg(&t), params.hash_hg(&t));
        for _ in 0..1000 {
            let t = BitString::random(128, &mut rng);
            let (a, b, c) = (params.hash_h1(&t), params.hash_h2(&t), params.hash_hg(&t));
            assert_ne!(a, b);
            assert_ne!(a, c);
            assert_ne!(b, c);
        }
    }

    #[test]
    fn exponent_laws() {
        let params = params();
        let mut rng = thread_rng();
        let p = params.hash_h1(&BitString::random(128, &mut rng));
        let a = Scalar::random(&mut rng);
        let b = Scalar::random(&mut rng);

        // (P^a)^(a^-1) = P
        assert_eq!(p.exp(&a).exp(&a.invert()), p);
        // (P*Q)^a = P^a * Q^a
        let q = params.hash_h2(&BitString::random(128, &mut rng));
        assert_eq!(p.mul(&q).exp(&a), p.exp(&a).mul(&q.exp(&a)));
        // P^(a*b) = (P^a)^b
        assert_eq!(p.exp(&a.mul(&b)), p.exp(&a).exp(&b));
        // div undoes mul
        assert_eq!(p.mul(&q).div(&q), p);
    }

    #[test]
    fn generator_exp_matches_exp() {
        let mut rng = thread_rng();
        let k = Scalar::random(&mut rng);
        assert_eq!(GroupElement::generator_exp(&k), GroupElement::generator().exp(&k));
    }

    #[test]
    fn element_serialization_roundtrip() {
        let mut rng = thread_rng();
        for _ in 0..50 {
            let p = GroupElement::random(&mut rng);
            let bytes = p.to_bytes();
            assert_eq!(GroupElement::from_bytes(&bytes).unwrap(), p);
        }
        let id = GroupElement::identity();
        assert_eq!(id.to_bytes(), [0u8; 33]);
        assert_eq!(GroupElement::from_bytes(&[0u8; 33]).unwrap(), id);
    }

    #[test]
    fn deserialization_rejects_off_curve() {
        let mut bad = [0u8; 33];
        bad[0] = 0x02;
        bad[32] = 0x05;
        // X=5 with even parity happens to be on the curve or not; flip until
        // we find a rejected candidate to make the test deterministic.
        let mut rejected = false;
        for x in 0..64u8 {
            bad[32] = x;
            if GroupElement::from_bytes(&bad).is_err() {
                rejected = true;
                break;
            }
        }
        assert!(rejected);
        assert!(GroupElement::from_bytes(&[1u8; 32]).is_err());
        let mut bad_tag = [0u8; 33];
        bad_tag[0] = 0x07;
        assert!(GroupElement::from_bytes(&bad_tag).is_err());
    }

    #[test]
    fn scalar_serialization() {
        let mut rng = thread_rng();
        let s = Scalar::random(&mut rng);
        let bytes = s.to_bytes();
        assert_eq!(Scalar::from_bytes(&bytes).unwrap(), s);
        assert!(Scalar::from_bytes(&[0u8; 32]).is_err());
        assert!(Scalar::from_bytes(&[0xff; 32]).is_err());
    }

    #[test]
    fn payload_layout() {
        let params = params();
        let id = FileId::from_u64(&params, 0x2a).unwrap();
        let add = Payload::new(&params, Op::Add, &id);
        let del = Payload::new(&params, Op::Del, &id);
        assert_eq!(add.op(), Op::Add);
        assert_eq!(del.op(), Op::Del);
        assert_eq!(add.file_id(), id);
        assert_eq!(del.file_id(), id);
        // Top bit of the 128-bit string is the op.
        assert_eq!(add.bits().as_bytes()[0] & 0x80, 0x80);
        assert_eq!(del.bits().as_bytes()[0] & 0x80, 0x00);
    }

    #[test]
    fn file_id_validation() {
        let params = params();
        assert!(matches!(
            FileId::from_u64(&params, 0),
            Err(CoreError::InvalidIdentifier(_))
        ));
        assert!(FileId::from_bytes(&params, &[0u8; 16]).is_err());
        // 127-bit ids: the top bit of the 16-byte form must be clear.
        let mut high = [0u8; 16];
        high[0] = 0x80;
        assert!(FileId::from_bytes(&params, &high).is_err());

        let id = FileId::from_hex(&params, "0x00ff").unwrap();
        assert_eq!(id.to_hex(), "ff");
        assert_eq!(FileId::from_hex(&params, "ff").unwrap(), id);
        assert_eq!(FileId::from_hex(&params, "FF").unwrap(), id);
        assert!(FileId::from_hex(&params, "0x0").is_err());
        assert!(FileId::from_hex(&params, "zz").is_err());
        let wide = "f".repeat(40);
        assert!(FileId::from_hex(&params, &wide).is_err());
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

            /// Roundtrip holds for arbitrary payload widths and contents.
            #[test]
            fn roundtrip_any_width(n in 2u16..=239, raw in proptest::collection::vec(any::<u8>(), 30)) {
                let params = pgen(128, n).unwrap();
                let mut bytes = raw[..params.n_len()].to_vec();
                bytes[0] &= 0xffu8 >> ((8 - n % 8) % 8);
                let m = BitString::from_bytes(n, &bytes).unwrap();
                let p = params.encode(&m, &mut thread_rng()).unwrap();
                prop_assert_eq!(params.decode(&p), m);
            }

            /// Serialization is canonical: parse(serialize(P)) == P, and the
            /// bytes are injective across distinct elements.
            #[test]
            fn serialization_canonical(seed in any::<u64>()) {
                use rand::SeedableRng;
                let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
                let a = GroupElement::random(&mut rng);
                let b = GroupElement::random(&mut rng);
                prop_assert_eq!(GroupElement::from_bytes(&a.to_bytes()).unwrap(), a);
                prop_assert_eq!(a.to_bytes() == b.to_bytes(), a == b);
            }

            /// Arbitrary byte blobs are rejected unless they happen to name a
            /// curve point (tag 02/03 with a valid X), and accepted blobs
            /// re-serialize to themselves.
            #[test]
            fn deserialize_is_strict(bytes in proptest::collection::vec(any::<u8>(), 33)) {
                if let Ok(p) = GroupElement::from_bytes(&bytes) {
                    prop_assert_eq!(p.to_bytes().to_vec(), bytes);
                }
            }
        }
    }

    #[test]
    fn payload_at_129_bits_carries_128_bit_ids() {
        let params = pgen(128, 129).unwrap();
        let mut rng = thread_rng();
        let id = FileId::from_bytes(&params, &[0xab; 16]).unwrap();
        let payload = Payload::new(&params, Op::Add, &id);
        assert_eq!(payload.bits().bits(), 129);
        let p = params.encode(payload.bits(), &mut rng).unwrap();
        let back = Payload::from_bits(params.decode(&p));
        assert_eq!(back.op(), Op::Add);
        assert_eq!(back.file_id(), id);
    }
}
