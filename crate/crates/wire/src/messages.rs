//! Typed message bodies. Epochs ride in the frame header; bodies carry only
//! the payload fields, all fixed-width and big-endian.

use bamboo_core::client::{KeyUpdateToken, SearchTrapdoor};
use bamboo_core::group::{GroupElement, Scalar, ELEMENT_BYTES, SCALAR_BYTES};
use bamboo_core::server::Ciphertext;

use crate::error::WireError;

/// DATA_UPDATE body: `L || D || C` (3 × 33 bytes).
pub fn encode_ciphertext(ct: &Ciphertext) -> Vec<u8> {
    let mut out = Vec::with_capacity(3 * ELEMENT_BYTES);
    out.extend_from_slice(&ct.label.to_bytes());
    out.extend_from_slice(&ct.d.to_bytes());
    out.extend_from_slice(&ct.c.to_bytes());
    out
}

pub fn decode_ciphertext(body: &[u8]) -> Result<Ciphertext, WireError> {
    if body.len() != 3 * ELEMENT_BYTES {
        return Err(WireError::Malformed("data update body must be 99 bytes"));
    }
    let element = |range: std::ops::Range<usize>| {
        GroupElement::from_bytes(&body[range])
            .map_err(|_| WireError::Malformed("invalid ciphertext component"))
    };
    Ok(Ciphertext {
        label: element(0..33)?,
        d: element(33..66)?,
        c: element(66..99)?,
    })
}

/// SEARCH_REQ body: `K1 || L || Msk_D || Msk_C || pad_target u64`.
pub fn encode_trapdoor(td: &SearchTrapdoor) -> Vec<u8> {
    let mut out = Vec::with_capacity(SCALAR_BYTES + 3 * ELEMENT_BYTES + 8);
    out.extend_from_slice(&td.k1.to_bytes());
    out.extend_from_slice(&td.label.to_bytes());
    out.extend_from_slice(&td.mask_d.to_bytes());
    out.extend_from_slice(&td.mask_c.to_bytes());
    out.extend_from_slice(&td.pad_target.to_be_bytes());
    out
}

pub fn decode_trapdoor(body: &[u8], epoch: u64) -> Result<SearchTrapdoor, WireError> {
    if body.len() != SCALAR_BYTES + 3 * ELEMENT_BYTES + 8 {
        return Err(WireError::Malformed("search request body has a bad length"));
    }
    let k1 = Scalar::from_bytes(&body[..32])
        .map_err(|_| WireError::Malformed("invalid search key"))?;
    let element = |range: std::ops::Range<usize>| {
        GroupElement::from_bytes(&body[range])
            .map_err(|_| WireError::Malformed("invalid trapdoor element"))
    };
    let pad_target = u64::from_be_bytes(body[131..139].try_into().unwrap());
    Ok(SearchTrapdoor {
        k1,
        label: element(32..65)?,
        mask_d: element(65..98)?,
        mask_c: element(98..131)?,
        pad_target,
        epoch,
    })
}

/// SEARCH_RESP chunk body: `total u64 || count u32 || count × 33 bytes`.
pub fn encode_resp_chunk(total: u64, components: &[GroupElement]) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + components.len() * ELEMENT_BYTES);
    out.extend_from_slice(&total.to_be_bytes());
    out.extend_from_slice(&(components.len() as u32).to_be_bytes());
    for c in components {
        out.extend_from_slice(&c.to_bytes());
    }
    out
}

pub fn decode_resp_chunk(body: &[u8]) -> Result<(u64, Vec<GroupElement>), WireError> {
    if body.len() < 12 {
        return Err(WireError::Malformed("search response chunk too short"));
    }
    let total = u64::from_be_bytes(body[..8].try_into().unwrap());
    let count = u32::from_be_bytes(body[8..12].try_into().unwrap()) as usize;
    if body.len() != 12 + count * ELEMENT_BYTES {
        return Err(WireError::Malformed("search response chunk has a bad length"));
    }
    let mut components = Vec::with_capacity(count);
    for chunk in body[12..].chunks_exact(ELEMENT_BYTES) {
        components.push(
            GroupElement::from_bytes(chunk)
                .map_err(|_| WireError::Malformed("invalid response component"))?,
        );
    }
    Ok((total, components))
}

/// KEY_UPDATE body: the 32-byte token; the new epoch rides in the header.
pub fn encode_key_update(token: &KeyUpdateToken) -> Vec<u8> {
    token.delta.to_bytes().to_vec()
}

pub fn decode_key_update(body: &[u8], new_epoch: u64) -> Result<KeyUpdateToken, WireError> {
    if body.len() != SCALAR_BYTES {
        return Err(WireError::Malformed("key update body must be 32 bytes"));
    }
    let delta = Scalar::from_bytes(body)
        .map_err(|_| WireError::Malformed("invalid key update token"))?;
    Ok(KeyUpdateToken { delta, new_epoch })
}

/// ERROR body: `code u8 || len u32 || utf8 message`.
pub fn encode_error(code: u8, message: &str) -> Vec<u8> {
    let msg = message.as_bytes();
    let mut out = Vec::with_capacity(5 + msg.len());
    out.push(code);
    out.extend_from_slice(&(msg.len() as u32).to_be_bytes());
    out.extend_from_slice(msg);
    out
}

pub fn decode_error(body: &[u8]) -> Result<(u8, String), WireError> {
    if body.len() < 5 {
        return Err(WireError::Malformed("error body too short"));
    }
    let code = body[0];
    let len = u32::from_be_bytes(body[1..5].try_into().unwrap()) as usize;
    if body.len() != 5 + len {
        return Err(WireError::Malformed("error body has a bad length"));
    }
    let message = String::from_utf8_lossy(&body[5..]).into_owned();
    Ok((code, message))
}
