//! Plain frame codec: `{1-byte type, 8-byte epoch, 4-byte body length, body}`,
//! all integers big-endian.

use std::io::{Read, Write};

use crate::error::WireError;

/// Default cap on a frame body. Search responses are chunked well below it.
pub const DEFAULT_MAX_BODY: u32 = 1 << 20;

pub const HEADER_LEN: usize = 1 + 8 + 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum MsgType {
    Hello = 1,
    DataUpdate = 2,
    SearchReq = 3,
    SearchResp = 4,
    KeyUpdate = 5,
    Ack = 6,
    Error = 7,
    /// Carrier for an AEAD-sealed inner frame.
    Sealed = 8,
}

impl MsgType {
    pub fn from_u8(v: u8) -> Result<MsgType, WireError> {
        Ok(match v {
            1 => MsgType::Hello,
            2 => MsgType::DataUpdate,
            3 => MsgType::SearchReq,
            4 => MsgType::SearchResp,
            5 => MsgType::KeyUpdate,
            6 => MsgType::Ack,
            7 => MsgType::Error,
            8 => MsgType::Sealed,
            _ => return Err(WireError::Malformed("unknown message type")),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub msg_type: MsgType,
    pub epoch: u64,
    pub body: Vec<u8>,
}

impl Frame {
    pub fn new(msg_type: MsgType, epoch: u64, body: Vec<u8>) -> Frame {
        Frame { msg_type, epoch, body }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.body.len());
        out.push(self.msg_type as u8);
        out.extend_from_slice(&self.epoch.to_be_bytes());
        out.extend_from_slice(&(self.body.len() as u32).to_be_bytes());
        out.extend_from_slice(&self.body);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Frame, WireError> {
        if bytes.len() < HEADER_LEN {
            return Err(WireError::Malformed("frame shorter than its header"));
        }
        let msg_type = MsgType::from_u8(bytes[0])?;
        let epoch = u64::from_be_bytes(bytes[1..9].try_into().unwrap());
        let len = u32::from_be_bytes(bytes[9..13].try_into().unwrap()) as usize;
        if bytes.len() != HEADER_LEN + len {
            return Err(WireError::Malformed("frame length field disagrees with the body"));
        }
        Ok(Frame {
            msg_type,
            epoch,
            body: bytes[HEADER_LEN..].to_vec(),
        })
    }
}

/// A framed connection over any reliable byte stream.
pub struct FrameConn<S> {
    stream: S,
    max_body: u32,
}

impl<S: Read + Write> FrameConn<S> {
    pub fn new(stream: S, max_body: u32) -> FrameConn<S> {
        FrameConn { stream, max_body }
    }

    pub fn max_body(&self) -> u32 {
        self.max_body
    }

    pub fn into_inner(self) -> S {
        self.stream
    }

    pub fn send(&mut self, frame: &Frame) -> Result<(), WireError> {
        if frame.body.len() as u64 > self.max_body as u64 {
            return Err(WireError::Oversize {
                got: frame.body.len() as u64,
                max: self.max_body,
            });
        }
        self.stream.write_all(&frame.encode())?;
        self.stream.flush()?;
        Ok(())
    }

    /// Reads one frame; `Ok(None)` on a clean end-of-stream at a frame
    /// boundary, an error if the peer vanished mid-frame.
    pub fn recv_opt(&mut self) -> Result<Option<Frame>, WireError> {
        let mut header = [0u8; HEADER_LEN];
        match read_exact_or_eof(&mut self.stream, &mut header)? {
            ReadOutcome::Eof => return Ok(None),
            ReadOutcome::Full => {}
            ReadOutcome::Partial => return Err(WireError::Truncated),
        }
        let msg_type = MsgType::from_u8(header[0])?;
        let epoch = u64::from_be_bytes(header[1..9].try_into().unwrap());
        let len = u32::from_be_bytes(header[9..13].try_into().unwrap());
        if len > self.max_body {
            return Err(WireError::Oversize { got: len as u64, max: self.max_body });
        }
        let mut body = vec![0u8; len as usize];
        self.stream.read_exact(&mut body).map_err(|e| {
            if e.kind() == std::io::ErrorKind::UnexpectedEof {
                WireError::Truncated
            } else {
                WireError::Io(e)
            }
        })?;
        Ok(Some(Frame { msg_type, epoch, body }))
    }

    /// Reads one frame, treating end-of-stream as an error.
    pub fn recv(&mut self) -> Result<Frame, WireError> {
        self.recv_opt()?.ok_or(WireError::Truncated)
    }
}

enum ReadOutcome {
    Full,
    Partial,
    Eof,
}

fn read_exact_or_eof<R: Read>(reader: &mut R, buf: &mut [u8]) -> Result<ReadOutcome, WireError> {
    let mut filled = 0;
    while filled < buf.len() {
        match reader.read(&mut buf[filled..]) {
            Ok(0) => {
                return Ok(if filled == 0 { ReadOutcome::Eof } else { ReadOutcome::Partial });
            }
            Ok(n) => filled += n,
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => continue,
            Err(e) => return Err(WireError::Io(e)),
        }
    }
    Ok(ReadOutcome::Full)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_unknown_type() {
        let mut bytes = Frame::new(MsgType::Ack, 1, vec![]).encode();
        bytes[0] = 0x7f;
        assert!(Frame::decode(&bytes).is_err());
    }

    proptest! {
        #[test]
        fn codec_roundtrip(type_idx in 1u8..=8, epoch in any::<u64>(), body in proptest::collection::vec(any::<u8>(), 0..256)) {
            let frame = Frame::new(MsgType::from_u8(type_idx).unwrap(), epoch, body);
            prop_assert_eq!(Frame::decode(&frame.encode()).unwrap(), frame);
        }
    }
}
