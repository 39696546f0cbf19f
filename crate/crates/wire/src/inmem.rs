//! In-memory byte streams: a blocking duplex pipe for driving a client and
//! server in one process, and a tap that records traffic for inspection.

use std::collections::VecDeque;
use std::io::{self, Read, Write};
use std::sync::mpsc::{channel, Receiver, Sender};
use std::sync::{Arc, Mutex};

/// One end of an in-memory duplex byte stream.
pub struct PipeStream {
    tx: Sender<Vec<u8>>,
    rx: Receiver<Vec<u8>>,
    pending: VecDeque<u8>,
}

/// A connected pair of byte streams; writes on one side are read in order on
/// the other. Dropping an end yields EOF on its peer.
pub fn duplex() -> (PipeStream, PipeStream) {
    let (atx, arx) = channel();
    let (btx, brx) = channel();
    (
        PipeStream { tx: atx, rx: brx, pending: VecDeque::new() },
        PipeStream { tx: btx, rx: arx, pending: VecDeque::new() },
    )
}

impl Read for PipeStream {
    fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
        if self.pending.is_empty() {
            match self.rx.recv() {
                Ok(chunk) => self.pending.extend(chunk),
                Err(_) => return Ok(0), // peer dropped
            }
        }
        let n = buf.len().min(self.pending.len());
        for slot in buf.iter_mut().take(n) {
            *slot = self.pending.pop_front().unwrap();
        }
        Ok(n)
    }
}

impl Write for PipeStream {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        self.tx
            .send(buf.to_vec())
            .map_err(|_| io::Error::new(io::ErrorKind::BrokenPipe, "peer closed"))?;
        Ok(buf.len())
    }

    fn flush(&mut self) -> io::Result<()> {
        Ok(())
    }
}

/// Shared byte counters and capture buffers for a [`TapStream`].
#[derive(Debug, Default)]
pub struct Tap {
    pub sent: Mutex<Vec<u8>>,
    pub received: Mutex<Vec<u8>>,
}

impl Tap {
    pub fn new() -> Arc<Tap> {
        Arc::new(Tap::default())
    }

    pub fn sent_bytes(&self) -> u64 {
        self.sent.lock().unwrap().len() as u64
    }

    pub fn received_bytes(&self) -> u64 {
        self.received.lock().unwrap().len() as u64
    }

    /// All traffic in both directions, concatenated.
    pub fn all_traffic(&self) -> Vec<u8> {
        let mut out = self.sent.lock().unwrap().clone();
        out.extend_from_slice(&self.received.lock().unwrap());
        out
    }
}

/// A stream wrapper that appends everything flowing through it to a [`Tap`].
pub struct TapStream<S> {
    inner: S,
    tap: Arc<Tap>,
}

impl<S> TapStream<S> {
    pub fn new(inner: S, tap: Arc<Tap>) -> TapStream<S> {
        TapStream { inner, tap }
    }
}

impl<S: Read> Read for TapStream<S> {
    fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
        let n = self.inner.read(buf)?;
        self.tap.received.lock().unwrap().extend_from_slice(&buf[..n]);
        Ok(n)
    }
}

impl<S: Write> Write for TapStream<S> {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        let n = self.inner.write(buf)?;
        self.tap.sent.lock().unwrap().extend_from_slice(&buf[..n]);
        Ok(n)
    }

    fn flush(&mut self) -> io::Result<()> {
        self.inner.flush()
    }
}
