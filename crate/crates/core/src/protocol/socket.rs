//! TCP transport for the two-process deployment. The sender applies the
//! same delay and drop draws as the in-memory channel, on the caller's
//! simulation clock; the receiver decodes on a reader thread and hands
//! frames over an ordered queue.

use std::io::{ErrorKind, Read, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream};
use std::sync::mpsc;
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use super::channel::{ChannelConfig, ChannelStats, DeterministicChannel, SendOutcome};
use super::{end_of_stream, FrameDecoder, PerceptionFrame};
use crate::error::TransportError;

/// Connection attempts before giving up; the wait doubles from 50 ms up to 1 s.
pub const CONNECT_ATTEMPTS: u32 = 8;

fn connect_with_backoff(addr: &str) -> Result<TcpStream, TransportError> {
    let mut wait = Duration::from_millis(50);
    let mut last = None;
    for attempt in 1..=CONNECT_ATTEMPTS {
        match TcpStream::connect(addr) {
            Ok(s) => {
                s.set_nodelay(true)?;
                return Ok(s);
            }
            Err(e) => {
                log::debug!("connect to {addr} failed (attempt {attempt}): {e}");
                last = Some(e);
            }
        }
        if attempt < CONNECT_ATTEMPTS {
            thread::sleep(wait);
            wait = (wait * 2).min(Duration::from_secs(1));
        }
    }
    Err(TransportError::Connect {
        addr: addr.to_owned(),
        attempts: CONNECT_ATTEMPTS,
        source: last.unwrap_or_else(|| std::io::Error::other("no attempt made")),
    })
}

pub struct SocketSender {
    addr: String,
    stream: Option<TcpStream>,
    channel: DeterministicChannel<Vec<u8>>,
    lost: u64,
}

impl SocketSender {
    pub fn connect(addr: &str, cfg: ChannelConfig) -> Result<Self, TransportError> {
        let stream = connect_with_backoff(addr)?;
        Ok(SocketSender {
            addr: addr.to_owned(),
            stream: Some(stream),
            channel: DeterministicChannel::new(cfg),
            lost: 0,
        })
    }

    /// Schedule an encoded message; it goes on the wire at the first
    /// [`pump`](Self::pump) whose clock has reached its delivery time.
    pub fn send(&mut self, bytes: Vec<u8>, frame_id: u64, now_ms: u64) -> SendOutcome {
        self.channel.send(bytes, frame_id, now_ms)
    }

    /// Write every message due by `now_ms`. A write failure loses that
    /// message, then one reconnect round is tried.
    pub fn pump(&mut self, now_ms: u64) -> Result<usize, TransportError> {
        let due = self.channel.poll(now_ms);
        let mut written = 0;
        for msg in due {
            let ok = match self.stream.as_mut() {
                Some(s) => s.write_all(&msg).is_ok(),
                None => false,
            };
            if ok {
                written += 1;
                continue;
            }
            self.lost += 1;
            log::warn!("lost a message to {}; reconnecting", self.addr);
            self.stream = None;
            self.stream = Some(connect_with_backoff(&self.addr)?);
        }
        Ok(written)
    }

    /// Flush everything still in flight, send the end-of-stream marker and
    /// close the write half.
    pub fn finish(mut self) -> Result<ChannelStats, TransportError> {
        self.pump(u64::MAX)?;
        if let Some(mut s) = self.stream.take() {
            s.write_all(&end_of_stream())?;
            s.flush()?;
            s.shutdown(Shutdown::Write)?;
            // Wait for the peer to close so everything is known to be read.
            let mut sink = [0u8; 64];
            while matches!(s.read(&mut sink), Ok(n) if n > 0) {}
        }
        Ok(self.stats())
    }

    pub fn stats(&self) -> ChannelStats {
        let mut stats = *self.channel.stats();
        stats.delivered -= self.lost;
        stats.lost = self.lost;
        stats
    }
}

#[derive(Debug)]
pub enum Incoming {
    Frame(PerceptionFrame),
    /// A message that failed to decode and was skipped.
    Malformed(String),
    /// The sender finished with the end-of-stream marker.
    End,
    /// The connection closed without an end-of-stream marker.
    Closed,
}

pub struct SocketReceiver {
    listener: TcpListener,
}

impl SocketReceiver {
    pub fn bind(addr: &str) -> Result<Self, TransportError> {
        Ok(SocketReceiver {
            listener: TcpListener::bind(addr)?,
        })
    }

    pub fn local_addr(&self) -> Result<SocketAddr, TransportError> {
        Ok(self.listener.local_addr()?)
    }

    /// Accept the sender (waiting at most `timeout`) and start the reader
    /// thread. Dropped connections are re-accepted until the end-of-stream
    /// marker arrives or no sender shows up within `timeout`.
    pub fn accept(
        self,
        timeout: Duration,
    ) -> Result<(mpsc::Receiver<Incoming>, JoinHandle<()>), TransportError> {
        self.listener.set_nonblocking(true)?;
        let first = accept_within(&self.listener, timeout)?;
        let (tx, rx) = mpsc::channel();
        let listener = self.listener;
        let handle = thread::spawn(move || {
            let mut stream = Some(first);
            while let Some(s) = stream.take() {
                if read_stream(s, &tx) {
                    return;
                }
                if tx.send(Incoming::Closed).is_err() {
                    return;
                }
                stream = accept_within(&listener, timeout).ok();
            }
        });
        Ok((rx, handle))
    }
}

fn accept_within(listener: &TcpListener, timeout: Duration) -> Result<TcpStream, TransportError> {
    let start = Instant::now();
    loop {
        match listener.accept() {
            Ok((s, _)) => {
                s.set_nonblocking(false)?;
                return Ok(s);
            }
            Err(e) if e.kind() == ErrorKind::WouldBlock => {
                if start.elapsed() >= timeout {
                    return Err(TransportError::Io(std::io::Error::new(
                        ErrorKind::TimedOut,
                        "no sender connected",
                    )));
                }
                thread::sleep(Duration::from_millis(10));
            }
            Err(e) => return Err(e.into()),
        }
    }
}

/// Returns true when the stream ended with the end-of-stream marker.
fn read_stream(mut s: TcpStream, tx: &mpsc::Sender<Incoming>) -> bool {
    let mut decoder = FrameDecoder::new();
    let mut buf = vec![0u8; 64 * 1024];
    loop {
        let n = match s.read(&mut buf) {
            Ok(0) | Err(_) => return false,
            Ok(n) => n,
        };
        decoder.push(&buf[..n]);
        while let Some(result) = decoder.next_frame() {
            let item = match result {
                Ok(f) => Incoming::Frame(f),
                Err(e) => Incoming::Malformed(e.to_string()),
            };
            if tx.send(item).is_err() {
                return true;
            }
        }
        if decoder.end_of_stream() {
            let _ = tx.send(Incoming::End);
            return true;
        }
    }
}
