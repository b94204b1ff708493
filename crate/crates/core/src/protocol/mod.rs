//! Wire format for post-perception data and the impaired channel that
//! carries it.
//!
//! Each message is a 4-byte big-endian payload length followed by a UTF-8
//! JSON object:
//!
//! ```text
//! {"frame_id":7,"sim_time_ms":700,"sensor_id":"rsu-0",
//!  "objects":[{"cls":"Car","x":12.5,"y":-3.25,"l":4.5,"w":1.8,"yaw":0.1,"conf":0.9}]}
//! ```
//!
//! Floats are `f32`. Unknown fields are ignored on decode. A zero-length
//! message marks the orderly end of a stream.

mod channel;
mod socket;

use serde::{Deserialize, Serialize};

use crate::error::ProtocolError;
use crate::perception::Detection;
use crate::scenario::ObjectClass;

pub use channel::{
    sample_delay, should_drop, ChannelConfig, ChannelStats, DeterministicChannel, SendOutcome,
};
pub use socket::{Incoming, SocketReceiver, SocketSender, CONNECT_ATTEMPTS};

/// Largest payload a decoder accepts.
pub const MAX_PAYLOAD_LEN: usize = 8 << 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireObject {
    pub cls: ObjectClass,
    pub x: f32,
    pub y: f32,
    pub l: f32,
    pub w: f32,
    pub yaw: f32,
    pub conf: f32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerceptionFrame {
    pub frame_id: u64,
    pub sim_time_ms: u64,
    pub sensor_id: String,
    pub objects: Vec<WireObject>,
}

impl PerceptionFrame {
    pub fn from_detections(
        frame_id: u64,
        sim_time_ms: u64,
        sensor_id: &str,
        dets: &[Detection],
    ) -> Self {
        PerceptionFrame {
            frame_id,
            sim_time_ms,
            sensor_id: sensor_id.to_owned(),
            objects: dets
                .iter()
                .map(|d| WireObject {
                    cls: d.class,
                    x: d.bbox.cx as f32,
                    y: d.bbox.cy as f32,
                    l: d.bbox.length as f32,
                    w: d.bbox.width as f32,
                    yaw: d.bbox.yaw as f32,
                    conf: d.confidence as f32,
                })
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<(), ProtocolError> {
        for (k, o) in self.objects.iter().enumerate() {
            let finite = [o.x, o.y, o.l, o.w, o.yaw, o.conf]
                .iter()
                .all(|v| v.is_finite());
            if !finite {
                return Err(ProtocolError::Invalid(format!(
                    "object {k} has a non-finite field"
                )));
            }
            if !(o.l > 0.0 && o.w > 0.0) {
                return Err(ProtocolError::Invalid(format!(
                    "object {k} has non-positive dimensions"
                )));
            }
            if !(0.0..=1.0).contains(&o.conf) {
                return Err(ProtocolError::Invalid(format!(
                    "object {k} confidence {} outside [0, 1]",
                    o.conf
                )));
            }
        }
        Ok(())
    }
}

/// JSON payload without framing.
pub fn encode_payload(frame: &PerceptionFrame) -> Vec<u8> {
    // Plain structs of strings, integers and floats always serialize.
    serde_json::to_vec(frame).expect("perception frame serializes")
}

/// Length-prefixed message.
pub fn encode(frame: &PerceptionFrame) -> Vec<u8> {
    let payload = encode_payload(frame);
    let mut out = Vec::with_capacity(payload.len() + 4);
    out.extend_from_slice(&(payload.len() as u32).to_be_bytes());
    out.extend_from_slice(&payload);
    out
}

/// The zero-length end-of-stream message.
pub fn end_of_stream() -> [u8; 4] {
    [0; 4]
}

pub fn decode_payload(payload: &[u8]) -> Result<PerceptionFrame, ProtocolError> {
    let frame: PerceptionFrame = serde_json::from_slice(payload)?;
    frame.validate()?;
    Ok(frame)
}

#[derive(Debug)]
pub enum DecodeError {
    /// Not enough bytes yet; `needed` more would complete the message.
    Incomplete {
        needed: usize,
    },
    Protocol(ProtocolError),
}

/// Decode one framed message from the front of `bytes`, returning the frame
/// and the number of bytes consumed.
pub fn decode(bytes: &[u8]) -> Result<(PerceptionFrame, usize), DecodeError> {
    if bytes.len() < 4 {
        return Err(DecodeError::Incomplete {
            needed: 4 - bytes.len(),
        });
    }
    let len = u32::from_be_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]) as usize;
    if len > MAX_PAYLOAD_LEN {
        return Err(DecodeError::Protocol(ProtocolError::Oversized(len)));
    }
    if len == 0 {
        return Err(DecodeError::Protocol(ProtocolError::Invalid(
            "end-of-stream marker".into(),
        )));
    }
    if bytes.len() < 4 + len {
        return Err(DecodeError::Incomplete {
            needed: 4 + len - bytes.len(),
        });
    }
    decode_payload(&bytes[4..4 + len])
        .map(|f| (f, 4 + len))
        .map_err(DecodeError::Protocol)
}

/// Incremental decoder for a byte stream. Malformed messages are skipped
/// and counted; an oversized length prefix discards the buffered bytes
/// since the stream can no longer be trusted to be aligned.
#[derive(Debug, Default)]
pub struct FrameDecoder {
    buf: Vec<u8>,
    errors: u64,
    end_of_stream: bool,
}

impl FrameDecoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, bytes: &[u8]) {
        self.buf.extend_from_slice(bytes);
    }

    /// Next complete message, if any. `Some(Err(_))` reports a skipped one.
    pub fn next_frame(&mut self) -> Option<Result<PerceptionFrame, ProtocolError>> {
        if self.end_of_stream || self.buf.len() < 4 {
            return None;
        }
        let len = u32::from_be_bytes([self.buf[0], self.buf[1], self.buf[2], self.buf[3]]) as usize;
        if len == 0 {
            self.buf.drain(..4);
            self.end_of_stream = true;
            return None;
        }
        if len > MAX_PAYLOAD_LEN {
            self.buf.clear();
            self.errors += 1;
            return Some(Err(ProtocolError::Oversized(len)));
        }
        if self.buf.len() < 4 + len {
            return None;
        }
        let result = decode_payload(&self.buf[4..4 + len]);
        self.buf.drain(..4 + len);
        if result.is_err() {
            self.errors += 1;
        }
        Some(result)
    }

    pub fn errors(&self) -> u64 {
        self.errors
    }

    pub fn end_of_stream(&self) -> bool {
        self.end_of_stream
    }

    pub fn buffered(&self) -> usize {
        self.buf.len()
    }
}
