//! Datagram formats for the two UDP links.
//!
//! Event datagram (camera stage -> client stage), little-endian:
//!
//! ```text
//! 0..4   seq      u32
//! 4..6   count    u16   (<= 750)
//! 6..8   reserved zero
//! 8..    count x 8-byte event words
//! ```
//!
//! ROI datagram (client -> server), fixed 20 bytes, little-endian:
//!
//! ```text
//! 0..4   seq  u32
//! 4..12  ts   u64 microseconds on the pipeline clock
//! 12..16 cx   f32 in [0, 240]
//! 16..20 cy   f32 in [0, 180]
//! ```

mod udp;

pub use udp::{datagram_seq, DatagramReceiver, DatagramSender, EndpointError, StaleFilter};

use thiserror::Error;

use crate::event::{
    decode_event, encode_event, Event, EventError, EventPacket, EVENT_BYTES, SENSOR_HEIGHT,
    SENSOR_WIDTH,
};

pub const EVENT_HEADER_BYTES: usize = 8;
pub const MAX_EVENTS_PER_DATAGRAM: usize = 750;
pub const ROI_DATAGRAM_BYTES: usize = 20;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WireError {
    #[error("malformed datagram: {0}")]
    Malformed(String),
    #[error("packet of {0} events exceeds the 750-event datagram limit")]
    TooManyEvents(usize),
    #[error("event {index} in datagram: {source}")]
    Event { index: usize, source: EventError },
    #[error("ROI center ({cx}, {cy}) outside [0,240]x[0,180]")]
    RoiOutOfRange { cx: f32, cy: f32 },
}

/// Frames one packet as an event datagram payload.
pub fn frame_events(packet: &EventPacket) -> Result<Vec<u8>, WireError> {
    let count = packet.events.len();
    if count > MAX_EVENTS_PER_DATAGRAM {
        return Err(WireError::TooManyEvents(count));
    }
    let mut out = Vec::with_capacity(EVENT_HEADER_BYTES + EVENT_BYTES * count);
    out.extend_from_slice(&packet.seq.to_le_bytes());
    out.extend_from_slice(&(count as u16).to_le_bytes());
    out.extend_from_slice(&[0, 0]);
    for (index, e) in packet.events.iter().enumerate() {
        let word = encode_event(e).map_err(|source| WireError::Event { index, source })?;
        out.extend_from_slice(&word);
    }
    Ok(out)
}

/// Reads the header of an event datagram: `(seq, count)`.
pub fn parse_event_header(bytes: &[u8]) -> Result<(u32, usize), WireError> {
    if bytes.len() < EVENT_HEADER_BYTES {
        return Err(WireError::Malformed(format!(
            "event datagram of {} bytes is shorter than its 8-byte header",
            bytes.len()
        )));
    }
    let seq = u32::from_le_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]);
    let count = u16::from_le_bytes([bytes[4], bytes[5]]) as usize;
    if count > MAX_EVENTS_PER_DATAGRAM {
        return Err(WireError::TooManyEvents(count));
    }
    Ok((seq, count))
}

pub fn parse_events(bytes: &[u8]) -> Result<EventPacket, WireError> {
    let (seq, count) = parse_event_header(bytes)?;
    let expected = EVENT_HEADER_BYTES + EVENT_BYTES * count;
    if bytes.len() != expected {
        return Err(WireError::Malformed(format!(
            "event datagram declares {count} events ({expected} bytes) but carries {} bytes",
            bytes.len()
        )));
    }
    let events = bytes[EVENT_HEADER_BYTES..]
        .chunks_exact(EVENT_BYTES)
        .enumerate()
        .map(|(index, chunk)| {
            let word: &[u8; EVENT_BYTES] = chunk.try_into().expect("chunk of 8");
            decode_event(word).map_err(|source| WireError::Event { index, source })
        })
        .collect::<Result<Vec<Event>, _>>()?;
    Ok(EventPacket { seq, events })
}

/// One smoothed ROI center on the second link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoiMessage {
    pub seq: u32,
    pub ts: u64,
    pub cx: f32,
    pub cy: f32,
}

impl RoiMessage {
    fn check_range(&self) -> Result<(), WireError> {
        let ok_x = (0.0..=SENSOR_WIDTH as f32).contains(&self.cx);
        let ok_y = (0.0..=SENSOR_HEIGHT as f32).contains(&self.cy);
        if ok_x && ok_y {
            Ok(())
        } else {
            Err(WireError::RoiOutOfRange {
                cx: self.cx,
                cy: self.cy,
            })
        }
    }
}

pub fn frame_roi(msg: &RoiMessage) -> Result<[u8; ROI_DATAGRAM_BYTES], WireError> {
    msg.check_range()?;
    let mut out = [0u8; ROI_DATAGRAM_BYTES];
    out[0..4].copy_from_slice(&msg.seq.to_le_bytes());
    out[4..12].copy_from_slice(&msg.ts.to_le_bytes());
    out[12..16].copy_from_slice(&msg.cx.to_le_bytes());
    out[16..20].copy_from_slice(&msg.cy.to_le_bytes());
    Ok(out)
}

/// Parses a ROI datagram. A wrong length is a framing error; a center
/// outside the sensor is reported separately as [`WireError::RoiOutOfRange`].
pub fn parse_roi(bytes: &[u8]) -> Result<RoiMessage, WireError> {
    let b: &[u8; ROI_DATAGRAM_BYTES] = bytes.try_into().map_err(|_| {
        WireError::Malformed(format!(
            "ROI datagram must be 20 bytes, got {}",
            bytes.len()
        ))
    })?;
    let msg = RoiMessage {
        seq: u32::from_le_bytes(b[0..4].try_into().unwrap()),
        ts: u64::from_le_bytes(b[4..12].try_into().unwrap()),
        cx: f32::from_le_bytes(b[12..16].try_into().unwrap()),
        cy: f32::from_le_bytes(b[16..20].try_into().unwrap()),
    };
    msg.check_range()?;
    Ok(msg)
}
