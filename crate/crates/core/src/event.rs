//! DVS events and the 8-byte event word.
//!
//! Layout of one encoded event (all little-endian):
//!
//! ```text
//! bytes 0..4  address word: bits 0-8 x, bits 9-17 y, bit 18 polarity (1 = ON), bits 19-31 zero
//! bytes 4..8  timestamp in microseconds
//! ```

use thiserror::Error;

/// Sensor width in pixels.
pub const SENSOR_WIDTH: u16 = 240;
/// Sensor height in pixels.
pub const SENSOR_HEIGHT: u16 = 180;
/// Size of one encoded event.
pub const EVENT_BYTES: usize = 8;

const X_MASK: u32 = 0x1ff;
const Y_SHIFT: u32 = 9;
const Y_MASK: u32 = 0x1ff;
const POL_BIT: u32 = 1 << 18;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Polarity {
    Off,
    On,
}

impl Polarity {
    pub fn is_on(self) -> bool {
        matches!(self, Polarity::On)
    }
}

/// One brightness-change event: pixel column, pixel row, timestamp (µs), polarity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Event {
    pub x: u16,
    pub y: u16,
    pub ts: u32,
    pub pol: Polarity,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EventError {
    #[error("event coordinate ({x}, {y}) lies outside the 240x180 sensor")]
    OutOfBounds { x: u32, y: u32 },
}

impl Event {
    /// Builds an event, rejecting coordinates outside the sensor.
    pub fn new(x: u16, y: u16, ts: u32, pol: Polarity) -> Result<Self, EventError> {
        let e = Event { x, y, ts, pol };
        e.check_bounds()?;
        Ok(e)
    }

    pub fn in_bounds(&self) -> bool {
        self.x < SENSOR_WIDTH && self.y < SENSOR_HEIGHT
    }

    fn check_bounds(&self) -> Result<(), EventError> {
        if self.in_bounds() {
            Ok(())
        } else {
            Err(EventError::OutOfBounds {
                x: self.x as u32,
                y: self.y as u32,
            })
        }
    }
}

/// A run of events sharing one sequence number; events are in non-decreasing
/// timestamp order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EventPacket {
    pub seq: u32,
    pub events: Vec<Event>,
}

impl EventPacket {
    pub fn new(seq: u32, events: Vec<Event>) -> Self {
        EventPacket { seq, events }
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn is_time_ordered(&self) -> bool {
        self.events.windows(2).all(|w| w[0].ts <= w[1].ts)
    }

    pub fn first_ts(&self) -> Option<u32> {
        self.events.first().map(|e| e.ts)
    }

    pub fn last_ts(&self) -> Option<u32> {
        self.events.last().map(|e| e.ts)
    }
}

pub fn encode_event(e: &Event) -> Result<[u8; EVENT_BYTES], EventError> {
    e.check_bounds()?;
    let mut addr = (e.x as u32) | ((e.y as u32) << Y_SHIFT);
    if e.pol.is_on() {
        addr |= POL_BIT;
    }
    let mut out = [0u8; EVENT_BYTES];
    out[..4].copy_from_slice(&addr.to_le_bytes());
    out[4..].copy_from_slice(&e.ts.to_le_bytes());
    Ok(out)
}

/// Inverse of [`encode_event`]. Reserved address bits are ignored.
pub fn decode_event(bytes: &[u8; EVENT_BYTES]) -> Result<Event, EventError> {
    let addr = u32::from_le_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]);
    let ts = u32::from_le_bytes([bytes[4], bytes[5], bytes[6], bytes[7]]);
    let x = addr & X_MASK;
    let y = (addr >> Y_SHIFT) & Y_MASK;
    if x >= SENSOR_WIDTH as u32 || y >= SENSOR_HEIGHT as u32 {
        return Err(EventError::OutOfBounds { x, y });
    }
    let pol = if addr & POL_BIT != 0 {
        Polarity::On
    } else {
        Polarity::Off
    };
    Ok(Event {
        x: x as u16,
        y: y as u16,
        ts,
        pol,
    })
}
