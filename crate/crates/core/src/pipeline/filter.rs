use crate::event::{Event, EventPacket, SENSOR_HEIGHT, SENSOR_WIDTH};

const W: usize = SENSOR_WIDTH as usize;
const H: usize = SENSOR_HEIGHT as usize;

/// Spatio-temporal correlation filter state: the last timestamp seen at
/// each pixel of the 240x180 grid.
#[derive(Debug, Clone)]
pub struct FilterState {
    last_ts: Vec<Option<u32>>,
    correlation_window_us: u32,
}

impl FilterState {
    pub fn new(correlation_window_us: u32) -> Self {
        FilterState {
            last_ts: vec![None; W * H],
            correlation_window_us,
        }
    }

    pub fn correlation_window_us(&self) -> u32 {
        self.correlation_window_us
    }

    fn supported(&self, e: &Event) -> bool {
        let (x, y) = (e.x as usize, e.y as usize);
        let xs = x.saturating_sub(1)..=(x + 1).min(W - 1);
        for ny in y.saturating_sub(1)..=(y + 1).min(H - 1) {
            for nx in xs.clone() {
                if let Some(last) = self.last_ts[ny * W + nx] {
                    if last <= e.ts && e.ts - last <= self.correlation_window_us {
                        return true;
                    }
                }
            }
        }
        false
    }

    /// Keeps an event iff its own pixel or one of its 8 neighbours fired
    /// within the correlation window before it. Every input event updates
    /// the grid, kept or not.
    pub fn filter(&mut self, events: &[Event]) -> Vec<Event> {
        let mut out = Vec::with_capacity(events.len());
        for e in events {
            if !e.in_bounds() {
                continue;
            }
            if self.supported(e) {
                out.push(*e);
            }
            self.last_ts[e.y as usize * W + e.x as usize] = Some(e.ts);
        }
        out
    }
}

impl Default for FilterState {
    fn default() -> Self {
        FilterState::new(2000)
    }
}

pub fn filter_noise(packet: &EventPacket, state: &mut FilterState) -> EventPacket {
    EventPacket::new(packet.seq, state.filter(&packet.events))
}
