use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{Duration, Instant};

use super::{ElbowMapConfig, JointVector};

/// Reference publishing period, µs (125 Hz).
pub const PUBLISH_PERIOD_US: u64 = 8000;

/// Latest Elbow reference, shared between the ROI receiver and the
/// publisher without locking.
#[derive(Debug)]
pub struct ReferenceCell(AtomicU64);

impl ReferenceCell {
    pub fn new(initial_deg: f64) -> Self {
        ReferenceCell(AtomicU64::new(initial_deg.to_bits()))
    }

    pub fn store(&self, deg: f64) {
        self.0.store(deg.to_bits(), Ordering::Release);
    }

    pub fn load(&self) -> f64 {
        f64::from_bits(self.0.load(Ordering::Acquire))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Emission {
    pub index: u64,
    pub t_us: u64,
    pub joints: JointVector,
}

/// Number of references published over `duration_us` of virtual time:
/// one at every multiple of the period strictly inside the run.
pub fn virtual_emission_count(duration_us: u64) -> u64 {
    duration_us / PUBLISH_PERIOD_US
}

/// Publishes at `t = k * 8 ms` in virtual time, reading the current
/// reference from `reference_at`.
pub fn publish_virtual(
    duration_us: u64,
    cfg: &ElbowMapConfig,
    mut reference_at: impl FnMut(u64) -> f64,
    mut sink: impl FnMut(Emission),
) -> u64 {
    let n = virtual_emission_count(duration_us);
    for k in 0..n {
        let t_us = k * PUBLISH_PERIOD_US;
        sink(Emission {
            index: k,
            t_us,
            joints: JointVector::with_elbow(cfg, reference_at(t_us)),
        });
    }
    n
}

const SPIN_MARGIN: Duration = Duration::from_micros(1500);
// long sleeps can overshoot by milliseconds on an idle (virtual) CPU
const SLEEP_CHUNK: Duration = Duration::from_micros(200);

fn wait_until(deadline: Instant) {
    loop {
        let now = Instant::now();
        if now >= deadline {
            return;
        }
        let left = deadline - now;
        if left > SPIN_MARGIN {
            std::thread::sleep((left - SPIN_MARGIN).min(SLEEP_CHUNK));
        } else {
            std::hint::spin_loop();
        }
    }
}

/// Wall-clock publisher. Deadlines are absolute multiples of the period from
/// `start`, so a late emission does not shift the ones after it. Returns the
/// measured emission times, µs since `start`.
pub fn publish_realtime(
    start: Instant,
    duration: Duration,
    cell: &ReferenceCell,
    cfg: &ElbowMapConfig,
    mut sink: impl FnMut(Emission),
) -> Vec<u64> {
    let n = virtual_emission_count(duration.as_micros() as u64);
    let mut times = Vec::with_capacity(n as usize);
    for k in 0..n {
        wait_until(start + Duration::from_micros(k * PUBLISH_PERIOD_US));
        let t_us = start.elapsed().as_micros() as u64;
        times.push(t_us);
        sink(Emission {
            index: k,
            t_us,
            joints: JointVector::with_elbow(cfg, cell.load()),
        });
    }
    times
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn emission_counts() {
        assert_eq!(virtual_emission_count(1_000_000), 125);
        assert_eq!(virtual_emission_count(10_000_000), 1250);
        assert_eq!(virtual_emission_count(7_999), 0);
        assert_eq!(virtual_emission_count(8_001), 1);
    }

    #[test]
    fn virtual_publisher_ticks_on_the_grid() {
        let cfg = ElbowMapConfig::default();
        let mut seen = Vec::new();
        let n = publish_virtual(100_000, &cfg, |t| t as f64 * 1e-3, |e| seen.push(e));
        assert_eq!(n, 12);
        assert_eq!(seen.len(), 12);
        for (k, e) in seen.iter().enumerate() {
            assert_eq!(e.t_us, k as u64 * 8000);
            assert_eq!(e.joints.elbow(), e.t_us as f64 * 1e-3);
            assert_eq!(e.joints.0[1], -90.0);
        }
    }

    #[test]
    fn reference_cell_roundtrip() {
        let c = ReferenceCell::new(-3.5);
        assert_eq!(c.load(), -3.5);
        c.store(17.25);
        assert_eq!(c.load(), 17.25);
    }

    #[test]
    fn realtime_publisher_keeps_the_period() {
        let cell = ReferenceCell::new(1.0);
        let times = publish_realtime(
            Instant::now(),
            Duration::from_millis(400),
            &cell,
            &ElbowMapConfig::default(),
            |_| {},
        );
        assert_eq!(times.len(), 50);
        for (k, t) in times.iter().enumerate() {
            assert!(*t >= k as u64 * 8000);
        }
    }
}
