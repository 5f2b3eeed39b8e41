//! Synthetic hand-waving scene: a stepper-driven sinusoidal rotation of a
//! rectangular "hand" about a pivot, the DVS events its moving edges emit,
//! and the gyro trace of a sensor riding on the hand.
//!
//! Image coordinates: x to the right, y downward. The hand direction for a
//! rotation angle θ is `(sin θ, -cos θ)`, so θ = 0 puts the hand straight
//! above the pivot and positive θ swings it to the image right.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::event::{Event, EventPacket, Polarity, SENSOR_HEIGHT, SENSOR_WIDTH};
use crate::latency::{GyroTrace, GYRO_RATE_HZ};

/// Events per packet emitted by the sensor stage.
pub const PACKET_EVENTS: usize = 750;

/// Events per pixel of edge per pixel of normal travel. Calibrated so the
/// default 0.5 Hz scene emits 125k events/s (one 750-event packet per 6 ms).
pub const DEFAULT_EVENT_RATE_COEFF: f64 = 18.947;

/// Generation time bin, µs. Event times are uniform within a bin.
const BIN_US: u64 = 50;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SceneError {
    #[error("invalid stepper profile: {0}")]
    Stepper(String),
    #[error("invalid hand model: {0}")]
    Hand(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StepperProfile {
    pub amplitude_deg: f64,
    pub frequency_hz: f64,
    pub step_size_deg: f64,
    pub phase_rad: f64,
}

impl Default for StepperProfile {
    fn default() -> Self {
        // NEMA 17 (1.8°/step) at 1/8 microstepping.
        StepperProfile {
            amplitude_deg: 36.0,
            frequency_hz: 0.5,
            step_size_deg: 0.225,
            phase_rad: 0.0,
        }
    }
}

impl StepperProfile {
    pub fn validate(&self) -> Result<(), SceneError> {
        let bad = |m: &str| Err(SceneError::Stepper(m.to_string()));
        if !(self.amplitude_deg > 0.0 && self.amplitude_deg.is_finite()) {
            return bad("amplitude_deg must be positive");
        }
        if !(self.frequency_hz > 0.0 && self.frequency_hz.is_finite()) {
            return bad("frequency_hz must be positive");
        }
        if !(self.step_size_deg > 0.0 && self.step_size_deg.is_finite()) {
            return bad("step_size_deg must be positive");
        }
        if !self.phase_rad.is_finite() {
            return bad("phase_rad must be finite");
        }
        let steps = self.amplitude_deg / self.step_size_deg;
        if (steps - steps.round()).abs() > 1e-6 * steps.max(1.0) {
            return bad("amplitude_deg must be an integer multiple of step_size_deg");
        }
        Ok(())
    }

    pub fn period_s(&self) -> f64 {
        1.0 / self.frequency_hz
    }

    /// Unquantized sinusoid, degrees.
    pub fn smooth_angle(&self, t: f64) -> f64 {
        self.amplitude_deg * (2.0 * PI * self.frequency_hz * t + self.phase_rad).sin()
    }

    /// Time derivative of [`StepperProfile::smooth_angle`], deg/s.
    pub fn smooth_rate(&self, t: f64) -> f64 {
        let w = 2.0 * PI * self.frequency_hz;
        self.amplitude_deg * w * (w * t + self.phase_rad).cos()
    }
}

fn quantize(v: f64, step: f64) -> f64 {
    (v / step).round() * step
}

/// Stepper shaft angle at time `t` (seconds): the sinusoid rounded to the
/// nearest microstep.
pub fn stepper_angle(t: f64, p: &StepperProfile) -> f64 {
    quantize(p.smooth_angle(t), p.step_size_deg)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HandModel {
    pub pivot_x: f64,
    pub pivot_y: f64,
    pub arm_length_px: f64,
    pub width_px: f64,
    pub height_px: f64,
    pub event_rate_coeff: f64,
}

impl Default for HandModel {
    fn default() -> Self {
        HandModel {
            pivot_x: 120.0,
            pivot_y: 160.0,
            arm_length_px: 60.0,
            width_px: 30.0,
            height_px: 40.0,
            event_rate_coeff: DEFAULT_EVENT_RATE_COEFF,
        }
    }
}

/// Oriented hand rectangle in image coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HandPose {
    pub angle_deg: f64,
    pub center: (f64, f64),
    pub width: f64,
    pub height: f64,
}

impl HandPose {
    /// Corners in order: far-left, far-right, near-right, near-left
    /// (far = away from the pivot).
    pub fn corners(&self) -> [(f64, f64); 4] {
        let (er, eu) = axes(self.angle_deg);
        let (hw, hh) = (self.width / 2.0, self.height / 2.0);
        let at = |a: f64, b: f64| {
            (
                self.center.0 + a * er.0 + b * eu.0,
                self.center.1 + a * er.1 + b * eu.1,
            )
        };
        [at(hh, -hw), at(hh, hw), at(-hh, hw), at(-hh, -hw)]
    }
}

/// Radial (toward the hand) and lateral (image-right at θ = 0) unit vectors.
fn axes(angle_deg: f64) -> ((f64, f64), (f64, f64)) {
    let th = angle_deg.to_radians();
    ((th.sin(), -th.cos()), (th.cos(), th.sin()))
}

impl HandModel {
    pub fn validate(&self, p: &StepperProfile) -> Result<(), SceneError> {
        let bad = |m: String| Err(SceneError::Hand(m));
        for (name, v) in [
            ("arm_length_px", self.arm_length_px),
            ("width_px", self.width_px),
            ("height_px", self.height_px),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive"));
            }
        }
        if !(self.event_rate_coeff >= 0.0 && self.event_rate_coeff.is_finite()) {
            return bad("event_rate_coeff must be non-negative".into());
        }
        if self.height_px / 2.0 >= self.arm_length_px {
            return bad("hand rectangle must not cover the pivot".into());
        }
        // sweep the whole swing; the topmost corner is not always at an extreme
        let n = 720;
        for i in 0..=n {
            let angle = -p.amplitude_deg + 2.0 * p.amplitude_deg * i as f64 / n as f64;
            for (x, y) in self.pose_at(angle).corners() {
                let inside = (0.0..=(SENSOR_WIDTH - 1) as f64).contains(&x)
                    && (0.0..=(SENSOR_HEIGHT - 1) as f64).contains(&y);
                if !inside {
                    return bad(format!(
                        "hand rectangle leaves the 240x180 frame at {angle:.2}° (corner at ({x:.1}, {y:.1}))"
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn pose_at(&self, angle_deg: f64) -> HandPose {
        let (er, _) = axes(angle_deg);
        HandPose {
            angle_deg,
            center: (
                self.pivot_x + self.arm_length_px * er.0,
                self.pivot_y + self.arm_length_px * er.1,
            ),
            width: self.width_px,
            height: self.height_px,
        }
    }

    /// Edge sample points at roughly one-pixel spacing, in hand-local
    /// coordinates relative to the pivot.
    fn edge_points(&self) -> Vec<EdgePoint> {
        let (hw, hh) = (self.width_px / 2.0, self.height_px / 2.0);
        let (near, far) = (self.arm_length_px - hh, self.arm_length_px + hh);
        let nw = (self.width_px.round() as usize).max(1);
        let nh = (self.height_px.round() as usize).max(1);
        let mut pts = Vec::with_capacity(2 * (nw + nh));
        for j in 0..nw {
            let b = -hw + (j as f64 + 0.5) * self.width_px / nw as f64;
            // Far edge: outward normal is +radial, normal speed -θ'·b.
            pts.push(EdgePoint::new(far, b, -b));
            // Near edge: outward normal is -radial, normal speed +θ'·b.
            pts.push(EdgePoint::new(near, b, b));
        }
        for j in 0..nh {
            let a = near + (j as f64 + 0.5) * self.height_px / nh as f64;
            // Right edge: normal speed +θ'·a; left edge: -θ'·a.
            pts.push(EdgePoint::new(a, hw, a));
            pts.push(EdgePoint::new(a, -hw, -a));
        }
        pts
    }
}

#[derive(Debug, Clone, Copy)]
struct EdgePoint {
    radial: f64,
    lateral: f64,
    /// Outward normal speed per unit angular rate (px per rad).
    lever: f64,
}

impl EdgePoint {
    fn new(radial: f64, lateral: f64, lever: f64) -> Self {
        EdgePoint {
            radial,
            lateral,
            lever,
        }
    }
}

pub fn hand_pose(t: f64, p: &StepperProfile, h: &HandModel) -> Result<HandPose, SceneError> {
    h.validate(p)?;
    Ok(h.pose_at(stepper_angle(t, p)))
}

/// Whether an event came from the moving hand or from injected noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventSource {
    Signal,
    Noise,
}

fn seconds_to_us(t: f64) -> u64 {
    (t * 1e6).round().max(0.0) as u64
}

/// Edge events of the moving hand over `[t0, t1)`, sorted by timestamp.
///
/// Each edge sample point fires as a Poisson process with rate
/// `event_rate_coeff · |normal speed|`; polarity is ON on edges moving
/// outward (leading) and OFF on edges moving inward (trailing). Rates follow
/// the smooth sinusoid: a single microstep moves the hand by a fraction of a
/// pixel, below what the pixel grid resolves. Positions follow the stepped
/// angle.
pub fn generate_signal_events(
    t0: f64,
    t1: f64,
    p: &StepperProfile,
    h: &HandModel,
    seed: u64,
) -> Vec<Event> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts = h.edge_points();
    let total_lever: f64 = pts.iter().map(|q| q.lever.abs()).sum();
    let mut cumulative = Vec::with_capacity(pts.len());
    let mut acc = 0.0;
    for q in &pts {
        acc += q.lever.abs();
        cumulative.push(acc);
    }

    let (start, end) = (seconds_to_us(t0), seconds_to_us(t1));
    let mut events = Vec::new();
    let mut bin = start;
    let mut scratch: Vec<Event> = Vec::new();
    while bin < end {
        let bin_end = (bin + BIN_US).min(end);
        let width_us = bin_end - bin;
        let mid = (bin as f64 + width_us as f64 / 2.0) * 1e-6;
        let rate_rad = p.smooth_rate(mid).to_radians();
        let mean = h.event_rate_coeff * rate_rad.abs() * total_lever * width_us as f64 * 1e-6;
        let n = if mean > 0.0 {
            Poisson::new(mean)
                .map(|d| d.sample(&mut rng) as u64)
                .unwrap_or(0)
        } else {
            0
        };
        scratch.clear();
        for _ in 0..n {
            let ts = bin + rng.random_range(0..width_us);
            let pick = rng.random::<f64>() * total_lever;
            let idx = cumulative.partition_point(|&c| c < pick).min(pts.len() - 1);
            let q = pts[idx];
            let t = ts as f64 * 1e-6;
            let angle = stepper_angle(t, p);
            let (er, eu) = axes(angle);
            let x = h.pivot_x + q.radial * er.0 + q.lateral * eu.0;
            let y = h.pivot_y + q.radial * er.1 + q.lateral * eu.1;
            let outward = q.lever * p.smooth_rate(t) > 0.0;
            let pol = if outward { Polarity::On } else { Polarity::Off };
            let x = x.round().clamp(0.0, (SENSOR_WIDTH - 1) as f64) as u16;
            let y = y.round().clamp(0.0, (SENSOR_HEIGHT - 1) as f64) as u16;
            scratch.push(Event {
                x,
                y,
                ts: ts as u32,
                pol,
            });
        }
        scratch.sort_by_key(|e| e.ts);
        events.extend_from_slice(&scratch);
        bin = bin_end;
    }
    events
}

/// Uniform salt-and-pepper noise: `count` events anywhere on the sensor
/// over `[t0, t1)`, sorted by timestamp.
pub fn salt_noise(t0: f64, t1: f64, count: usize, seed: u64) -> Vec<Event> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (start, end) = (seconds_to_us(t0), seconds_to_us(t1));
    if end <= start {
        return Vec::new();
    }
    let mut v: Vec<Event> = (0..count)
        .map(|_| Event {
            x: rng.random_range(0..SENSOR_WIDTH),
            y: rng.random_range(0..SENSOR_HEIGHT),
            ts: rng.random_range(start..end) as u32,
            pol: if rng.random::<bool>() {
                Polarity::On
            } else {
                Polarity::Off
            },
        })
        .collect();
    v.sort_by_key(|e| e.ts);
    v
}

/// Merges two time-sorted streams, tagging each event with its origin.
/// Ties keep signal events first.
pub fn merge_labeled(signal: &[Event], noise: &[Event]) -> Vec<(Event, EventSource)> {
    let mut out = Vec::with_capacity(signal.len() + noise.len());
    let (mut i, mut j) = (0, 0);
    while i < signal.len() || j < noise.len() {
        let take_signal = match (signal.get(i), noise.get(j)) {
            (Some(s), Some(n)) => s.ts <= n.ts,
            (Some(_), None) => true,
            _ => false,
        };
        if take_signal {
            out.push((signal[i], EventSource::Signal));
            i += 1;
        } else {
            out.push((noise[j], EventSource::Noise));
            j += 1;
        }
    }
    out
}

/// Splits a time-sorted stream into packets of `size` events; the last one
/// may be short. Sequence numbers count up from 0.
pub fn packetize(events: &[Event], size: usize) -> Vec<EventPacket> {
    events
        .chunks(size.max(1))
        .enumerate()
        .map(|(i, c)| EventPacket::new(i as u32, c.to_vec()))
        .collect()
}

/// Hand edge events over `[t0, t1)` grouped into 750-event packets.
pub fn generate_events(
    t0: f64,
    t1: f64,
    p: &StepperProfile,
    h: &HandModel,
    seed: u64,
) -> Vec<EventPacket> {
    packetize(&generate_signal_events(t0, t1, p, h, seed), PACKET_EVENTS)
}

/// Gyro on the hand, sampled at 200 Hz over `[t0, t1)`.
///
/// Each sample is the central difference of the stepped angle across one
/// sample period, so the microstep staircase shows up as ripple. Gaussian
/// noise of `noise_sigma` deg/s is added when positive.
pub fn sample_gyro_master(
    t0: f64,
    t1: f64,
    p: &StepperProfile,
    noise_sigma: f64,
    seed: u64,
) -> GyroTrace {
    let dt = 1.0 / GYRO_RATE_HZ;
    let n = ((t1 - t0) * GYRO_RATE_HZ + 1e-9).floor().max(0.0) as usize;
    let h = dt / 2.0;
    let mut samples: Vec<f64> = (0..n)
        .map(|i| {
            let t = t0 + i as f64 * dt;
            (stepper_angle(t + h, p) - stepper_angle(t - h, p)) / (2.0 * h)
        })
        .collect();
    add_noise(&mut samples, noise_sigma, seed);
    GyroTrace::new(seconds_to_us(t0), GYRO_RATE_HZ, samples)
}

pub(crate) fn add_noise(samples: &mut [f64], sigma: f64, seed: u64) {
    if sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, sigma).expect("finite sigma");
        for s in samples.iter_mut() {
            *s += normal.sample(&mut rng);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn defaults() -> (StepperProfile, HandModel) {
        (StepperProfile::default(), HandModel::default())
    }

    #[test]
    fn stepper_examples() {
        let p = StepperProfile::default();
        assert_eq!(stepper_angle(0.0, &p), 0.0);
        assert!((stepper_angle(0.5, &p) - 36.0).abs() < 1e-9);
        // 36 sin(0.1π) = 11.1246 -> 49 steps of 0.225
        assert!((stepper_angle(0.1, &p) - 11.025).abs() < 1e-9);
    }

    #[test]
    fn stepper_is_bounded_and_quantized() {
        let p = StepperProfile::default();
        for i in 0..4000 {
            let a = stepper_angle(i as f64 * 0.001, &p);
            assert!(a.abs() <= 36.0 + 1e-9);
            let k = a / p.step_size_deg;
            assert!((k - k.round()).abs() < 1e-6);
        }
    }

    #[test]
    fn profile_validation() {
        assert!(StepperProfile::default().validate().is_ok());
        let bad = StepperProfile {
            step_size_deg: 0.25,
            amplitude_deg: 36.1,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = StepperProfile {
            frequency_hz: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn pose_examples() {
        let (p, h) = defaults();
        let pose = hand_pose(0.0, &p, &h).unwrap();
        assert!((pose.center.0 - 120.0).abs() < 1e-9);
        assert!((pose.center.1 - 100.0).abs() < 1e-9);

        let pose = h.pose_at(36.0);
        assert!((pose.center.0 - 155.267).abs() < 1e-3);
        assert!((pose.center.1 - 111.459).abs() < 1e-3);

        let m = h.pose_at(-36.0);
        assert!((m.center.0 - (240.0 - pose.center.0)).abs() < 1e-9);
        assert!((m.center.1 - pose.center.1).abs() < 1e-9);
    }

    #[test]
    fn oversized_hand_is_rejected() {
        let (p, mut h) = defaults();
        h.arm_length_px = 150.0;
        assert!(matches!(hand_pose(0.0, &p, &h), Err(SceneError::Hand(_))));
        assert!(HandModel::default().validate(&p).is_ok());
    }

    #[test]
    fn stationary_hand_emits_nothing() {
        let (mut p, h) = defaults();
        p.frequency_hz = 1e-9;
        assert!(generate_events(0.0, 1.0, &p, &h, 3).is_empty());
    }

    #[test]
    fn generation_is_deterministic_and_in_bounds() {
        let (p, h) = defaults();
        let a = generate_events(0.0, 0.3, &p, &h, 11);
        let b = generate_events(0.0, 0.3, &p, &h, 11);
        let c = generate_events(0.0, 0.3, &p, &h, 12);
        assert_eq!(a, b);
        assert_ne!(a, c);
        let mut last = 0;
        for (i, pk) in a.iter().enumerate() {
            assert_eq!(pk.seq, i as u32);
            if i + 1 < a.len() {
                assert_eq!(pk.len(), PACKET_EVENTS);
            }
            for e in &pk.events {
                assert!(e.in_bounds());
                assert!(e.ts >= last);
                assert!(e.ts < 300_000);
                last = e.ts;
            }
        }
    }

    #[test]
    fn polarity_balance_over_a_period() {
        let (p, h) = defaults();
        let ev = generate_signal_events(0.0, 2.0, &p, &h, 5);
        let on = ev.iter().filter(|e| e.pol.is_on()).count() as f64;
        let off = ev.len() as f64 - on;
        assert!((on - off).abs() / off < 0.10, "on={on} off={off}");
    }

    #[test]
    fn events_hug_the_hand_edges() {
        let (p, h) = defaults();
        let ev = generate_signal_events(0.2, 0.21, &p, &h, 5);
        assert!(!ev.is_empty());
        for e in ev {
            let pose = h.pose_at(stepper_angle(e.ts as f64 * 1e-6, &p));
            let (er, eu) = axes(pose.angle_deg);
            let (dx, dy) = (e.x as f64 - pose.center.0, e.y as f64 - pose.center.1);
            let a = dx * er.0 + dy * er.1;
            let b = dx * eu.0 + dy * eu.1;
            assert!(a.abs() <= 20.0 + 1.0 && b.abs() <= 15.0 + 1.0);
            assert!(a.abs() >= 20.0 - 1.0 || b.abs() >= 15.0 - 1.0);
        }
    }

    #[test]
    fn master_gyro_examples() {
        let mut p = StepperProfile::default();
        let g = sample_gyro_master(0.0, 2.0, &p, 0.0, 0);
        assert_eq!(g.len(), 400);
        assert!(g.samples[100].abs() < 1.0, "peak sample {}", g.samples[100]);

        // a vanishing step size approximates the smooth sinusoid
        p.step_size_deg = 36.0 / 1e9;
        let g = sample_gyro_master(0.0, 2.0, &p, 0.0, 0);
        let expected = 36.0 * 2.0 * PI * 0.5;
        assert!((g.samples[0] - expected).abs() < 0.01);
        assert!((expected - 113.097).abs() < 1e-3);
    }

    #[test]
    fn master_gyro_noise_is_seeded() {
        let p = StepperProfile::default();
        let a = sample_gyro_master(0.0, 1.0, &p, 0.5, 9);
        let b = sample_gyro_master(0.0, 1.0, &p, 0.5, 9);
        let clean = sample_gyro_master(0.0, 1.0, &p, 0.0, 9);
        assert_eq!(a, b);
        let resid: Vec<f64> = a
            .samples
            .iter()
            .zip(&clean.samples)
            .map(|(x, y)| x - y)
            .collect();
        let sd = (resid.iter().map(|r| r * r).sum::<f64>() / resid.len() as f64).sqrt();
        assert!((sd - 0.5).abs() < 0.1, "sd {sd}");
    }

    #[test]
    fn merge_keeps_order_and_labels() {
        let s = vec![
            Event::new(1, 1, 10, Polarity::On).unwrap(),
            Event::new(1, 1, 30, Polarity::On).unwrap(),
        ];
        let n = vec![Event::new(2, 2, 20, Polarity::Off).unwrap()];
        let m = merge_labeled(&s, &n);
        let ts: Vec<u32> = m.iter().map(|(e, _)| e.ts).collect();
        assert_eq!(ts, vec![10, 20, 30]);
        assert_eq!(m[1].1, EventSource::Noise);
    }
}
