//! End-to-end scenario runs.
//!
//! Both execution modes share the stage logic below: the camera filters and
//! frames each packet, the client tracks the ROI, the server maps it to an
//! Elbow reference, and the publisher feeds the plant every 8 ms. Virtual
//! time drives them from a discrete-event queue with in-process links; real
//! time runs them on threads connected by loopback UDP sockets.

mod real_time;
mod virtual_time;

use std::fmt::Write as _;
use std::io;
use std::path::Path;

use thiserror::Error;

use crate::config::{ConfigError, Mode, ScenarioConfig};
use crate::controller::{
    map_center_to_angle, sample_gyro_slave, ElbowMapConfig, RobotState, PUBLISH_PERIOD_US,
};
use crate::event::EventPacket;
use crate::evt_file::{write_event_file, EventFileError};
use crate::latency::{
    build_report, publish_jitter, DelayError, GyroTrace, LatencyReport, Stage, StampLog,
};
use crate::pipeline::{filter_noise, ClientOutput, FilterState, RoiTracker};
use crate::scene::{self, HandModel, StepperProfile, PACKET_EVENTS};
use crate::wire::{
    frame_events, frame_roi, parse_events, parse_roi, EndpointError, RoiMessage, WireError,
};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Delay(#[from] DelayError),
    #[error(transparent)]
    Endpoint(#[from] EndpointError),
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error(transparent)]
    EventFile(#[from] EventFileError),
    #[error("I/O error on {path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("{0}")]
    Runtime(String),
}

impl RunError {
    pub fn is_validation(&self) -> bool {
        matches!(self, RunError::Config(ConfigError::Invalid { .. }))
    }
}

/// Deterministic sub-seeds for the independent random streams of a run.
pub(crate) fn subseed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const SIGNAL_STREAM: u64 = 0;
const NOISE_STREAM: u64 = 1;
const MASTER_GYRO_STREAM: u64 = 2;
const SLAVE_GYRO_STREAM: u64 = 3;

/// Camera output for a scenario: hand edge events plus salt noise, in
/// 750-event packets.
pub fn scene_packets(cfg: &ScenarioConfig) -> Vec<EventPacket> {
    let signal = scene::generate_signal_events(
        0.0,
        cfg.duration_s,
        &cfg.stepper,
        &cfg.hand,
        subseed(cfg.seed, SIGNAL_STREAM),
    );
    let n_noise = (signal.len() as f64 * cfg.noise.salt_fraction).round() as usize;
    let noise = scene::salt_noise(
        0.0,
        cfg.duration_s,
        n_noise,
        subseed(cfg.seed, NOISE_STREAM),
    );
    let merged: Vec<_> = scene::merge_labeled(&signal, &noise)
        .into_iter()
        .map(|(e, _)| e)
        .collect();
    scene::packetize(&merged, PACKET_EVENTS)
}

/// Camera side: noise filter, then framing for the first link.
#[derive(Debug, Clone, Default)]
pub(crate) struct Camera {
    filter: FilterState,
}

impl Camera {
    pub(crate) fn new(correlation_window_us: u32) -> Self {
        Camera {
            filter: FilterState::new(correlation_window_us),
        }
    }

    pub(crate) fn capture(&mut self, packet: &EventPacket) -> Result<Vec<u8>, WireError> {
        frame_events(&filter_noise(packet, &mut self.filter))
    }
}

/// Client side: ROI tracking over received event datagrams.
#[derive(Debug, Clone)]
pub(crate) struct Client {
    tracker: RoiTracker,
}

impl Client {
    pub(crate) fn new(cfg: &ScenarioConfig) -> Self {
        Client {
            tracker: RoiTracker::new(cfg.pipeline.roi),
        }
    }

    pub(crate) fn receive(&mut self, bytes: &[u8]) -> Result<(u32, ClientOutput), WireError> {
        let packet = parse_events(bytes)?;
        Ok((packet.seq, self.tracker.process(&packet)))
    }
}

pub(crate) fn roi_datagram(
    seq: u32,
    ts_us: u64,
    center: (f64, f64),
) -> Result<[u8; 20], WireError> {
    frame_roi(&RoiMessage {
        seq,
        ts: ts_us,
        cx: center.0 as f32,
        cy: center.1 as f32,
    })
}

/// Server side: ROI datagram to Elbow reference.
pub(crate) fn server_receive(bytes: &[u8], map: &ElbowMapConfig) -> Result<(u32, f64), WireError> {
    let msg = parse_roi(bytes)?;
    Ok((
        msg.seq,
        map_center_to_angle((msg.cx as f64, msg.cy as f64), map),
    ))
}

/// One client ROI result, for the `roi.csv` artifact.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoiRow {
    pub seq: u32,
    /// Timestamp of the packet's newest event.
    pub ts_us: u64,
    pub center: (f64, f64),
    pub smoothed: (f64, f64),
}

pub(crate) fn roi_row(seq: u32, packet_ts: u64, out: &ClientOutput) -> Option<RoiRow> {
    match (out.roi, out.smoothed) {
        (Some(r), Some(s)) => Some(RoiRow {
            seq,
            ts_us: packet_ts,
            center: r.center,
            smoothed: s,
        }),
        _ => None,
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: LatencyReport,
    pub roi_rows: Vec<RoiRow>,
    pub plant_history: Vec<RobotState>,
    pub master: GyroTrace,
    pub slave: GyroTrace,
    pub publish_times_us: Vec<u64>,
    pub packets: usize,
}

/// Elbow angle the hand's true center maps to at `t_us`, and the direction
/// in which that angle is moving (+1, -1, or 0 at rest).
fn true_target(t_us: u64, p: &StepperProfile, h: &HandModel, map: &ElbowMapConfig) -> (f64, f64) {
    let t = t_us as f64 * 1e-6;
    let center = h.pose_at(scene::stepper_angle(t, p)).center;
    let target = map_center_to_angle(center, map);
    let rate = p.smooth_rate(t) * map.sign as f64;
    let dir = if rate > 0.0 {
        1.0
    } else if rate < 0.0 {
        -1.0
    } else {
        0.0
    };
    (target, dir)
}

fn q_at(history: &[RobotState], t_us: f64) -> f64 {
    let i = history.partition_point(|s| (s.t_us as f64) < t_us);
    match (i.checked_sub(1).map(|j| &history[j]), history.get(i)) {
        (Some(a), Some(b)) if b.t_us > a.t_us => {
            a.q + (b.q - a.q) * (t_us - a.t_us as f64) / (b.t_us - a.t_us) as f64
        }
        (_, Some(b)) => b.q,
        (Some(a), None) => a.q,
        (None, None) => 0.0,
    }
}

/// Horizon after which an item that never reached its target is dropped.
const CROSSING_HORIZON_US: u64 = 1_000_000;

/// First time after `from_us` at which the joint reaches `target` moving in
/// direction `dir`, linearly interpolated between ticks. `None` if the joint
/// is already past the target, turns back after approaching it, or does not
/// get there within the horizon.
pub fn crossing_time(history: &[RobotState], from_us: u64, target: f64, dir: f64) -> Option<u64> {
    if dir == 0.0 {
        return None;
    }
    let mut prev = (from_us as f64, q_at(history, from_us as f64));
    if (prev.1 - target) * dir >= 0.0 {
        return None;
    }
    let start = history.partition_point(|s| s.t_us <= from_us);
    let mut approached = false;
    for s in &history[start..] {
        if s.t_us > from_us + CROSSING_HORIZON_US {
            break;
        }
        let step = (s.q - prev.1) * dir;
        if step < 0.0 && approached {
            return None;
        }
        approached |= step > 0.0;
        if (s.q - target) * dir >= 0.0 {
            let frac = (target - prev.1) / (s.q - prev.1);
            let t = prev.0 + frac * (s.t_us as f64 - prev.0);
            return Some(t.round() as u64);
        }
        prev = (s.t_us as f64, s.q);
    }
    None
}

/// Stamps `plant_applied` for every item whose command was published, then
/// assembles gyro traces and the report.
pub(crate) fn finalize(
    cfg: &ScenarioConfig,
    log: &StampLog,
    plant_history: Vec<RobotState>,
    publish_times_us: Vec<u64>,
    roi_rows: Vec<RoiRow>,
    packets: usize,
    estimate: bool,
) -> Result<RunOutput, RunError> {
    let stamps = log.snapshot();
    let mut generated = None;
    for s in &stamps {
        match s.stage {
            Stage::Generated => generated = Some((s.item_id, s.ts_us)),
            Stage::CommandPublished => {
                if let Some((id, gen)) = generated.filter(|(id, _)| *id == s.item_id) {
                    let (target, dir) = true_target(gen, &cfg.stepper, &cfg.hand, &cfg.elbow_map);
                    if let Some(t) = crossing_time(&plant_history, s.ts_us, target, dir) {
                        log.record(id, Stage::PlantApplied, t);
                    }
                }
            }
            _ => {}
        }
    }

    let master = scene::sample_gyro_master(
        0.0,
        cfg.duration_s,
        &cfg.stepper,
        cfg.noise.gyro_sigma,
        subseed(cfg.seed, MASTER_GYRO_STREAM),
    );
    let mut slave = sample_gyro_slave(
        &plant_history,
        0.0,
        cfg.duration_s,
        cfg.noise.gyro_sigma,
        subseed(cfg.seed, SLAVE_GYRO_STREAM),
    );
    // the arm gyro is mounted so that it turns with the hand
    if cfg.elbow_map.sign < 0 {
        slave.samples.iter_mut().for_each(|v| *v = -*v);
    }

    let gyro = estimate.then_some((&master, &slave));
    let mut report = build_report(&log.snapshot(), gyro)?;
    report.publish_jitter = publish_jitter(&publish_times_us, PUBLISH_PERIOD_US);
    Ok(RunOutput {
        report,
        roi_rows,
        plant_history,
        master,
        slave,
        publish_times_us,
        packets,
    })
}

/// Runs a scenario in the configured mode.
pub fn run_e2e(cfg: &ScenarioConfig) -> Result<RunOutput, RunError> {
    cfg.validate()?;
    let packets = scene_packets(cfg);
    match cfg.mode {
        Mode::VirtualTime => virtual_time::run(cfg, &packets, cfg.estimate_delay),
        Mode::RealTime => real_time::run(cfg, &packets, cfg.estimate_delay),
    }
}

/// Runs the downstream pipeline on recorded packets in virtual time. No
/// delay estimate is made: the recording carries no gyro data.
pub fn replay(cfg: &ScenarioConfig, packets: &[EventPacket]) -> Result<RunOutput, RunError> {
    let cfg = ScenarioConfig {
        estimate_delay: false,
        ..cfg.clone()
    };
    cfg.validate()?;
    virtual_time::run(&cfg, packets, false)
}

/// Writes the scenario's camera packets to an event file; returns the
/// packet count.
pub fn gen_events(cfg: &ScenarioConfig, path: &Path) -> Result<usize, RunError> {
    let cfg = ScenarioConfig {
        estimate_delay: false,
        ..cfg.clone()
    };
    cfg.validate()?;
    let packets = scene_packets(&cfg);
    write_event_file(path, &packets)?;
    Ok(packets.len())
}

impl RunOutput {
    pub fn roi_csv(&self) -> String {
        let mut out = String::from("seq,ts_us,cx,cy,smoothed_cx,smoothed_cy\n");
        for r in &self.roi_rows {
            let _ = writeln!(
                out,
                "{},{},{:.6},{:.6},{:.6},{:.6}",
                r.seq, r.ts_us, r.center.0, r.center.1, r.smoothed.0, r.smoothed.1
            );
        }
        out
    }

    pub fn joints_csv(&self) -> String {
        let mut out = String::from("t_us,q_ref,q,qd\n");
        for s in &self.plant_history {
            let _ = writeln!(out, "{},{:.6},{:.6},{:.6}", s.t_us, s.reference, s.q, s.qd);
        }
        out
    }

    /// File name and contents of every artifact.
    pub fn artifacts(&self) -> Vec<(&'static str, String)> {
        let gyro = |g: &GyroTrace| {
            let mut buf = Vec::new();
            g.write_csv(&mut buf).expect("writing to memory");
            String::from_utf8(buf).expect("ASCII CSV")
        };
        vec![
            ("report.txt", self.report.render_text()),
            ("report.csv", self.report.render_csv()),
            ("roi.csv", self.roi_csv()),
            ("joints.csv", self.joints_csv()),
            ("gyro_master.csv", gyro(&self.master)),
            ("gyro_slave.csv", gyro(&self.slave)),
        ]
    }

    pub fn write_artifacts(&self, dir: &Path) -> Result<(), RunError> {
        let io_err = |path: &Path| {
            let path = path.display().to_string();
            move |source| RunError::Io { path, source }
        };
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        for (name, body) in self.artifacts() {
            let path = dir.join(name);
            std::fs::write(&path, body).map_err(io_err(&path))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(q0: f64, slope_per_tick: f64, n: u64) -> Vec<RobotState> {
        (0..n)
            .map(|k| RobotState {
                q: q0 + slope_per_tick * k as f64,
                qd: slope_per_tick / 0.008,
                reference: 0.0,
                t_us: k * 8000,
            })
            .collect()
    }

    #[test]
    fn crossing_is_interpolated() {
        let h = ramp(0.0, 1.0, 20);
        assert_eq!(crossing_time(&h, 0, 2.5, 1.0), Some(20_000));
        assert_eq!(crossing_time(&h, 4000, 2.5, 1.0), Some(20_000));
    }

    #[test]
    fn already_past_is_dropped() {
        let h = ramp(0.0, 1.0, 20);
        assert_eq!(crossing_time(&h, 24_000, 2.5, 1.0), None);
        assert_eq!(crossing_time(&h, 0, -1.0, -1.0), None);
    }

    #[test]
    fn reversal_before_the_target_is_dropped() {
        let mut h = ramp(0.0, 1.0, 5);
        h.extend((5..20).map(|k| RobotState {
            q: 4.0 - (k - 4) as f64,
            qd: 0.0,
            reference: 0.0,
            t_us: k * 8000,
        }));
        assert_eq!(crossing_time(&h, 0, 10.0, 1.0), None);
    }

    #[test]
    fn horizon_limits_the_search() {
        let h = ramp(0.0, 0.001, 400);
        assert_eq!(crossing_time(&h, 0, 0.39, 1.0), None);
        assert!(crossing_time(&h, 0, 0.1, 1.0).is_some());
    }

    #[test]
    fn subseeds_differ() {
        let s: Vec<u64> = (0..4).map(|k| subseed(1, k)).collect();
        for i in 0..4 {
            for j in i + 1..4 {
                assert_ne!(s[i], s[j]);
            }
        }
        assert_eq!(subseed(9, 2), subseed(9, 2));
    }
}
