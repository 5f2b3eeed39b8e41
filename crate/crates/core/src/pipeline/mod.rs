//! Client-side vision stage: correlation noise filter, edge-activity ROI,
//! and the three-tap center smoother.

mod filter;
mod roi;
mod smoother;

pub use filter::{filter_noise, FilterState};
pub use roi::{compute_roi, BBox, EventWindow, RoiConfig, RoiEstimate};
pub use smoother::{smooth_center, SmootherState};

use serde::{Deserialize, Serialize};

use crate::event::EventPacket;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub correlation_window_us: u32,
    pub roi: RoiConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            correlation_window_us: 2000,
            roi: RoiConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.correlation_window_us == 0 {
            return Err("correlation_window_us must be positive".into());
        }
        if self.roi.window_us == 0 || self.roi.max_events == 0 {
            return Err("window_us and max_events must be positive".into());
        }
        if !(self.roi.activity_factor > 0.0 && self.roi.activity_factor.is_finite()) {
            return Err("activity_factor must be positive".into());
        }
        Ok(())
    }
}

/// What the client produced for one received packet.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientOutput {
    pub roi: Option<RoiEstimate>,
    pub smoothed: Option<(f64, f64)>,
}

/// ROI extraction and smoothing over a stream of already-filtered packets,
/// updated once per packet.
#[derive(Debug, Clone)]
pub struct RoiTracker {
    cfg: RoiConfig,
    window: EventWindow,
    smoother: SmootherState,
}

impl RoiTracker {
    pub fn new(cfg: RoiConfig) -> Self {
        RoiTracker {
            cfg,
            window: EventWindow::new(&cfg),
            smoother: SmootherState::new(),
        }
    }

    pub fn process(&mut self, filtered: &EventPacket) -> ClientOutput {
        self.window.push(&filtered.events);
        let roi = compute_roi(self.window.as_slice(), &self.cfg);
        let smoothed = roi.map(|r| self.smoother.smooth(r.center));
        ClientOutput { roi, smoothed }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{self, HandModel, StepperProfile};
    use std::time::Instant;

    #[test]
    fn tracker_follows_the_hand() {
        let (p, h) = (StepperProfile::default(), HandModel::default());
        let packets = scene::generate_events(0.0, 0.5, &p, &h, 4);
        let mut filter = FilterState::new(2000);
        let mut tracker = RoiTracker::new(RoiConfig::default());
        let mut errs = Vec::new();
        for pk in &packets {
            let f = filter_noise(pk, &mut filter);
            let out = tracker.process(&f);
            if let (Some(c), Some(ts)) = (out.smoothed, f.last_ts()) {
                let truth = h.pose_at(scene::stepper_angle(ts as f64 * 1e-6, &p)).center;
                errs.push(((c.0 - truth.0).powi(2) + (c.1 - truth.1).powi(2)).sqrt());
            }
        }
        assert!(!errs.is_empty());
        let rms = (errs.iter().map(|e| e * e).sum::<f64>() / errs.len() as f64).sqrt();
        assert!(rms < 10.0, "rms {rms}");
    }

    #[test]
    fn packet_processing_is_fast() {
        let (p, h) = (StepperProfile::default(), HandModel::default());
        let packets = scene::generate_events(0.0, 0.3, &p, &h, 4);
        let mut filter = FilterState::new(2000);
        let mut tracker = RoiTracker::new(RoiConfig::default());
        let start = Instant::now();
        for pk in &packets {
            tracker.process(&filter_noise(pk, &mut filter));
        }
        let per_packet = start.elapsed().as_secs_f64() / packets.len() as f64;
        assert!(per_packet < 9e-3, "{per_packet} s per packet");
    }
}
