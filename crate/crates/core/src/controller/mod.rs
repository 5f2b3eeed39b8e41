//! Server side and simulated robot: ROI center to Elbow reference, the
//! fixed-rate joint reference publisher, and the Elbow servo model.

mod publish;
mod servo;

pub use publish::{
    publish_realtime, publish_virtual, virtual_emission_count, Emission, ReferenceCell,
    PUBLISH_PERIOD_US,
};
pub use servo::{
    sample_gyro_slave, servo_step, Plant, PlantModel, RobotState, ServoConfig, SERVO_TICK_S,
};

use serde::{Deserialize, Serialize};

use crate::event::{SENSOR_HEIGHT, SENSOR_WIDTH};

/// Image-to-joint mapping plus the constant angles of the five joints that
/// do not move.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ElbowMapConfig {
    pub pivot_x: f64,
    pub pivot_y: f64,
    pub nominal_elbow_deg: f64,
    pub sign: i8,
    pub clamp_deg: f64,
    pub base_deg: f64,
    pub shoulder_deg: f64,
    pub wrist1_deg: f64,
    pub wrist2_deg: f64,
    pub wrist3_deg: f64,
}

impl Default for ElbowMapConfig {
    fn default() -> Self {
        ElbowMapConfig {
            pivot_x: 120.0,
            pivot_y: 160.0,
            nominal_elbow_deg: 0.0,
            sign: 1,
            clamp_deg: 36.0,
            base_deg: 0.0,
            shoulder_deg: -90.0,
            wrist1_deg: -90.0,
            wrist2_deg: 0.0,
            wrist3_deg: 0.0,
        }
    }
}

impl ElbowMapConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.clamp_deg > 0.0 && self.clamp_deg.is_finite()) {
            return Err("clamp_deg must be positive".into());
        }
        if self.sign != 1 && self.sign != -1 {
            return Err("sign must be +1 or -1".into());
        }
        let in_x = (0.0..=SENSOR_WIDTH as f64).contains(&self.pivot_x);
        let in_y = (0.0..=SENSOR_HEIGHT as f64).contains(&self.pivot_y);
        if !(in_x && in_y) {
            return Err("pivot must lie inside the sensor frame".into());
        }
        Ok(())
    }
}

/// Elbow reference for an ROI center: the signed angle between the
/// pivot-to-center direction and the upward vertical, clamped, around the
/// nominal Elbow angle. A center exactly on the pivot maps to nominal.
pub fn map_center_to_angle(center: (f64, f64), cfg: &ElbowMapConfig) -> f64 {
    let dx = center.0 - cfg.pivot_x;
    let dy = cfg.pivot_y - center.1;
    if dx == 0.0 && dy == 0.0 {
        return cfg.nominal_elbow_deg;
    }
    let image_angle = dx.atan2(dy).to_degrees();
    cfg.nominal_elbow_deg + cfg.sign as f64 * image_angle.clamp(-cfg.clamp_deg, cfg.clamp_deg)
}

/// Base, Shoulder, Elbow, Wrist 1, Wrist 2, Wrist 3, degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointVector(pub [f64; 6]);

pub const ELBOW: usize = 2;

impl JointVector {
    pub fn with_elbow(cfg: &ElbowMapConfig, elbow_deg: f64) -> Self {
        JointVector([
            cfg.base_deg,
            cfg.shoulder_deg,
            elbow_deg,
            cfg.wrist1_deg,
            cfg.wrist2_deg,
            cfg.wrist3_deg,
        ])
    }

    pub fn elbow(&self) -> f64 {
        self.0[ELBOW]
    }
}
