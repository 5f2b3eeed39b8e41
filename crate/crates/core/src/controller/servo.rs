use serde::{Deserialize, Serialize};

use crate::latency::{GyroTrace, GYRO_RATE_HZ};
use crate::scene::add_noise;

/// Servo control period, seconds.
pub const SERVO_TICK_S: f64 = 0.008;
const TICK_US: u64 = 8000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServoConfig {
    pub gain: f64,
    pub lookahead_s: f64,
    pub vel_limit_deg_s: f64,
    pub acc_limit_deg_s2: f64,
}

impl Default for ServoConfig {
    fn default() -> Self {
        ServoConfig {
            gain: 1000.0,
            lookahead_s: 0.08,
            vel_limit_deg_s: 180.0,
            acc_limit_deg_s2: 600.0,
        }
    }
}

impl ServoConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(100.0..=2000.0).contains(&self.gain) {
            return Err(format!("gain {} outside [100, 2000]", self.gain));
        }
        if !(0.03..=0.2).contains(&self.lookahead_s) {
            return Err(format!(
                "lookahead {} s outside [0.03, 0.2]",
                self.lookahead_s
            ));
        }
        if !(self.vel_limit_deg_s > 0.0 && self.vel_limit_deg_s <= 180.0) {
            return Err("vel_limit_deg_s must be in (0, 180]".into());
        }
        if !(self.acc_limit_deg_s2 > 0.0 && self.acc_limit_deg_s2.is_finite()) {
            return Err("acc_limit_deg_s2 must be positive".into());
        }
        Ok(())
    }
}

/// Elbow joint state. `t_us` is the time at which `q` holds; `qd` is the
/// velocity over the tick that ended there.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobotState {
    pub q: f64,
    pub qd: f64,
    pub reference: f64,
    pub t_us: u64,
}

impl RobotState {
    pub fn at_rest(q: f64, t_us: u64) -> Self {
        RobotState {
            q,
            qd: 0.0,
            reference: q,
            t_us,
        }
    }
}

/// One 8 ms servo tick toward `reference`.
///
/// The commanded position is `lookahead` seconds of first-order approach
/// toward the reference, scaled by `gain`. The resulting velocity is capped
/// by the velocity limit and by the fastest speed from which the joint can
/// still stop at the reference under the acceleration limit, then rate
/// limited against the previous velocity.
pub fn servo_step(state: &RobotState, reference: f64, cfg: &ServoConfig) -> RobotState {
    let tick = SERVO_TICK_S;
    let err = reference - state.q;
    let target = state.q + err * (tick / cfg.lookahead_s).min(1.0);
    let mut v = cfg.gain / 1000.0 * (target - state.q) / tick;

    let dv = cfg.acc_limit_deg_s2 * tick;
    // n ticks of decelerating by dv cover n(n+1)/2 * dv * tick degrees
    let n = (-1.0 + (1.0 + 8.0 * err.abs() / (dv * tick)).sqrt()) / 2.0;
    let cap = cfg.vel_limit_deg_s.min(n * dv);
    v = v.clamp(-cap, cap);
    v = state.qd + (v - state.qd).clamp(-dv, dv);
    v = v.clamp(-cfg.vel_limit_deg_s, cfg.vel_limit_deg_s);

    RobotState {
        q: state.q + v * tick,
        qd: v,
        reference,
        t_us: state.t_us + TICK_US,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlantModel {
    Servo,
    /// Joint lands on the reference within the tick.
    Instantaneous,
}

/// Simulated Elbow joint with its full state history.
#[derive(Debug, Clone)]
pub struct Plant {
    model: PlantModel,
    cfg: ServoConfig,
    history: Vec<RobotState>,
}

impl Plant {
    pub fn new(model: PlantModel, cfg: ServoConfig, q0: f64, t0_us: u64) -> Self {
        Plant {
            model,
            cfg,
            history: vec![RobotState::at_rest(q0, t0_us)],
        }
    }

    pub fn state(&self) -> &RobotState {
        self.history.last().expect("history starts non-empty")
    }

    pub fn history(&self) -> &[RobotState] {
        &self.history
    }

    /// Applies a reference received at `t_us`; the tick ends at
    /// `t_us + 8 ms`.
    pub fn apply(&mut self, reference: f64, t_us: u64) -> RobotState {
        let mut start = *self.state();
        start.t_us = t_us.max(start.t_us);
        let next = match self.model {
            PlantModel::Servo => servo_step(&start, reference, &self.cfg),
            PlantModel::Instantaneous => RobotState {
                q: reference,
                qd: (reference - start.q) / SERVO_TICK_S,
                reference,
                t_us: start.t_us + TICK_US,
            },
        };
        self.history.push(next);
        next
    }
}

/// Gyro on the robot end-effector, 200 Hz over `[t0, t1)` seconds.
///
/// Each tick's velocity is placed at the middle of the tick and linearly
/// interpolated onto the sample grid; before the first tick the joint is at
/// rest. Gaussian noise of `noise_sigma` is added when positive.
pub fn sample_gyro_slave(
    history: &[RobotState],
    t0: f64,
    t1: f64,
    noise_sigma: f64,
    seed: u64,
) -> GyroTrace {
    let points: Vec<(f64, f64)> = history
        .windows(2)
        .map(|w| {
            let mid = w[1].t_us.saturating_sub(TICK_US / 2).max(w[0].t_us);
            (mid as f64 * 1e-6, w[1].qd)
        })
        .collect();
    let dt = 1.0 / GYRO_RATE_HZ;
    let n = ((t1 - t0) * GYRO_RATE_HZ + 1e-9).floor().max(0.0) as usize;
    let mut samples = Vec::with_capacity(n);
    let mut j = 0;
    for i in 0..n {
        let t = t0 + i as f64 * dt;
        while j + 1 < points.len() && points[j + 1].0 <= t {
            j += 1;
        }
        let v = match (points.get(j), points.get(j + 1)) {
            (None, _) => 0.0,
            (Some(&(ta, _)), _) if t < ta => 0.0,
            (Some(&(_, va)), None) => va,
            (Some(&(ta, va)), Some(&(tb, vb))) => va + (vb - va) * (t - ta) / (tb - ta),
        };
        samples.push(v);
    }
    add_noise(&mut samples, noise_sigma, seed);
    GyroTrace::new((t0 * 1e6).round().max(0.0) as u64, GYRO_RATE_HZ, samples)
}
