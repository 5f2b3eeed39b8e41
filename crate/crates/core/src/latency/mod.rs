//! Stage-boundary timestamps, gyro cross-correlation delay estimation, and
//! the latency decomposition report.

mod report;
mod trace;
mod xcorr;

pub use report::{
    build_report, publish_jitter, record_stage, JitterStats, LatencyReport, Stage, StageStamp,
    StageStats, StampLog,
};
pub use trace::{GyroTrace, TraceError, GYRO_RATE_HZ};
pub use xcorr::{estimate_delay, estimate_delay_with, DelayError, DelayEstimate, DelayOptions};
