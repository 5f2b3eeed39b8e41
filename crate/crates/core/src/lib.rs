//! Software model of an event-camera to robot-arm actuation chain: a
//! synthetic hand-waving scene, the DVS event stream it produces, the vision
//! pipeline that turns events into an Elbow joint reference, the UDP links in
//! between, a simulated servo, and latency instrumentation.

pub mod config;
pub mod controller;
pub mod event;
pub mod evt_file;
pub mod latency;
pub mod pipeline;
pub mod run;
pub mod scene;
pub mod wire;
