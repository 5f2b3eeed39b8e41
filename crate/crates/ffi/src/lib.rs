//! C ABI over the `dvsbot` codecs, client vision stage, servo model and
//! delay estimator.
//!
//! Every fallible function returns a [`DvsStatus`]. On failure a message is
//! kept per thread and can be read with [`dvs_last_error`]. Handles are
//! opaque and must be released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use dvsbot::controller::{
    map_center_to_angle, servo_step, ElbowMapConfig, RobotState, ServoConfig,
};
use dvsbot::event::{decode_event, encode_event, Event, EventPacket, Polarity, EVENT_BYTES};
use dvsbot::latency::{estimate_delay, DelayError, GyroTrace};
use dvsbot::pipeline::{filter_noise, FilterState, PipelineConfig, RoiTracker};
use dvsbot::wire::{
    frame_events, frame_roi, parse_events, parse_roi, RoiMessage, EVENT_HEADER_BYTES,
    MAX_EVENTS_PER_DATAGRAM, ROI_DATAGRAM_BYTES,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DvsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Malformed = 3,
    BufferTooSmall = 4,
    UndefinedDelay = 5,
    InsufficientData = 6,
    Panic = 7,
}

/// One event. `polarity` is 1 for ON, 0 for OFF.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DvsEvent {
    pub x: u16,
    pub y: u16,
    pub ts: u32,
    pub polarity: u8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DvsRoi {
    pub seq: u32,
    pub ts: u64,
    pub cx: f32,
    pub cy: f32,
}

/// Client-side vision state: noise filter, ROI window and smoother.
pub struct DvsTracker {
    filter: FilterState,
    tracker: RoiTracker,
}

/// Elbow servo model with its current state.
pub struct DvsServo {
    cfg: ServoConfig,
    state: RobotState,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn fail(status: DvsStatus, msg: impl Into<String>) -> DvsStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> DvsStatus) -> DvsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(DvsStatus::Panic, "internal panic"),
    }
}

fn to_event(e: &DvsEvent) -> Result<Event, DvsStatus> {
    let pol = match e.polarity {
        0 => Polarity::Off,
        1 => Polarity::On,
        p => {
            return Err(fail(
                DvsStatus::InvalidArgument,
                format!("polarity must be 0 or 1, got {p}"),
            ))
        }
    };
    Event::new(e.x, e.y, e.ts, pol).map_err(|err| fail(DvsStatus::InvalidArgument, err.to_string()))
}

fn from_event(e: &Event) -> DvsEvent {
    DvsEvent {
        x: e.x,
        y: e.y,
        ts: e.ts,
        polarity: u8::from(e.pol.is_on()),
    }
}

macro_rules! non_null {
    ($($p:ident),+) => {
        $(if $p.is_null() {
            return fail(DvsStatus::NullPointer, concat!(stringify!($p), " is null"));
        })+
    };
}

macro_rules! try_status {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(s) => return s,
        }
    };
}

/// Message for the last failure on this thread, or null. Valid until the
/// next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn dvs_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn dvs_version() -> *const c_char {
    const V: &CStr =
        match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
            Ok(v) => v,
            Err(_) => c"",
        };
    V.as_ptr()
}

/// Encodes one event into exactly 8 bytes at `out`.
///
/// # Safety
/// `event` must be valid for reads and `out` valid for 8 bytes of writes.
#[no_mangle]
pub unsafe extern "C" fn dvs_encode_event(event: *const DvsEvent, out: *mut u8) -> DvsStatus {
    guard(|| {
        non_null!(event, out);
        let e = try_status!(to_event(&*event));
        let bytes = try_status!(
            encode_event(&e).map_err(|err| fail(DvsStatus::InvalidArgument, err.to_string()))
        );
        std::ptr::copy_nonoverlapping(bytes.as_ptr(), out, EVENT_BYTES);
        DvsStatus::Ok
    })
}

/// Decodes 8 bytes at `bytes` into `out`.
///
/// # Safety
/// `bytes` must be valid for 8 bytes of reads and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dvs_decode_event(bytes: *const u8, out: *mut DvsEvent) -> DvsStatus {
    guard(|| {
        non_null!(bytes, out);
        let word: [u8; EVENT_BYTES] = std::slice::from_raw_parts(bytes, EVENT_BYTES)
            .try_into()
            .expect("eight bytes");
        match decode_event(&word) {
            Ok(e) => {
                *out = from_event(&e);
                DvsStatus::Ok
            }
            Err(err) => fail(DvsStatus::Malformed, err.to_string()),
        }
    })
}

/// Frames `count` events as an event datagram into `out`. The datagram size
/// is written to `out_len`; if `out_cap` is too small nothing else is written
/// and `DVS_STATUS_BUFFER_TOO_SMALL` is returned.
///
/// # Safety
/// `events` must be valid for `count` reads (may be null when `count` is 0),
/// `out` valid for `out_cap` bytes of writes and `out_len` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dvs_frame_events(
    seq: u32,
    events: *const DvsEvent,
    count: usize,
    out: *mut u8,
    out_cap: usize,
    out_len: *mut usize,
) -> DvsStatus {
    guard(|| {
        non_null!(out, out_len);
        if count > 0 {
            non_null!(events);
        }
        if count > MAX_EVENTS_PER_DATAGRAM {
            return fail(
                DvsStatus::InvalidArgument,
                format!("{count} events exceed one datagram"),
            );
        }
        let need = EVENT_HEADER_BYTES + count * EVENT_BYTES;
        *out_len = need;
        if out_cap < need {
            return fail(
                DvsStatus::BufferTooSmall,
                format!("need {need} bytes, got {out_cap}"),
            );
        }
        let src = if count == 0 {
            &[][..]
        } else {
            std::slice::from_raw_parts(events, count)
        };
        let evs = try_status!(src.iter().map(to_event).collect::<Result<Vec<_>, _>>());
        let bytes = try_status!(frame_events(&EventPacket::new(seq, evs))
            .map_err(|err| fail(DvsStatus::InvalidArgument, err.to_string())));
        std::ptr::copy_nonoverlapping(bytes.as_ptr(), out, bytes.len());
        DvsStatus::Ok
    })
}

/// Parses an event datagram. The event count is written to `out_count`; if
/// it exceeds `cap` nothing else is written and
/// `DVS_STATUS_BUFFER_TOO_SMALL` is returned.
///
/// # Safety
/// `bytes` must be valid for `len` reads, `events` valid for `cap` writes
/// (may be null when `cap` is 0), `out_seq` and `out_count` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dvs_parse_events(
    bytes: *const u8,
    len: usize,
    out_seq: *mut u32,
    events: *mut DvsEvent,
    cap: usize,
    out_count: *mut usize,
) -> DvsStatus {
    guard(|| {
        non_null!(bytes, out_seq, out_count);
        let p = try_status!(parse_events(std::slice::from_raw_parts(bytes, len))
            .map_err(|err| fail(DvsStatus::Malformed, err.to_string())));
        *out_count = p.len();
        if p.len() > cap {
            return fail(
                DvsStatus::BufferTooSmall,
                format!("need room for {} events, got {cap}", p.len()),
            );
        }
        if !p.is_empty() {
            non_null!(events);
            let dst = std::slice::from_raw_parts_mut(events, p.len());
            for (d, e) in dst.iter_mut().zip(&p.events) {
                *d = from_event(e);
            }
        }
        *out_seq = p.seq;
        DvsStatus::Ok
    })
}

/// Frames a ROI message into 20 bytes at `out`.
///
/// # Safety
/// `roi` must be valid for reads and `out` valid for 20 bytes of writes.
#[no_mangle]
pub unsafe extern "C" fn dvs_frame_roi(roi: *const DvsRoi, out: *mut u8) -> DvsStatus {
    guard(|| {
        non_null!(roi, out);
        let r = &*roi;
        let msg = RoiMessage {
            seq: r.seq,
            ts: r.ts,
            cx: r.cx,
            cy: r.cy,
        };
        let bytes = try_status!(
            frame_roi(&msg).map_err(|err| fail(DvsStatus::InvalidArgument, err.to_string()))
        );
        std::ptr::copy_nonoverlapping(bytes.as_ptr(), out, ROI_DATAGRAM_BYTES);
        DvsStatus::Ok
    })
}

/// Parses a ROI datagram of `len` bytes.
///
/// # Safety
/// `bytes` must be valid for `len` reads and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dvs_parse_roi(
    bytes: *const u8,
    len: usize,
    out: *mut DvsRoi,
) -> DvsStatus {
    guard(|| {
        non_null!(bytes, out);
        let m = try_status!(parse_roi(std::slice::from_raw_parts(bytes, len))
            .map_err(|err| fail(DvsStatus::Malformed, err.to_string())));
        *out = DvsRoi {
            seq: m.seq,
            ts: m.ts,
            cx: m.cx,
            cy: m.cy,
        };
        DvsStatus::Ok
    })
}

/// Delay of `slave` behind `master` in milliseconds. Both traces are
/// uniformly sampled at `rate_hz` starting at their own `t0_us`.
///
/// # Safety
/// `master` and `slave` must be valid for `master_len` and `slave_len`
/// reads, `out_ms` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dvs_estimate_delay(
    master: *const f64,
    master_len: usize,
    master_t0_us: u64,
    slave: *const f64,
    slave_len: usize,
    slave_t0_us: u64,
    rate_hz: f64,
    out_ms: *mut f64,
) -> DvsStatus {
    guard(|| {
        non_null!(master, slave, out_ms);
        if !(rate_hz > 0.0 && rate_hz.is_finite()) {
            return fail(DvsStatus::InvalidArgument, "rate_hz must be positive");
        }
        let m = GyroTrace::new(
            master_t0_us,
            rate_hz,
            std::slice::from_raw_parts(master, master_len).to_vec(),
        );
        let s = GyroTrace::new(
            slave_t0_us,
            rate_hz,
            std::slice::from_raw_parts(slave, slave_len).to_vec(),
        );
        match estimate_delay(&m, &s) {
            Ok(d) => {
                *out_ms = d;
                DvsStatus::Ok
            }
            Err(e @ DelayError::UndefinedDelay(_)) => {
                fail(DvsStatus::UndefinedDelay, e.to_string())
            }
            Err(e @ DelayError::InsufficientData { .. }) => {
                fail(DvsStatus::InsufficientData, e.to_string())
            }
            Err(e) => fail(DvsStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Elbow angle in degrees for a ROI center, with the default image-to-joint
/// map.
///
/// # Safety
/// `out_deg` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dvs_map_center_to_angle(cx: f64, cy: f64, out_deg: *mut f64) -> DvsStatus {
    guard(|| {
        non_null!(out_deg);
        if !(cx.is_finite() && cy.is_finite()) {
            return fail(DvsStatus::InvalidArgument, "center must be finite");
        }
        *out_deg = map_center_to_angle((cx, cy), &ElbowMapConfig::default());
        DvsStatus::Ok
    })
}

/// New client vision state with default parameters.
#[no_mangle]
pub extern "C" fn dvs_tracker_new() -> *mut DvsTracker {
    let cfg = PipelineConfig::default();
    Box::into_raw(Box::new(DvsTracker {
        filter: FilterState::new(cfg.correlation_window_us),
        tracker: RoiTracker::new(cfg.roi),
    }))
}

/// Feeds one packet of raw (unfiltered) events. `has_roi` is set to 1 and
/// `cx`, `cy` to the smoothed ROI center when a ROI was found, else 0.
///
/// # Safety
/// `tracker` must come from [`dvs_tracker_new`] and not be freed; `events`
/// valid for `count` reads (may be null when `count` is 0); the outputs
/// valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dvs_tracker_process(
    tracker: *mut DvsTracker,
    seq: u32,
    events: *const DvsEvent,
    count: usize,
    has_roi: *mut u8,
    cx: *mut f64,
    cy: *mut f64,
) -> DvsStatus {
    guard(|| {
        non_null!(tracker, has_roi, cx, cy);
        if count > 0 {
            non_null!(events);
        }
        let t = &mut *tracker;
        let src = if count == 0 {
            &[][..]
        } else {
            std::slice::from_raw_parts(events, count)
        };
        let mut evs = try_status!(src.iter().map(to_event).collect::<Result<Vec<_>, _>>());
        evs.sort_by_key(|e| e.ts);
        let filtered = filter_noise(&EventPacket::new(seq, evs), &mut t.filter);
        match t.tracker.process(&filtered).smoothed {
            Some((x, y)) => {
                *has_roi = 1;
                *cx = x;
                *cy = y;
            }
            None => *has_roi = 0,
        }
        DvsStatus::Ok
    })
}

/// # Safety
/// `tracker` must come from [`dvs_tracker_new`] and not be used afterwards.
/// Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn dvs_tracker_free(tracker: *mut DvsTracker) {
    if !tracker.is_null() {
        drop(Box::from_raw(tracker));
    }
}

/// New servo at rest at `q0_deg`. Returns null and sets the last error if
/// `gain` or `lookahead_s` is out of range.
#[no_mangle]
pub extern "C" fn dvs_servo_new(gain: f64, lookahead_s: f64, q0_deg: f64) -> *mut DvsServo {
    let cfg = ServoConfig {
        gain,
        lookahead_s,
        ..Default::default()
    };
    if let Err(e) = cfg.validate() {
        set_error(e);
        return std::ptr::null_mut();
    }
    Box::into_raw(Box::new(DvsServo {
        cfg,
        state: RobotState::at_rest(q0_deg, 0),
    }))
}

/// Advances the servo one 8 ms tick toward `reference_deg`.
///
/// # Safety
/// `servo` must come from [`dvs_servo_new`] and not be freed; `q` and `qd`
/// valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dvs_servo_step(
    servo: *mut DvsServo,
    reference_deg: f64,
    q: *mut f64,
    qd: *mut f64,
) -> DvsStatus {
    guard(|| {
        non_null!(servo, q, qd);
        if !reference_deg.is_finite() {
            return fail(DvsStatus::InvalidArgument, "reference must be finite");
        }
        let s = &mut *servo;
        s.state = servo_step(&s.state, reference_deg, &s.cfg);
        *q = s.state.q;
        *qd = s.state.qd;
        DvsStatus::Ok
    })
}

/// # Safety
/// `servo` must come from [`dvs_servo_new`] and not be used afterwards.
/// Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn dvs_servo_free(servo: *mut DvsServo) {
    if !servo.is_null() {
        drop(Box::from_raw(servo));
    }
}
