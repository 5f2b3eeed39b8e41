use std::ffi::CStr;
use std::ptr;

use dvsbot_ffi::*;

fn last_error() -> String {
    let p = dvs_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn version_is_set() {
    let v = unsafe { CStr::from_ptr(dvs_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn event_roundtrip() {
    let e = DvsEvent {
        x: 239,
        y: 179,
        ts: 0xDEAD_BEEF,
        polarity: 1,
    };
    let mut bytes = [0u8; 8];
    let mut back = DvsEvent::default();
    unsafe {
        assert_eq!(dvs_encode_event(&e, bytes.as_mut_ptr()), DvsStatus::Ok);
        assert_eq!(dvs_decode_event(bytes.as_ptr(), &mut back), DvsStatus::Ok);
    }
    assert_eq!(back, e);
}

#[test]
fn bad_event_is_rejected_with_a_message() {
    let mut bytes = [0u8; 8];
    let off_sensor = DvsEvent {
        x: 240,
        ..Default::default()
    };
    let bad_pol = DvsEvent {
        polarity: 2,
        ..Default::default()
    };
    unsafe {
        assert_eq!(
            dvs_encode_event(&off_sensor, bytes.as_mut_ptr()),
            DvsStatus::InvalidArgument
        );
        assert!(last_error().contains("240"));
        assert_eq!(
            dvs_encode_event(&bad_pol, bytes.as_mut_ptr()),
            DvsStatus::InvalidArgument
        );
        assert!(last_error().contains("polarity"));
        assert_eq!(
            dvs_encode_event(ptr::null(), bytes.as_mut_ptr()),
            DvsStatus::NullPointer
        );
    }
}

#[test]
fn event_datagram_roundtrip_and_sizes() {
    let events: Vec<DvsEvent> = (0..5)
        .map(|i| DvsEvent {
            x: i,
            y: 2 * i,
            ts: 100 + u32::from(i),
            polarity: (i % 2) as u8,
        })
        .collect();
    let mut buf = vec![0u8; 8 + 5 * 8];
    let mut len = 0usize;
    unsafe {
        assert_eq!(
            dvs_frame_events(7, events.as_ptr(), 5, buf.as_mut_ptr(), 10, &mut len),
            DvsStatus::BufferTooSmall
        );
        assert_eq!(len, 48);
        assert_eq!(
            dvs_frame_events(7, events.as_ptr(), 5, buf.as_mut_ptr(), buf.len(), &mut len),
            DvsStatus::Ok
        );
        let mut out = vec![DvsEvent::default(); 5];
        let (mut seq, mut n) = (0u32, 0usize);
        assert_eq!(
            dvs_parse_events(buf.as_ptr(), len, &mut seq, out.as_mut_ptr(), 2, &mut n),
            DvsStatus::BufferTooSmall
        );
        assert_eq!(n, 5);
        assert_eq!(
            dvs_parse_events(
                buf.as_ptr(),
                len,
                &mut seq,
                out.as_mut_ptr(),
                out.len(),
                &mut n
            ),
            DvsStatus::Ok
        );
        assert_eq!((seq, n), (7, 5));
        assert_eq!(out, events);
        assert_eq!(
            dvs_parse_events(
                buf.as_ptr(),
                len - 3,
                &mut seq,
                out.as_mut_ptr(),
                out.len(),
                &mut n
            ),
            DvsStatus::Malformed
        );
    }
}

#[test]
fn empty_datagram() {
    let mut buf = [0u8; 8];
    let mut len = 0usize;
    let (mut seq, mut n) = (0u32, 1usize);
    unsafe {
        assert_eq!(
            dvs_frame_events(3, ptr::null(), 0, buf.as_mut_ptr(), 8, &mut len),
            DvsStatus::Ok
        );
        assert_eq!(
            dvs_parse_events(buf.as_ptr(), len, &mut seq, ptr::null_mut(), 0, &mut n),
            DvsStatus::Ok
        );
    }
    assert_eq!((len, seq, n), (8, 3, 0));
}

#[test]
fn roi_roundtrip_and_range() {
    let roi = DvsRoi {
        seq: 9,
        ts: 1 << 40,
        cx: 120.5,
        cy: 33.25,
    };
    let mut bytes = [0u8; 20];
    let mut back = DvsRoi::default();
    unsafe {
        assert_eq!(dvs_frame_roi(&roi, bytes.as_mut_ptr()), DvsStatus::Ok);
        assert_eq!(dvs_parse_roi(bytes.as_ptr(), 20, &mut back), DvsStatus::Ok);
        assert_eq!(back, roi);
        assert_eq!(
            dvs_parse_roi(bytes.as_ptr(), 19, &mut back),
            DvsStatus::Malformed
        );
        let outside = DvsRoi { cx: 300.0, ..roi };
        assert_eq!(
            dvs_frame_roi(&outside, bytes.as_mut_ptr()),
            DvsStatus::InvalidArgument
        );
    }
}

fn wave(shift: usize) -> Vec<f64> {
    (0..2000)
        .map(|i| {
            let t = (i as f64 - shift as f64) / 200.0;
            (2.0 * std::f64::consts::PI * 0.5 * t).sin()
                + 0.3 * (2.0 * std::f64::consts::PI * 2.3 * t).sin()
        })
        .collect()
}

#[test]
fn delay_estimate() {
    let (m, s) = (wave(0), wave(22));
    let mut d = f64::NAN;
    unsafe {
        assert_eq!(
            dvs_estimate_delay(
                m.as_ptr(),
                m.len(),
                0,
                s.as_ptr(),
                s.len(),
                0,
                200.0,
                &mut d
            ),
            DvsStatus::Ok
        );
        assert!((d - 110.0).abs() <= 0.5, "{d}");

        let flat = vec![1.0; 2000];
        assert_eq!(
            dvs_estimate_delay(
                m.as_ptr(),
                m.len(),
                0,
                flat.as_ptr(),
                flat.len(),
                0,
                200.0,
                &mut d
            ),
            DvsStatus::UndefinedDelay
        );
        assert_eq!(
            dvs_estimate_delay(m.as_ptr(), 200, 0, s.as_ptr(), 200, 0, 200.0, &mut d),
            DvsStatus::InsufficientData
        );
        assert_eq!(
            dvs_estimate_delay(m.as_ptr(), m.len(), 0, s.as_ptr(), s.len(), 0, 0.0, &mut d),
            DvsStatus::InvalidArgument
        );
    }
}

#[test]
fn angle_map() {
    let mut a = f64::NAN;
    unsafe {
        assert_eq!(dvs_map_center_to_angle(120.0, 100.0, &mut a), DvsStatus::Ok);
        assert_eq!(a, 0.0);
        assert_eq!(dvs_map_center_to_angle(180.0, 100.0, &mut a), DvsStatus::Ok);
        assert!((a - 36.0).abs() < 1e-9);
        assert_eq!(
            dvs_map_center_to_angle(f64::NAN, 100.0, &mut a),
            DvsStatus::InvalidArgument
        );
    }
}

#[test]
fn tracker_finds_a_blob() {
    let t = dvs_tracker_new();
    let mut found = 0u8;
    let (mut cx, mut cy) = (0.0, 0.0);
    for k in 0..10u32 {
        let events: Vec<DvsEvent> = (0..400u32)
            .map(|i| DvsEvent {
                x: 50 + (i % 31) as u16,
                y: 60 + ((i / 31) % 41) as u16,
                ts: k * 1000 + i,
                polarity: 1,
            })
            .collect();
        let st = unsafe {
            dvs_tracker_process(
                t,
                k,
                events.as_ptr(),
                events.len(),
                &mut found,
                &mut cx,
                &mut cy,
            )
        };
        assert_eq!(st, DvsStatus::Ok);
    }
    unsafe { dvs_tracker_free(t) };
    assert_eq!(found, 1);
    assert!(
        (cx - 65.0).abs() < 3.0 && (cy - 66.0).abs() < 8.0,
        "({cx}, {cy})"
    );
}

#[test]
fn servo_respects_the_velocity_limit() {
    assert!(dvs_servo_new(5000.0, 0.08, 0.0).is_null());
    assert!(last_error().contains("gain"));
    let s = dvs_servo_new(2000.0, 0.03, 0.0);
    assert!(!s.is_null());
    let (mut q, mut qd) = (0.0, 0.0);
    let mut peak: f64 = 0.0;
    for _ in 0..300 {
        assert_eq!(
            unsafe { dvs_servo_step(s, 90.0, &mut q, &mut qd) },
            DvsStatus::Ok
        );
        peak = peak.max(qd.abs());
    }
    unsafe { dvs_servo_free(s) };
    assert!(peak <= 180.0);
    assert!((q - 90.0).abs() < 0.5, "{q}");
}

#[test]
fn free_ignores_null() {
    unsafe {
        dvs_tracker_free(ptr::null_mut());
        dvs_servo_free(ptr::null_mut());
    }
}

#[test]
fn header_declares_every_export() {
    let h =
        std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/dvsbot.h")).unwrap();
    for f in [
        "dvs_last_error",
        "dvs_version",
        "dvs_encode_event",
        "dvs_decode_event",
        "dvs_frame_events",
        "dvs_parse_events",
        "dvs_frame_roi",
        "dvs_parse_roi",
        "dvs_estimate_delay",
        "dvs_map_center_to_angle",
        "dvs_tracker_new",
        "dvs_tracker_process",
        "dvs_tracker_free",
        "dvs_servo_new",
        "dvs_servo_step",
        "dvs_servo_free",
    ] {
        assert!(h.contains(&format!("{f}(")), "{f} missing");
    }
    assert!(h.contains("typedef struct DvsTracker DvsTracker;"));
}
