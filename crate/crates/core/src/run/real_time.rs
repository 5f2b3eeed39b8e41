use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::mpsc::{channel, Sender};
use std::sync::Mutex;
use std::thread::Scope;
use std::time::{Duration, Instant};

use super::{finalize, roi_datagram, roi_row, server_receive, Camera, Client, RunError, RunOutput};
use crate::config::{ms_to_us, ScenarioConfig};
use crate::controller::{publish_realtime, Plant, ReferenceCell};
use crate::event::EventPacket;
use crate::latency::{Stage, StampLog};
use crate::wire::{DatagramReceiver, DatagramSender};

const POLL: Duration = Duration::from_millis(20);
// upper bound on waiting for in-flight datagrams after the last publish
const DRAIN_GRACE: Duration = Duration::from_secs(1);

/// Datagrams handed to a link vs. datagrams its receiver has consumed
/// (admitted or dropped).
#[derive(Default)]
struct InFlight {
    sent: AtomicU64,
    consumed: AtomicU64,
}

impl InFlight {
    fn drained(&self) -> bool {
        self.consumed.load(Ordering::Acquire) >= self.sent.load(Ordering::Acquire)
    }

    fn observe(&self, rx: &DatagramReceiver, admitted: u64) {
        let n = admitted + rx.stale_dropped() + rx.runts_dropped();
        self.consumed.store(n, Ordering::Release);
    }
}

fn sleep_until(deadline: Instant) {
    let now = Instant::now();
    if deadline > now {
        std::thread::sleep(deadline - now);
    }
}

/// Fixed-latency stage: items are handed to `handler` `delay` after they
/// were pushed, in push order. The worker exits once every sender is gone.
fn delay_line<'s, T: Send + 's>(
    scope: &'s Scope<'s, '_>,
    delay: Duration,
    mut handler: impl FnMut(T) + Send + 's,
) -> Sender<(Instant, T)> {
    let (tx, rx) = channel::<(Instant, T)>();
    scope.spawn(move || {
        for (pushed, item) in rx {
            sleep_until(pushed + delay);
            handler(item);
        }
    });
    tx
}

fn ms(delay_ms: f64) -> Duration {
    Duration::from_micros(ms_to_us(delay_ms))
}

pub(super) fn run(
    cfg: &ScenarioConfig,
    packets: &[EventPacket],
    estimate: bool,
) -> Result<RunOutput, RunError> {
    let net = &cfg.network;
    let mut client_rx = DatagramReceiver::bind(&net.address, net.event_port)?;
    let mut server_rx = DatagramReceiver::bind(&net.address, net.roi_port)?;
    let to_client = DatagramSender::to_addr(client_rx.local_addr())?;
    let to_server = DatagramSender::to_addr(server_rx.local_addr())?;

    let log = StampLog::new();
    let cell = ReferenceCell::new(cfg.elbow_map.nominal_elbow_deg);
    let plant = Mutex::new(Plant::new(
        cfg.plant,
        cfg.servo,
        cfg.elbow_map.nominal_elbow_deg,
        0,
    ));
    let roi_rows = Mutex::new(Vec::new());
    let errors: Mutex<Vec<String>> = Mutex::new(Vec::new());
    let stop = AtomicBool::new(false);
    let (events_link, roi_link) = (InFlight::default(), InFlight::default());
    let d = cfg.delays;

    let start = Instant::now();
    let now_us = || start.elapsed().as_micros() as u64;
    let fail = |e: String| errors.lock().unwrap_or_else(|p| p.into_inner()).push(e);

    let publish_times = std::thread::scope(|s| {
        let (log, cell, plant, roi_rows, stop) = (&log, &cell, &plant, &roi_rows, &stop);
        let (events_link, roi_link) = (&events_link, &roi_link);
        let fail = &fail;

        let link1 = delay_line(s, ms(d.link1_ms), move |bytes: Vec<u8>| {
            if let Err(e) = to_client.send(&bytes) {
                fail(e.to_string());
            }
        });
        let link2 = delay_line(s, ms(d.link2_ms), move |bytes: [u8; 20]| {
            if let Err(e) = to_server.send(&bytes) {
                fail(e.to_string());
            }
        });
        let processing = delay_line(
            s,
            ms(d.processing_ms),
            move |(seq, dgram): (u32, [u8; 20])| {
                let t = now_us();
                log.record(seq as u64, Stage::RoiComputed, t);
                log.record(seq as u64, Stage::RoiSent, t);
                let _ = link2.send((Instant::now(), dgram));
            },
        );
        let command = delay_line(s, ms(d.command_ms), move |(seq, angle): (u32, f64)| {
            cell.store(angle);
            log.record(seq as u64, Stage::CommandPublished, now_us());
        });
        let link3 = delay_line(s, ms(d.link3_ms), move |reference: f64| {
            plant
                .lock()
                .unwrap_or_else(|p| p.into_inner())
                .apply(reference, now_us());
        });

        // camera
        let capture = ms(d.capture_ms);
        let mut camera = Camera::new(cfg.pipeline.correlation_window_us);
        let camera_thread = s.spawn(move || {
            for p in packets {
                let Some(generated) = p.last_ts() else {
                    continue;
                };
                let id = p.seq as u64;
                log.record(id, Stage::Generated, generated as u64);
                sleep_until(start + Duration::from_micros(generated as u64) + capture);
                log.record(id, Stage::Captured, now_us());
                match camera.capture(p) {
                    Ok(bytes) => {
                        log.record(id, Stage::Filtered, now_us());
                        events_link.sent.fetch_add(1, Ordering::AcqRel);
                        let _ = link1.send((Instant::now(), bytes));
                    }
                    Err(e) => fail(e.to_string()),
                }
            }
        });

        // client
        let mut client = Client::new(cfg);
        let mut admitted = 0u64;
        let packet_ts: std::collections::HashMap<u32, u64> = packets
            .iter()
            .filter_map(|p| p.last_ts().map(|t| (p.seq, t as u64)))
            .collect();
        s.spawn(move || loop {
            let received = client_rx.next(Some(POLL));
            if received.as_ref().is_ok_and(|r| r.is_some()) {
                admitted += 1;
            }
            events_link.observe(&client_rx, admitted);
            match received {
                Ok(Some(bytes)) => {
                    let arrived = Instant::now();
                    match client.receive(&bytes) {
                        Ok((seq, out)) => {
                            let ts = packet_ts.get(&seq).copied().unwrap_or(0);
                            if let Some(row) = roi_row(seq, ts, &out) {
                                roi_rows.lock().unwrap_or_else(|p| p.into_inner()).push(row);
                                match roi_datagram(seq, ts, row.smoothed) {
                                    Ok(d) => {
                                        roi_link.sent.fetch_add(1, Ordering::AcqRel);
                                        let _ = processing.send((arrived, (seq, d)));
                                    }
                                    Err(e) => fail(e.to_string()),
                                }
                            }
                        }
                        Err(e) => fail(e.to_string()),
                    }
                }
                Ok(None) if stop.load(Ordering::Relaxed) => break,
                Ok(None) => {}
                Err(e) => {
                    fail(e.to_string());
                    break;
                }
            }
        });

        // server
        let map = cfg.elbow_map;
        let mut admitted = 0u64;
        s.spawn(move || loop {
            let received = server_rx.next(Some(POLL));
            if received.as_ref().is_ok_and(|r| r.is_some()) {
                admitted += 1;
            }
            roi_link.observe(&server_rx, admitted);
            match received {
                Ok(Some(bytes)) => match server_receive(&bytes, &map) {
                    Ok((seq, angle)) => {
                        log.record(seq as u64, Stage::RoiReceived, now_us());
                        let _ = command.send((Instant::now(), (seq, angle)));
                    }
                    Err(e) => fail(e.to_string()),
                },
                Ok(None) if stop.load(Ordering::Relaxed) => break,
                Ok(None) => {}
                Err(e) => {
                    fail(e.to_string());
                    break;
                }
            }
        });

        // publisher on this thread
        let times = publish_realtime(
            start,
            Duration::from_micros(cfg.duration_us()),
            cell,
            &cfg.elbow_map,
            |e| {
                let _ = link3.send((Instant::now(), e.joints.elbow()));
            },
        );
        drop(link3);
        // let packets generated before the end finish their trip, as in
        // virtual time
        let _ = camera_thread.join();
        let in_flight = ms(d.link1_ms + d.processing_ms + d.link2_ms);
        let deadline = Instant::now() + in_flight + DRAIN_GRACE;
        while !(events_link.drained() && roi_link.drained()) && Instant::now() < deadline {
            std::thread::sleep(Duration::from_millis(1));
        }
        stop.store(true, Ordering::Relaxed);
        times
    });

    let errors = errors.into_inner().unwrap_or_else(|p| p.into_inner());
    if let Some(first) = errors.first() {
        return Err(RunError::Runtime(format!(
            "{} error(s) in real-time run, first: {first}",
            errors.len()
        )));
    }
    let plant = plant.into_inner().unwrap_or_else(|p| p.into_inner());
    let mut roi_rows = roi_rows.into_inner().unwrap_or_else(|p| p.into_inner());
    roi_rows.sort_by_key(|r| r.seq);
    finalize(
        cfg,
        &log,
        plant.history().to_vec(),
        publish_times,
        roi_rows,
        packets.len(),
        estimate,
    )
}
