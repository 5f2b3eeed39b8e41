use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::{finalize, roi_datagram, roi_row, server_receive, Camera, Client, RunError, RunOutput};
use crate::config::{ms_to_us, ScenarioConfig};
use crate::controller::{
    virtual_emission_count, JointVector, Plant, ReferenceCell, PUBLISH_PERIOD_US,
};
use crate::event::EventPacket;
use crate::latency::{Stage, StampLog};
use crate::wire::{datagram_seq, StaleFilter};

enum Action {
    Capture(usize),
    ClientArrive(Vec<u8>),
    RoiReady(Vec<u8>),
    ServerArrive(Vec<u8>),
    CommandReady { seq: u32, angle: f64 },
    Publish,
    PlantApply(JointVector),
}

struct Scheduled {
    t_us: u64,
    order: u64,
    action: Action,
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        (self.t_us, self.order) == (other.t_us, other.order)
    }
}

impl Eq for Scheduled {}

impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Scheduled {
    // min-heap on (time, insertion order)
    fn cmp(&self, other: &Self) -> Ordering {
        (other.t_us, other.order).cmp(&(self.t_us, self.order))
    }
}

#[derive(Default)]
struct Queue {
    heap: BinaryHeap<Scheduled>,
    next_order: u64,
}

impl Queue {
    fn at(&mut self, t_us: u64, action: Action) {
        self.heap.push(Scheduled {
            t_us,
            order: self.next_order,
            action,
        });
        self.next_order += 1;
    }

    fn pop(&mut self) -> Option<(u64, Action)> {
        self.heap.pop().map(|s| (s.t_us, s.action))
    }
}

/// In-process datagram link: fixed latency, newest-wins on arrival.
struct Link {
    delay_us: u64,
    stale: StaleFilter,
}

impl Link {
    fn new(delay_ms: f64) -> Self {
        Link {
            delay_us: ms_to_us(delay_ms),
            stale: StaleFilter::new(),
        }
    }

    fn admit(&mut self, bytes: &[u8]) -> bool {
        datagram_seq(bytes).is_some_and(|seq| self.stale.admit(seq))
    }
}

pub(super) fn run(
    cfg: &ScenarioConfig,
    packets: &[EventPacket],
    estimate: bool,
) -> Result<RunOutput, RunError> {
    let d = &cfg.delays;
    let (capture_us, processing_us, command_us, link3_us) = (
        ms_to_us(d.capture_ms),
        ms_to_us(d.processing_ms),
        ms_to_us(d.command_ms),
        ms_to_us(d.link3_ms),
    );
    let mut link1 = Link::new(d.link1_ms);
    let mut link2 = Link::new(d.link2_ms);

    let log = StampLog::new();
    let mut camera = Camera::new(cfg.pipeline.correlation_window_us);
    let mut client = Client::new(cfg);
    let cell = ReferenceCell::new(cfg.elbow_map.nominal_elbow_deg);
    let mut plant = Plant::new(cfg.plant, cfg.servo, cfg.elbow_map.nominal_elbow_deg, 0);
    let mut packet_ts = std::collections::BTreeMap::new();
    let mut roi_rows = Vec::new();
    let mut publish_times = Vec::new();

    let mut q = Queue::default();
    for k in 0..virtual_emission_count(cfg.duration_us()) {
        q.at(k * PUBLISH_PERIOD_US, Action::Publish);
    }
    for (i, p) in packets.iter().enumerate() {
        let Some(generated) = p.last_ts() else {
            continue;
        };
        let generated = generated as u64;
        log.record(p.seq as u64, Stage::Generated, generated);
        packet_ts.insert(p.seq, generated);
        q.at(generated + capture_us, Action::Capture(i));
    }

    while let Some((t, action)) = q.pop() {
        match action {
            Action::Capture(i) => {
                let id = packets[i].seq as u64;
                log.record(id, Stage::Captured, t);
                let bytes = camera.capture(&packets[i])?;
                log.record(id, Stage::Filtered, t);
                q.at(t + link1.delay_us, Action::ClientArrive(bytes));
            }
            Action::ClientArrive(bytes) => {
                if !link1.admit(&bytes) {
                    continue;
                }
                let (seq, out) = client.receive(&bytes)?;
                let ts = packet_ts.get(&seq).copied().unwrap_or(0);
                if let Some(row) = roi_row(seq, ts, &out) {
                    roi_rows.push(row);
                    let dgram = roi_datagram(seq, ts, row.smoothed)?;
                    q.at(t + processing_us, Action::RoiReady(dgram.to_vec()));
                }
            }
            Action::RoiReady(bytes) => {
                let seq = datagram_seq(&bytes).unwrap_or(0) as u64;
                log.record(seq, Stage::RoiComputed, t);
                log.record(seq, Stage::RoiSent, t);
                q.at(t + link2.delay_us, Action::ServerArrive(bytes));
            }
            Action::ServerArrive(bytes) => {
                if !link2.admit(&bytes) {
                    continue;
                }
                let (seq, angle) = server_receive(&bytes, &cfg.elbow_map)?;
                log.record(seq as u64, Stage::RoiReceived, t);
                q.at(t + command_us, Action::CommandReady { seq, angle });
            }
            Action::CommandReady { seq, angle } => {
                cell.store(angle);
                log.record(seq as u64, Stage::CommandPublished, t);
            }
            Action::Publish => {
                publish_times.push(t);
                let joints = JointVector::with_elbow(&cfg.elbow_map, cell.load());
                q.at(t + link3_us, Action::PlantApply(joints));
            }
            Action::PlantApply(joints) => {
                plant.apply(joints.elbow(), t);
            }
        }
    }

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
