use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Mutex;

use super::xcorr::{estimate_delay_with, DelayError, DelayEstimate, DelayOptions};
use super::GyroTrace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Generated,
    Captured,
    Filtered,
    RoiComputed,
    RoiSent,
    RoiReceived,
    CommandPublished,
    PlantApplied,
}

impl Stage {
    pub const ALL: [Stage; 8] = [
        Stage::Generated,
        Stage::Captured,
        Stage::Filtered,
        Stage::RoiComputed,
        Stage::RoiSent,
        Stage::RoiReceived,
        Stage::CommandPublished,
        Stage::PlantApplied,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Generated => "generated",
            Stage::Captured => "captured",
            Stage::Filtered => "filtered",
            Stage::RoiComputed => "roi_computed",
            Stage::RoiSent => "roi_sent",
            Stage::RoiReceived => "roi_received",
            Stage::CommandPublished => "command_published",
            Stage::PlantApplied => "plant_applied",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StageStamp {
    pub item_id: u64,
    pub stage: Stage,
    pub ts_us: u64,
}

/// Append-only stamp collector shared by all pipeline tasks.
#[derive(Debug, Default)]
pub struct StampLog {
    stamps: Mutex<Vec<StageStamp>>,
}

impl StampLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&self, item_id: u64, stage: Stage, ts_us: u64) {
        self.stamps
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .push(StageStamp {
                item_id,
                stage,
                ts_us,
            });
    }

    pub fn len(&self) -> usize {
        self.stamps.lock().unwrap_or_else(|e| e.into_inner()).len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All stamps, ordered by item, stage, then time.
    pub fn snapshot(&self) -> Vec<StageStamp> {
        let mut v = self
            .stamps
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .clone();
        v.sort_by_key(|s| (s.item_id, s.stage, s.ts_us));
        v
    }
}

pub fn record_stage(log: &StampLog, item_id: u64, stage: Stage, ts_us: u64) {
    log.record(item_id, stage, ts_us);
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageStats {
    pub count: usize,
    pub mean_ms: f64,
    pub p50_ms: f64,
    pub p99_ms: f64,
}

/// Nearest-rank percentile of sorted values.
fn percentile(sorted: &[f64], p: f64) -> f64 {
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

fn stats_ms(mut values_ms: Vec<f64>) -> Option<StageStats> {
    if values_ms.is_empty() {
        return None;
    }
    values_ms.sort_by(f64::total_cmp);
    Some(StageStats {
        count: values_ms.len(),
        mean_ms: values_ms.iter().sum::<f64>() / values_ms.len() as f64,
        p50_ms: percentile(&values_ms, 50.0),
        p99_ms: percentile(&values_ms, 99.0),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JitterStats {
    pub intervals: usize,
    pub p50_ms: f64,
    pub p99_ms: f64,
    pub max_ms: f64,
}

/// Deviation of consecutive publish intervals from the nominal period.
pub fn publish_jitter(times_us: &[u64], period_us: u64) -> Option<JitterStats> {
    let mut dev: Vec<f64> = times_us
        .windows(2)
        .map(|w| (w[1] as f64 - w[0] as f64 - period_us as f64).abs() / 1000.0)
        .collect();
    if dev.is_empty() {
        return None;
    }
    dev.sort_by(f64::total_cmp);
    Some(JitterStats {
        intervals: dev.len(),
        p50_ms: percentile(&dev, 50.0),
        p99_ms: percentile(&dev, 99.0),
        max_ms: dev[dev.len() - 1],
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatencyReport {
    /// Items with every stage stamped in order.
    pub items: usize,
    pub dropped_items: usize,
    /// Consecutive stage pairs in pipeline order.
    pub per_stage: Vec<(Stage, Stage, Option<StageStats>)>,
    /// captured -> roi_computed.
    pub event_processing: Option<StageStats>,
    /// generated -> plant_applied.
    pub total_stamps: Option<StageStats>,
    pub total_xcorr: Option<DelayEstimate>,
    pub publish_jitter: Option<JitterStats>,
}

/// Aggregates complete items into per-stage statistics, and estimates the
/// cross-correlation total when gyro traces are given.
pub fn build_report(
    stamps: &[StageStamp],
    gyro: Option<(&GyroTrace, &GyroTrace)>,
) -> Result<LatencyReport, DelayError> {
    let mut by_item: BTreeMap<u64, [Option<u64>; 8]> = BTreeMap::new();
    for s in stamps {
        let slot = &mut by_item.entry(s.item_id).or_default()[s.stage as usize];
        if slot.is_none() {
            *slot = Some(s.ts_us);
        }
    }

    let mut complete: Vec<[u64; 8]> = Vec::new();
    let mut dropped = 0;
    for ts in by_item.values() {
        let full: Option<Vec<u64>> = ts.iter().copied().collect();
        match full {
            Some(v) if v.windows(2).all(|w| w[0] <= w[1]) => {
                complete.push(v.try_into().expect("eight stages"));
            }
            _ => dropped += 1,
        }
    }

    let delta = |from: Stage, to: Stage| -> Option<StageStats> {
        stats_ms(
            complete
                .iter()
                .map(|t| (t[to as usize] - t[from as usize]) as f64 / 1000.0)
                .collect(),
        )
    };
    let per_stage = Stage::ALL
        .windows(2)
        .map(|w| (w[0], w[1], delta(w[0], w[1])))
        .collect();

    let total_xcorr = match gyro {
        Some((m, s)) => Some(estimate_delay_with(m, s, &DelayOptions::default())?),
        None => None,
    };

    Ok(LatencyReport {
        items: complete.len(),
        dropped_items: dropped,
        per_stage,
        event_processing: delta(Stage::Captured, Stage::RoiComputed),
        total_stamps: delta(Stage::Generated, Stage::PlantApplied),
        total_xcorr,
        publish_jitter: None,
    })
}

const COMPONENTS: [(&str, &str, Stage, Stage); 6] = [
    (
        "client",
        "Capture events (750 events)",
        Stage::Generated,
        Stage::Captured,
    ),
    (
        "client",
        "Event data processing",
        Stage::Captured,
        Stage::RoiComputed,
    ),
    (
        "client",
        "ROI smoothing",
        Stage::RoiComputed,
        Stage::RoiSent,
    ),
    ("server", "2nd UDP link", Stage::RoiSent, Stage::RoiReceived),
    (
        "server",
        "Generate command",
        Stage::RoiReceived,
        Stage::CommandPublished,
    ),
    (
        "robot",
        "3rd link + robot dynamics",
        Stage::CommandPublished,
        Stage::PlantApplied,
    ),
];

fn cells(s: Option<&StageStats>) -> [String; 3] {
    match s {
        Some(s) => [
            format!("{:.3}", s.mean_ms),
            format!("{:.3}", s.p50_ms),
            format!("{:.3}", s.p99_ms),
        ],
        None => ["-".into(), "-".into(), "-".into()],
    }
}

impl LatencyReport {
    pub fn pair(&self, from: Stage, to: Stage) -> Option<&StageStats> {
        self.per_stage
            .iter()
            .find(|(f, t, _)| *f == from && *t == to)
            .and_then(|(_, _, s)| s.as_ref())
    }

    fn span(&self, from: Stage, to: Stage) -> Option<StageStats> {
        if to as usize == from as usize + 1 {
            return self.pair(from, to).copied();
        }
        match (from, to) {
            (Stage::Captured, Stage::RoiComputed) => self.event_processing,
            (Stage::Generated, Stage::PlantApplied) => self.total_stamps,
            _ => None,
        }
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let total = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.3} ms"));
        let _ = writeln!(out, "Components of system latency");
        let _ = writeln!(
            out,
            "items: {}  dropped: {}",
            self.items, self.dropped_items
        );
        let _ = writeln!(
            out,
            "total (cross-correlation): {}",
            total(self.total_xcorr.map(|e| e.delay_ms))
        );
        let _ = writeln!(
            out,
            "total (stage stamps):      {}",
            total(self.total_stamps.map(|s| s.mean_ms))
        );
        if let Some(ratio) = self.total_xcorr.and_then(|e| e.peak_ratio()) {
            let _ = writeln!(out, "correlation peak ratio:    {ratio:.3}");
        }
        if let Some(j) = &self.publish_jitter {
            let _ = writeln!(
                out,
                "publish jitter: p50 {:.3} ms  p99 {:.3} ms  max {:.3} ms",
                j.p50_ms, j.p99_ms, j.max_ms
            );
        }
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "{:<8} {:<28} {:<38} {:>10} {:>10} {:>10}",
            "side", "component", "stages", "mean_ms", "p50_ms", "p99_ms"
        );
        for (side, name, from, to) in COMPONENTS {
            let [m, p50, p99] = cells(self.span(from, to).as_ref());
            let stages = format!("{} -> {}", from.name(), to.name());
            let _ = writeln!(
                out,
                "{side:<8} {name:<28} {stages:<38} {m:>10} {p50:>10} {p99:>10}"
            );
        }
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "{:<38} {:>10} {:>10} {:>10}",
            "stage pair", "mean_ms", "p50_ms", "p99_ms"
        );
        for (from, to, s) in &self.per_stage {
            let [m, p50, p99] = cells(s.as_ref());
            let stages = format!("{} -> {}", from.name(), to.name());
            let _ = writeln!(out, "{stages:<38} {m:>10} {p50:>10} {p99:>10}");
        }
        out
    }

    /// `stage_pair,mean_ms,p50_ms,p99_ms`, consecutive pairs first, then
    /// the aggregates.
    pub fn render_csv(&self) -> String {
        let mut out = String::from("stage_pair,mean_ms,p50_ms,p99_ms\n");
        let mut row = |label: String, s: Option<&StageStats>| {
            let [m, p50, p99] = match s {
                Some(_) => cells(s),
                None => [String::new(), String::new(), String::new()],
            };
            let _ = writeln!(out, "{label},{m},{p50},{p99}");
        };
        for (from, to, s) in &self.per_stage {
            row(format!("{}->{}", from.name(), to.name()), s.as_ref());
        }
        row(
            "captured->roi_computed".into(),
            self.event_processing.as_ref(),
        );
        row(
            "generated->plant_applied".into(),
            self.total_stamps.as_ref(),
        );
        let xc = self
            .total_xcorr
            .map_or(String::new(), |e| format!("{:.3}", e.delay_ms));
        let _ = writeln!(out, "total_xcorr,{xc},,");
        if let Some(j) = &self.publish_jitter {
            let _ = writeln!(out, "publish_jitter,,{:.3},{:.3}", j.p50_ms, j.p99_ms);
        }
        out
    }
}
