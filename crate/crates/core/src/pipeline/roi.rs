//! Edge-activity region of interest.
//!
//! Column and row event-count histograms are box-smoothed and thresholded at
//! a multiple of their mean. Above-threshold runs separated by at most
//! `merge_gap_px` quiet bins are joined (a moving hand lights up its two
//! lateral edges strongly and its interior barely at all); the heaviest
//! joined run on each axis spans the bounding box. The center is the
//! centroid of the events inside the box.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::event::{Event, SENSOR_HEIGHT, SENSOR_WIDTH};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RoiConfig {
    pub window_us: u32,
    pub max_events: usize,
    pub smoothing_radius: usize,
    pub activity_factor: f64,
    pub min_support: usize,
    pub merge_gap_px: usize,
}

impl Default for RoiConfig {
    fn default() -> Self {
        RoiConfig {
            window_us: 10_000,
            max_events: 2000,
            smoothing_radius: 2,
            activity_factor: 2.0,
            min_support: 50,
            merge_gap_px: 32,
        }
    }
}

/// Inclusive pixel rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BBox {
    pub x0: u16,
    pub y0: u16,
    pub x1: u16,
    pub y1: u16,
}

impl BBox {
    pub fn contains_px(&self, x: u16, y: u16) -> bool {
        (self.x0..=self.x1).contains(&x) && (self.y0..=self.y1).contains(&y)
    }

    pub fn contains_point(&self, (x, y): (f64, f64)) -> bool {
        x >= self.x0 as f64 && x <= self.x1 as f64 && y >= self.y0 as f64 && y <= self.y1 as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoiEstimate {
    pub center: (f64, f64),
    pub bbox: BBox,
    /// Timestamp of the newest event inside the box.
    pub ts: u32,
    pub support: usize,
}

fn box_smooth(hist: &[f64], radius: usize) -> Vec<f64> {
    let n = hist.len();
    let norm = (2 * radius + 1) as f64;
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(radius);
            let hi = (i + radius).min(n - 1);
            hist[lo..=hi].iter().sum::<f64>() / norm
        })
        .collect()
}

/// Heaviest group of above-threshold runs, as an inclusive bin range.
fn dominant_extent(hist: &[f64], cfg: &RoiConfig) -> Option<(usize, usize)> {
    let smooth = box_smooth(hist, cfg.smoothing_radius);
    let mean = smooth.iter().sum::<f64>() / smooth.len() as f64;
    let threshold = cfg.activity_factor * mean;
    if mean <= 0.0 {
        return None;
    }

    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut i = 0;
    while i < smooth.len() {
        if smooth[i] > threshold {
            let start = i;
            while i + 1 < smooth.len() && smooth[i + 1] > threshold {
                i += 1;
            }
            match runs.last_mut() {
                Some(last) if start - last.1 - 1 <= cfg.merge_gap_px => last.1 = i,
                _ => runs.push((start, i)),
            }
        }
        i += 1;
    }

    let mass = |&(a, b): &(usize, usize)| -> f64 { smooth[a..=b].iter().sum() };
    let mut best: Option<((usize, usize), f64)> = None;
    for r in &runs {
        let m = mass(r);
        if best.is_none_or(|(_, bm)| m > bm) {
            best = Some((*r, m));
        }
    }
    best.map(|(r, _)| r)
}

/// Region of interest of a window of filtered events, or `None` when fewer
/// than `min_support` events fall inside the detected box.
pub fn compute_roi(window: &[Event], cfg: &RoiConfig) -> Option<RoiEstimate> {
    if window.is_empty() {
        return None;
    }
    let mut cols = vec![0.0; SENSOR_WIDTH as usize];
    let mut rows = vec![0.0; SENSOR_HEIGHT as usize];
    for e in window.iter().filter(|e| e.in_bounds()) {
        cols[e.x as usize] += 1.0;
        rows[e.y as usize] += 1.0;
    }
    let (x0, x1) = dominant_extent(&cols, cfg)?;
    let (y0, y1) = dominant_extent(&rows, cfg)?;
    let bbox = BBox {
        x0: x0 as u16,
        y0: y0 as u16,
        x1: x1 as u16,
        y1: y1 as u16,
    };

    let (mut sx, mut sy, mut n, mut newest) = (0.0, 0.0, 0usize, 0u32);
    for e in window.iter().filter(|e| bbox.contains_px(e.x, e.y)) {
        sx += e.x as f64;
        sy += e.y as f64;
        n += 1;
        newest = newest.max(e.ts);
    }
    if n < cfg.min_support.max(1) {
        return None;
    }
    Some(RoiEstimate {
        center: (sx / n as f64, sy / n as f64),
        bbox,
        ts: newest,
        support: n,
    })
}

/// Sliding window of the most recent filtered events: at most `window_us`
/// old relative to the newest event and at most `max_events` long.
#[derive(Debug, Clone)]
pub struct EventWindow {
    events: VecDeque<Event>,
    window_us: u32,
    max_events: usize,
}

impl EventWindow {
    pub fn new(cfg: &RoiConfig) -> Self {
        EventWindow {
            events: VecDeque::with_capacity(cfg.max_events + 1),
            window_us: cfg.window_us,
            max_events: cfg.max_events.max(1),
        }
    }

    pub fn push(&mut self, events: &[Event]) {
        self.events.extend(events.iter().copied());
        while self.events.len() > self.max_events {
            self.events.pop_front();
        }
        if let Some(newest) = self.events.back().map(|e| e.ts) {
            let oldest_kept = newest.saturating_sub(self.window_us);
            while self.events.front().is_some_and(|e| e.ts < oldest_kept) {
                self.events.pop_front();
            }
        }
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn as_slice(&mut self) -> &[Event] {
        self.events.make_contiguous()
    }
}
