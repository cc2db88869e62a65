//! Price impact of touch events: classification, response curves and the
//! real-vs-generated response gap.

use alloc::string::String;
use alloc::vec::Vec;

use crate::math;
use crate::stats;
use crate::types::{BookSnapshot, EventType, Price, SequencePair};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum EventClass {
    #[cfg_attr(feature = "serde", serde(rename = "MO0"))]
    Mo0,
    #[cfg_attr(feature = "serde", serde(rename = "MO1"))]
    Mo1,
    #[cfg_attr(feature = "serde", serde(rename = "LO0"))]
    Lo0,
    #[cfg_attr(feature = "serde", serde(rename = "LO1"))]
    Lo1,
    #[cfg_attr(feature = "serde", serde(rename = "CA0"))]
    Ca0,
    #[cfg_attr(feature = "serde", serde(rename = "CA1"))]
    Ca1,
}

/// Order type without the mid-change subscript.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OrderKind {
    Market,
    Limit,
    Cancel,
}

impl EventClass {
    pub const ALL: [EventClass; 6] = [
        EventClass::Mo0,
        EventClass::Mo1,
        EventClass::Lo0,
        EventClass::Lo1,
        EventClass::Ca0,
        EventClass::Ca1,
    ];

    pub fn new(kind: OrderKind, mid_changed: bool) -> Self {
        match (kind, mid_changed) {
            (OrderKind::Market, false) => EventClass::Mo0,
            (OrderKind::Market, true) => EventClass::Mo1,
            (OrderKind::Limit, false) => EventClass::Lo0,
            (OrderKind::Limit, true) => EventClass::Lo1,
            (OrderKind::Cancel, false) => EventClass::Ca0,
            (OrderKind::Cancel, true) => EventClass::Ca1,
        }
    }

    pub fn kind(self) -> OrderKind {
        match self {
            EventClass::Mo0 | EventClass::Mo1 => OrderKind::Market,
            EventClass::Lo0 | EventClass::Lo1 => OrderKind::Limit,
            EventClass::Ca0 | EventClass::Ca1 => OrderKind::Cancel,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            EventClass::Mo0 => "MO0",
            EventClass::Mo1 => "MO1",
            EventClass::Lo0 => "LO0",
            EventClass::Lo1 => "LO1",
            EventClass::Ca0 => "CA0",
            EventClass::Ca1 => "CA1",
        }
    }
}

/// Sign applied to the mid change: `dir` for market and limit orders,
/// `-dir` for cancellations.
pub fn epsilon(kind: OrderKind, dir: i8) -> i8 {
    match kind {
        OrderKind::Market | OrderKind::Limit => dir,
        OrderKind::Cancel => -dir,
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TouchEvent {
    pub index: usize,
    pub class: EventClass,
    pub dir: i8,
    pub epsilon: i8,
    /// Mid price before the event, in ticks.
    pub mid: f64,
}

fn touch(b: &BookSnapshot) -> [Option<(Price, u64)>; 2] {
    [
        b.best_bid().map(|l| (l.price, l.size)),
        b.best_ask().map(|l| (l.price, l.size)),
    ]
}

/// Touch events of a sequence. `initial` is the book before the first
/// message; without it the first message cannot be classified and is
/// skipped. Events with an undefined mid before them are skipped too.
/// Each event is classified by its own message side.
pub fn classify_events(seq: &SequencePair, initial: Option<&BookSnapshot>, tick: Price) -> Vec<TouchEvent> {
    let tick2 = 2.0 * tick as f64;
    let mut out = Vec::new();
    for (i, m) in seq.messages.iter().enumerate() {
        let before = if i == 0 { initial } else { Some(&seq.books[i - 1]) };
        let Some(before) = before else { continue };
        let after = &seq.books[i];
        let kind = match m.event {
            EventType::ExecuteVisible => OrderKind::Market,
            EventType::NewLimit => OrderKind::Limit,
            EventType::PartialCancel | EventType::Delete => OrderKind::Cancel,
            _ => continue,
        };
        if touch(before) == touch(after) {
            continue;
        }
        let Some(mb) = before.mid_x2() else { continue };
        let changed = after.mid_x2() != Some(mb);
        let dir = m.side.direction();
        let class = EventClass::new(kind, changed);
        out.push(TouchEvent { index: i, class, dir, epsilon: epsilon(kind, dir), mid: mb as f64 / tick2 });
    }
    out
}

/// Lags `round(10^x)` for `count` points `x` evenly spaced on
/// `[0, log10 max_lag]`, deduplicated.
pub fn lag_grid(max_lag: u32, count: usize) -> Vec<u32> {
    let count = count.max(2);
    let top = math::log10(f64::from(max_lag.max(1)));
    let mut lags: Vec<u32> = (0..count)
        .map(|k| {
            let x = top * k as f64 / (count - 1) as f64;
            math::round(math::pow(10.0, x)) as u32
        })
        .collect();
    lags[0] = 1;
    lags[count - 1] = max_lag.max(1);
    lags.dedup();
    lags
}

pub const DEFAULT_MAX_LAG: u32 = 200;
pub const DEFAULT_LAG_COUNT: usize = 20;
const Z99: f64 = 2.575_829_303_548_901;

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ResponseCurve {
    pub class: EventClass,
    pub lags: Vec<u32>,
    pub values: Vec<f64>,
    pub counts: Vec<usize>,
    pub ci: Vec<(f64, f64)>,
}

impl ResponseCurve {
    pub fn is_empty(&self) -> bool {
        self.lags.is_empty()
    }

    pub fn mean_abs(&self) -> f64 {
        stats::mean(&self.values.iter().map(|v| v.abs()).collect::<Vec<_>>())
    }
}

/// Response curves for all six classes over per-sequence touch events.
/// Lags count touch events and never cross sequence boundaries; lags
/// without any observation are left out of a curve.
pub fn response_functions(events: &[Vec<TouchEvent>], lags: &[u32]) -> Vec<ResponseCurve> {
    EventClass::ALL
        .iter()
        .map(|&class| {
            let mut curve = ResponseCurve { class, lags: Vec::new(), values: Vec::new(), counts: Vec::new(), ci: Vec::new() };
            let mut samples = Vec::new();
            for &l in lags {
                samples.clear();
                for ev in events {
                    let l = l as usize;
                    for t in 0..ev.len().saturating_sub(l) {
                        if ev[t].class == class {
                            samples.push((ev[t + l].mid - ev[t].mid) * f64::from(ev[t].epsilon));
                        }
                    }
                }
                if samples.is_empty() {
                    continue;
                }
                let m = stats::mean(&samples);
                let half = Z99 * stats::std_sample(&samples) / math::sqrt(samples.len() as f64);
                curve.lags.push(l);
                curve.values.push(m);
                curve.counts.push(samples.len());
                curve.ci.push((m - half, m + half));
            }
            curve
        })
        .collect()
}

/// Convenience: classify every sequence and build the curves.
pub fn response_for_sequences(seqs: &[SequencePair], tick: Price, lags: &[u32]) -> Vec<ResponseCurve> {
    let events: Vec<Vec<TouchEvent>> = seqs.iter().map(|s| classify_events(s, None, tick)).collect();
    response_functions(&events, lags)
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ClassDelta {
    pub class: EventClass,
    /// `None` when the class is absent from both datasets.
    pub value: Option<f64>,
    pub flag: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DeltaR {
    pub per_class: Vec<ClassDelta>,
    /// Mean over classes with a value; `None` if there are none.
    pub total: Option<f64>,
}

/// Mean absolute gap between real and generated curves per class, and the
/// mean of those. A class present on one side only scores the other
/// side's mean absolute response.
pub fn delta_r(real: &[ResponseCurve], gen: &[ResponseCurve]) -> DeltaR {
    let find = |set: &[ResponseCurve], c: EventClass| set.iter().find(|r| r.class == c && !r.is_empty()).cloned();
    let mut per_class = Vec::new();
    for class in EventClass::ALL {
        let (r, g) = (find(real, class), find(gen, class));
        let (value, flag) = match (r, g) {
            (None, None) => (None, Some(String::from("absent in both datasets"))),
            (Some(c), None) => (Some(c.mean_abs()), Some(String::from("absent in generated data"))),
            (None, Some(c)) => (Some(c.mean_abs()), Some(String::from("absent in real data"))),
            (Some(r), Some(g)) => {
                let mut gaps = Vec::new();
                for (i, l) in r.lags.iter().enumerate() {
                    if let Some(j) = g.lags.iter().position(|x| x == l) {
                        gaps.push((r.values[i] - g.values[j]).abs());
                    }
                }
                if gaps.is_empty() {
                    (Some(0.5 * (r.mean_abs() + g.mean_abs())), Some(String::from("no shared lags")))
                } else {
                    (Some(stats::mean(&gaps)), None)
                }
            }
        };
        per_class.push(ClassDelta { class, value, flag });
    }
    let vals: Vec<f64> = per_class.iter().filter_map(|c| c.value).collect();
    let total = (!vals.is_empty()).then(|| stats::mean(&vals));
    DeltaR { per_class, total }
}
