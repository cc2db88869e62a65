//! Scoring functions mapping a (messages, books) sequence to scalar series.
//!
//! Each function scores one sequence and tags values with time and step;
//! [`ScoreSpec::evaluate_dataset`] concatenates per-sequence outputs and
//! stamps sequence numbers. Non-finite values are dropped and counted.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::math;
use crate::types::{BookSnapshot, EventType, Nanos, Price, SequencePair, Side};

/// Parameters shared by all scores of a run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScoreContext {
    pub tick_size: Price,
    pub n_levels: usize,
}

impl Default for ScoreContext {
    fn default() -> Self {
        ScoreContext { tick_size: 100, n_levels: 10 }
    }
}

/// What one value of a series stands for.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Granularity {
    PerMessage,
    PerBucket,
    PerSequence,
}

/// One scored value with its metadata.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScoreValue {
    pub value: f64,
    pub time: Nanos,
    pub step_index: u32,
    pub sequence_id: u32,
}

/// Struct-of-arrays score output.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreSeries {
    pub name: String,
    pub granularity: Granularity,
    pub values: Vec<f64>,
    pub times: Vec<Nanos>,
    pub steps: Vec<u32>,
    pub sequences: Vec<u32>,
    /// Non-finite values discarded.
    pub dropped: usize,
}

impl ScoreSeries {
    pub fn new(name: impl Into<String>, granularity: Granularity) -> Self {
        ScoreSeries {
            name: name.into(),
            granularity,
            values: Vec::new(),
            times: Vec::new(),
            steps: Vec::new(),
            sequences: Vec::new(),
            dropped: 0,
        }
    }

    pub fn push(&mut self, value: f64, time: Nanos, step: u32) {
        if !value.is_finite() {
            self.dropped += 1;
            return;
        }
        self.values.push(value);
        self.times.push(time);
        self.steps.push(step);
        self.sequences.push(0);
    }

    /// Appends `other`, stamping its values with sequence number `seq_no`.
    pub fn append(&mut self, other: ScoreSeries, seq_no: u32) {
        self.values.extend(other.values);
        self.times.extend(other.times);
        self.steps.extend(other.steps);
        self.sequences.extend(core::iter::repeat_n(seq_no, other.sequences.len()));
        self.dropped += other.dropped;
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = ScoreValue> + '_ {
        (0..self.len()).map(move |i| ScoreValue {
            value: self.values[i],
            time: self.times[i],
            step_index: self.steps[i],
            sequence_id: self.sequences[i],
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum VolumeScope {
    AllLevels,
    BestLevel,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum EventClass {
    /// New limit orders (type 1).
    Limit,
    /// Partial cancels and deletes (types 2, 3).
    Cancel,
}

impl EventClass {
    fn matches(self, event: EventType) -> bool {
        match self {
            EventClass::Limit => event == EventType::NewLimit,
            EventClass::Cancel => event.is_cancel(),
        }
    }
}

/// Direction of the next message's mid-price change.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum MidMove {
    Up,
    Static,
    Down,
}

/// Every available scoring function with its parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum ScoreKind {
    Spread,
    Imbalance,
    InterarrivalTime,
    TimeToCancel,
    BookVolume { side: Side, scope: VolumeScope },
    EventDepth { class: EventClass },
    EventLevel { class: EventClass },
    TradedVolumePerMinute,
    OrderFlowImbalance { window: usize },
    OfiByNextMove { window: usize, direction: MidMove },
    Volatility10ms,
    MeanHourOfDay,
}

/// A named, parameterised score.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScoreSpec {
    pub name: String,
    #[cfg_attr(feature = "serde", serde(flatten))]
    pub kind: ScoreKind,
}

pub const DEFAULT_OFI_WINDOW: usize = 10;

impl ScoreSpec {
    pub fn new(name: impl Into<String>, kind: ScoreKind) -> Self {
        ScoreSpec { name: name.into(), kind }
    }

    /// The unconditional scores of the standard statistics table.
    pub fn default_set() -> Vec<ScoreSpec> {
        use ScoreKind::*;
        let w = DEFAULT_OFI_WINDOW;
        let mut v = alloc::vec![
            ScoreSpec::new("spread", Spread),
            ScoreSpec::new("orderbook_imbalance", Imbalance),
            ScoreSpec::new("log_inter_arrival_time", InterarrivalTime),
            ScoreSpec::new("log_time_to_cancel", TimeToCancel),
        ];
        for (name, side, scope) in [
            ("ask_volume", Side::Ask, VolumeScope::AllLevels),
            ("bid_volume", Side::Bid, VolumeScope::AllLevels),
            ("ask_volume_touch", Side::Ask, VolumeScope::BestLevel),
            ("bid_volume_touch", Side::Bid, VolumeScope::BestLevel),
        ] {
            v.push(ScoreSpec::new(name, BookVolume { side, scope }));
        }
        v.extend([
            ScoreSpec::new("limit_depth", EventDepth { class: EventClass::Limit }),
            ScoreSpec::new("cancel_depth", EventDepth { class: EventClass::Cancel }),
            ScoreSpec::new("limit_level", EventLevel { class: EventClass::Limit }),
            ScoreSpec::new("cancel_level", EventLevel { class: EventClass::Cancel }),
            ScoreSpec::new("volume_per_minute", TradedVolumePerMinute),
            ScoreSpec::new("ofi", OrderFlowImbalance { window: w }),
            ScoreSpec::new("ofi_up", OfiByNextMove { window: w, direction: MidMove::Up }),
            ScoreSpec::new("ofi_stay", OfiByNextMove { window: w, direction: MidMove::Static }),
            ScoreSpec::new("ofi_down", OfiByNextMove { window: w, direction: MidMove::Down }),
        ]);
        v
    }

    /// Scores one sequence (sequence number 0).
    pub fn evaluate(&self, seq: &SequencePair, ctx: &ScoreContext) -> ScoreSeries {
        let mut out = match self.kind {
            ScoreKind::Spread => spread(seq, ctx),
            ScoreKind::Imbalance => imbalance(seq),
            ScoreKind::InterarrivalTime => interarrival_time(seq),
            ScoreKind::TimeToCancel => time_to_cancel(seq),
            ScoreKind::BookVolume { side, scope } => book_volume(seq, side, scope),
            ScoreKind::EventDepth { class } => event_depth(seq, class, ctx),
            ScoreKind::EventLevel { class } => event_level(seq, class, ctx),
            ScoreKind::TradedVolumePerMinute => traded_volume_per_minute(seq),
            ScoreKind::OrderFlowImbalance { window } => order_flow_imbalance(seq, window),
            ScoreKind::OfiByNextMove { window, direction } => {
                let [up, stay, down] = ofi_by_next_move(seq, window);
                match direction {
                    MidMove::Up => up,
                    MidMove::Static => stay,
                    MidMove::Down => down,
                }
            }
            ScoreKind::Volatility10ms => volatility_10ms(seq),
            ScoreKind::MeanHourOfDay => mean_hour_of_day(seq),
        };
        out.name = self.name.clone();
        out
    }

    /// Scores every sequence, numbering them by position.
    pub fn evaluate_dataset(&self, seqs: &[SequencePair], ctx: &ScoreContext) -> ScoreSeries {
        let mut all = ScoreSeries::new(self.name.clone(), granularity_of(self.kind));
        for (i, seq) in seqs.iter().enumerate() {
            all.append(self.evaluate(seq, ctx), i as u32);
        }
        all
    }
}

pub fn granularity_of(kind: ScoreKind) -> Granularity {
    match kind {
        ScoreKind::TradedVolumePerMinute => Granularity::PerBucket,
        ScoreKind::Volatility10ms => Granularity::PerSequence,
        _ => Granularity::PerMessage,
    }
}

fn series(name: &str, granularity: Granularity) -> ScoreSeries {
    ScoreSeries::new(name.to_string(), granularity)
}

/// Best ask minus best bid, in ticks.
pub fn spread(seq: &SequencePair, ctx: &ScoreContext) -> ScoreSeries {
    let mut out = series("spread", Granularity::PerMessage);
    for (i, book) in seq.books.iter().enumerate() {
        if let (Some(a), Some(b)) = (book.best_ask(), book.best_bid()) {
            out.push(
                (a.price - b.price) as f64 / ctx.tick_size as f64,
                seq.messages[i].time,
                seq.step_index[i],
            );
        }
    }
    out
}

/// `(bid size - ask size) / (bid size + ask size)` at the touch.
pub fn imbalance(seq: &SequencePair) -> ScoreSeries {
    let mut out = series("orderbook_imbalance", Granularity::PerMessage);
    for (i, book) in seq.books.iter().enumerate() {
        let b = book.best_bid().map_or(0, |l| l.size) as f64;
        let a = book.best_ask().map_or(0, |l| l.size) as f64;
        if a + b > 0.0 {
            out.push((b - a) / (b + a), seq.messages[i].time, seq.step_index[i]);
        }
    }
    out
}

const MIN_DT_NS: i64 = 1;

fn log10_secs(dt_ns: i64) -> f64 {
    math::log10(dt_ns.max(MIN_DT_NS) as f64 * 1e-9)
}

/// log10 of the time between successive messages, clamped at 1 ns.
pub fn interarrival_time(seq: &SequencePair) -> ScoreSeries {
    let mut out = series("log_inter_arrival_time", Granularity::PerMessage);
    for i in 1..seq.messages.len() {
        let dt = seq.messages[i].time.0 - seq.messages[i - 1].time.0;
        out.push(log10_secs(dt), seq.messages[i].time, seq.step_index[i]);
    }
    out
}

/// log10 of the time from submission to the first (partial) cancellation.
pub fn time_to_cancel(seq: &SequencePair) -> ScoreSeries {
    let mut out = series("log_time_to_cancel", Granularity::PerMessage);
    let mut submitted: BTreeMap<i64, Nanos> = BTreeMap::new();
    for (i, m) in seq.messages.iter().enumerate() {
        match m.event {
            EventType::NewLimit => {
                submitted.insert(m.order_id, m.time);
            }
            EventType::PartialCancel | EventType::Delete => {
                if let Some(t0) = submitted.remove(&m.order_id) {
                    out.push(log10_secs(m.time.0 - t0.0), m.time, seq.step_index[i]);
                }
            }
            _ => {}
        }
    }
    out
}

/// Visible volume on one side, all levels or touch only.
pub fn book_volume(seq: &SequencePair, side: Side, scope: VolumeScope) -> ScoreSeries {
    let mut out = series("book_volume", Granularity::PerMessage);
    for (i, book) in seq.books.iter().enumerate() {
        let v = match scope {
            VolumeScope::AllLevels => book.total_volume(side),
            VolumeScope::BestLevel => book.best(side).map_or(0, |l| l.size),
        };
        out.push(v as f64, seq.messages[i].time, seq.step_index[i]);
    }
    out
}

/// Distance of limit orders or cancellations from the pre-event mid, in ticks.
pub fn event_depth(seq: &SequencePair, class: EventClass, ctx: &ScoreContext) -> ScoreSeries {
    let mut out = series("event_depth", Granularity::PerMessage);
    for i in 1..seq.messages.len() {
        let m = &seq.messages[i];
        if !class.matches(m.event) {
            continue;
        }
        if let Some(mid) = seq.books[i - 1].mid() {
            out.push((m.price as f64 - mid).abs() / ctx.tick_size as f64, m.time, seq.step_index[i]);
        }
    }
    out
}

/// 1-based level of the event price on its side; `n + 1` when not visible.
/// Limits use the post-event book, cancellations the pre-event book.
pub fn event_level(seq: &SequencePair, class: EventClass, ctx: &ScoreContext) -> ScoreSeries {
    let mut out = series("event_level", Granularity::PerMessage);
    for (i, m) in seq.messages.iter().enumerate() {
        if !class.matches(m.event) {
            continue;
        }
        let book = match class {
            EventClass::Limit => &seq.books[i],
            EventClass::Cancel if i > 0 => &seq.books[i - 1],
            EventClass::Cancel => continue,
        };
        let n = if book.n_levels() > 0 { book.n_levels() } else { ctx.n_levels };
        let level = book.level_of(m.side, m.price).unwrap_or(n + 1);
        out.push(level as f64, m.time, seq.step_index[i]);
    }
    out
}

/// Executed volume (types 4 and 5) per one-second bucket, times 60.
pub fn traded_volume_per_minute(seq: &SequencePair) -> ScoreSeries {
    let mut out = series("volume_per_minute", Granularity::PerBucket);
    let (Some(first), Some(last)) = (seq.messages.first(), seq.messages.last()) else {
        return out;
    };
    let start = first.time.whole_secs();
    let end = last.time.whole_secs();
    let n_buckets = (end - start + 1).max(0) as usize;
    let mut volume = alloc::vec![0u64; n_buckets];
    let mut step = alloc::vec![0u32; n_buckets];
    for (i, m) in seq.messages.iter().enumerate() {
        let b = (m.time.whole_secs() - start).clamp(0, n_buckets as i64 - 1) as usize;
        if matches!(m.event, EventType::ExecuteVisible | EventType::ExecuteHidden) {
            volume[b] += m.size;
        }
        step[b] = seq.step_index[i];
    }
    let mut carried = seq.step_index[0];
    for b in 0..n_buckets {
        if step[b] != 0 {
            carried = step[b];
        }
        out.push(volume[b] as f64 * 60.0, Nanos::from_secs(start + b as i64), carried);
    }
    out
}

/// Best-level order flow increment between two consecutive snapshots.
/// Absent bids count as price -inf, absent asks as +inf, both with size 0.
pub fn ofi_increment(prev: &BookSnapshot, cur: &BookSnapshot) -> f64 {
    let bid = |b: &BookSnapshot| b.best_bid().map_or((i64::MIN, 0), |l| (l.price, l.size));
    let ask = |b: &BookSnapshot| b.best_ask().map_or((i64::MAX, 0), |l| (l.price, l.size));
    let ((pb0, qb0), (pb1, qb1)) = (bid(prev), bid(cur));
    let ((pa0, qa0), (pa1, qa1)) = (ask(prev), ask(cur));
    let mut e = 0.0;
    if pb1 >= pb0 {
        e += qb1 as f64;
    }
    if pb1 <= pb0 {
        e -= qb0 as f64;
    }
    if pa1 <= pa0 {
        e -= qa1 as f64;
    }
    if pa1 >= pa0 {
        e += qa0 as f64;
    }
    e
}

/// Rolling sums of OFI increments over the trailing `window` messages;
/// entry `n` is the value at message `n` (`None` until the window fills).
fn rolling_ofi(seq: &SequencePair, window: usize) -> Vec<Option<f64>> {
    let n = seq.books.len();
    let mut out = alloc::vec![None; n];
    if window == 0 || n <= window {
        return out;
    }
    let inc: Vec<f64> =
        (1..n).map(|i| ofi_increment(&seq.books[i - 1], &seq.books[i])).collect();
    // inc[i - 1] is the increment at message i
    let mut acc: f64 = inc[..window].iter().sum();
    out[window] = Some(acc);
    for i in window + 1..n {
        acc += inc[i - 1] - inc[i - 1 - window];
        out[i] = Some(acc);
    }
    out
}

/// Order flow imbalance summed over a rolling window of messages.
pub fn order_flow_imbalance(seq: &SequencePair, window: usize) -> ScoreSeries {
    let mut out = series("ofi", Granularity::PerMessage);
    for (i, v) in rolling_ofi(seq, window).into_iter().enumerate() {
        if let Some(v) = v {
            out.push(v, seq.messages[i].time, seq.step_index[i]);
        }
    }
    out
}

/// OFI split by the sign of the next message's mid change: `[up, static, down]`.
pub fn ofi_by_next_move(seq: &SequencePair, window: usize) -> [ScoreSeries; 3] {
    let mut up = series("ofi_up", Granularity::PerMessage);
    let mut stay = series("ofi_stay", Granularity::PerMessage);
    let mut down = series("ofi_down", Granularity::PerMessage);
    let ofi = rolling_ofi(seq, window);
    for i in 0..ofi.len().saturating_sub(1) {
        let Some(v) = ofi[i] else { continue };
        let (Some(m0), Some(m1)) = (seq.books[i].mid_x2(), seq.books[i + 1].mid_x2()) else {
            continue;
        };
        let target = match m1.cmp(&m0) {
            core::cmp::Ordering::Greater => &mut up,
            core::cmp::Ordering::Equal => &mut stay,
            core::cmp::Ordering::Less => &mut down,
        };
        target.push(v, seq.messages[i].time, seq.step_index[i]);
    }
    [up, stay, down]
}

const VOL_GRID_NS: i64 = 10_000_000;

/// Standard deviation of mid-price log returns on a 10ms grid, one value
/// per sequence.
pub fn volatility_10ms(seq: &SequencePair) -> ScoreSeries {
    let mut out = series("volatility_10ms", Granularity::PerSequence);
    let (Some(first), Some(last)) = (seq.messages.first(), seq.messages.last()) else {
        return out;
    };
    let t0 = first.time.0;
    let n_points = ((last.time.0 - t0) / VOL_GRID_NS + 1) as usize;
    if n_points < 2 {
        return out;
    }
    let mut mids = Vec::with_capacity(n_points);
    let mut cursor = 0usize;
    let mut current: Option<f64> = None;
    for k in 0..n_points {
        let g = t0 + k as i64 * VOL_GRID_NS;
        while cursor < seq.messages.len() && seq.messages[cursor].time.0 <= g {
            if let Some(m) = seq.books[cursor].mid() {
                current = Some(m);
            }
            cursor += 1;
        }
        if let Some(m) = current {
            mids.push(m);
        }
    }
    if mids.len() < 2 {
        return out;
    }
    let returns: Vec<f64> = mids.windows(2).map(|w| math::ln(w[1] / w[0])).collect();
    out.push(crate::stats::std_pop(&returns), first.time, seq.step_index[0]);
    out
}

/// Message time in hours after midnight.
pub fn mean_hour_of_day(seq: &SequencePair) -> ScoreSeries {
    let mut out = series("hour_of_day", Granularity::PerMessage);
    for (i, m) in seq.messages.iter().enumerate() {
        out.push(m.time.as_secs_f64() / 3600.0, m.time, seq.step_index[i]);
    }
    out
}

/// Pairs `x` values with conditioning `y` values: per-sequence `y` is
/// broadcast over the sequence, otherwise values join on (sequence, step).
pub fn align(x: &ScoreSeries, y: &ScoreSeries) -> (Vec<f64>, Vec<f64>) {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    match y.granularity {
        Granularity::PerSequence => {
            let by_seq: BTreeMap<u32, f64> =
                y.sequences.iter().copied().zip(y.values.iter().copied()).collect();
            for (v, s) in x.values.iter().zip(&x.sequences) {
                if let Some(c) = by_seq.get(s) {
                    xs.push(*v);
                    ys.push(*c);
                }
            }
        }
        _ => {
            let mut by_key: BTreeMap<(u32, u32), f64> = BTreeMap::new();
            for i in 0..y.len() {
                by_key.entry((y.sequences[i], y.steps[i])).or_insert(y.values[i]);
            }
            for i in 0..x.len() {
                if let Some(c) = by_key.get(&(x.sequences[i], x.steps[i])) {
                    xs.push(x.values[i]);
                    ys.push(*c);
                }
            }
        }
    }
    (xs, ys)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{Level, Message, Role};
    use alloc::vec;

    fn book(ask: Option<(Price, u64)>, bid: Option<(Price, u64)>) -> BookSnapshot {
        let mut b = BookSnapshot::empty(10);
        b.asks[0] = ask.map(|(p, s)| Level::new(p, s));
        b.bids[0] = bid.map(|(p, s)| Level::new(p, s));
        b
    }

    fn seq_of(entries: Vec<(Message, BookSnapshot)>) -> SequencePair {
        let (m, b) = entries.into_iter().unzip();
        SequencePair::new("t", Role::Real, m, b).unwrap()
    }

    fn at(secs: f64, event: EventType, id: i64, size: u64, price: Price, side: Side) -> Message {
        Message::new(Nanos((secs * 1e9).round() as i64), event, id, size, price, side)
    }

    #[test]
    fn spread_in_ticks() {
        let ctx = ScoreContext::default();
        let s = seq_of(vec![
            (at(1.0, EventType::NewLimit, 1, 1, 10100, Side::Ask), book(Some((10100, 1)), Some((10000, 1)))),
            (at(1.0, EventType::NewLimit, 2, 1, 10300, Side::Ask), book(Some((10300, 1)), Some((10000, 1)))),
            (at(1.0, EventType::Delete, 2, 1, 10300, Side::Ask), book(None, Some((10000, 1)))),
        ]);
        assert_eq!(spread(&s, &ctx).values, [1.0, 3.0]);
    }

    #[test]
    fn imbalance_cases() {
        let m = at(1.0, EventType::NewLimit, 1, 1, 10000, Side::Bid);
        let s = seq_of(vec![
            (m, book(Some((10100, 100)), Some((10000, 100)))),
            (m, book(Some((10100, 100)), Some((10000, 300)))),
            (m, book(Some((10100, 50)), None)),
            (m, book(None, None)),
        ]);
        assert_eq!(imbalance(&s).values, [0.0, 0.5, -1.0]);
    }

    #[test]
    fn interarrival_logs_and_clamps() {
        let b = book(None, None);
        let s = seq_of(vec![
            (at(1.0, EventType::NewLimit, 1, 1, 1, Side::Bid), b.clone()),
            (at(1.1, EventType::NewLimit, 2, 1, 1, Side::Bid), b.clone()),
            (at(1.1, EventType::NewLimit, 3, 1, 1, Side::Bid), b),
        ]);
        let v = interarrival_time(&s).values;
        assert_eq!(v.len(), 2);
        assert!((v[0] + 1.0).abs() < 1e-9);
        assert!((v[1] + 9.0).abs() < 1e-12);
    }

    #[test]
    fn time_to_cancel_first_cancel_wins() {
        let b = book(None, None);
        let s = seq_of(vec![
            (at(1.0, EventType::NewLimit, 1, 10, 100, Side::Bid), b.clone()),
            (at(1.0, EventType::NewLimit, 2, 10, 100, Side::Bid), b.clone()),
            (at(1.0, EventType::NewLimit, 3, 10, 100, Side::Bid), b.clone()),
            (at(1.5, EventType::PartialCancel, 1, 5, 100, Side::Bid), b.clone()),
            (at(2.0, EventType::Delete, 2, 10, 100, Side::Bid), b.clone()),
            (at(2.5, EventType::ExecuteVisible, 3, 10, 100, Side::Bid), b.clone()),
            (at(3.0, EventType::Delete, 1, 5, 100, Side::Bid), b.clone()),
            (at(3.0, EventType::Delete, 42, 5, 100, Side::Bid), b),
        ]);
        let v = time_to_cancel(&s).values;
        assert_eq!(v.len(), 2);
        assert!((v[0] - libm::log10(0.5)).abs() < 1e-12);
        assert!(v[1].abs() < 1e-12);
    }

    #[test]
    fn volumes() {
        let mut b = BookSnapshot::empty(3);
        b.bids = vec![Some(Level::new(100, 5)), Some(Level::new(99, 7)), None];
        let s = seq_of(vec![(at(1.0, EventType::NewLimit, 1, 5, 100, Side::Bid), b)]);
        assert_eq!(book_volume(&s, Side::Bid, VolumeScope::AllLevels).values, [12.0]);
        assert_eq!(book_volume(&s, Side::Bid, VolumeScope::BestLevel).values, [5.0]);
        assert_eq!(book_volume(&s, Side::Ask, VolumeScope::AllLevels).values, [0.0]);
    }

    #[test]
    fn depth_uses_pre_event_mid() {
        let ctx = ScoreContext::default();
        let pre = book(Some((10100, 1)), Some((10000, 1)));
        let s = seq_of(vec![
            (at(1.0, EventType::NewLimit, 1, 1, 10100, Side::Ask), pre.clone()),
            (at(1.0, EventType::NewLimit, 2, 1, 10000, Side::Bid), pre.clone()),
            (at(1.0, EventType::ExecuteVisible, 2, 1, 10000, Side::Bid), pre.clone()),
            (at(1.0, EventType::NewLimit, 3, 1, 10050, Side::Bid), pre),
        ]);
        assert_eq!(event_depth(&s, EventClass::Limit, &ctx).values, [0.5, 0.0]);
        assert!(event_depth(&s, EventClass::Cancel, &ctx).is_empty());
    }

    #[test]
    fn levels_with_overflow_bucket() {
        let ctx = ScoreContext::default();
        let mut deep = BookSnapshot::empty(10);
        for k in 0..10 {
            deep.asks[k] = Some(Level::new(10100 + 100 * k as i64, 1));
            deep.bids[k] = Some(Level::new(10000 - 100 * k as i64, 1));
        }
        let mut improved = deep.clone();
        improved.bids.insert(0, Some(Level::new(10050, 3)));
        improved.bids.truncate(10);
        let s = seq_of(vec![
            (at(1.0, EventType::NewLimit, 1, 1, 10100, Side::Ask), deep.clone()),
            (at(1.0, EventType::NewLimit, 2, 3, 10050, Side::Bid), improved.clone()),
            (at(1.0, EventType::Delete, 7, 1, 10300, Side::Ask), improved.clone()),
            (at(1.0, EventType::NewLimit, 9, 1, 10000 - 100 * 24, Side::Bid), improved),
        ]);
        assert_eq!(event_level(&s, EventClass::Limit, &ctx).values, [1.0, 1.0, 11.0]);
        assert_eq!(event_level(&s, EventClass::Cancel, &ctx).values, [3.0]);
    }

    #[test]
    fn traded_volume_buckets() {
        let b = book(None, None);
        let s = seq_of(vec![
            (at(10.1, EventType::ExecuteVisible, 1, 3, 1, Side::Bid), b.clone()),
            (at(10.7, EventType::ExecuteHidden, 0, 4, 1, Side::Bid), b.clone()),
            (at(12.2, EventType::NewLimit, 2, 9, 1, Side::Bid), b),
        ]);
        assert_eq!(traded_volume_per_minute(&s).values, [420.0, 0.0, 0.0]);
        let single = seq_of(vec![(at(5.5, EventType::ExecuteVisible, 1, 10, 1, Side::Ask), book(None, None))]);
        assert_eq!(traded_volume_per_minute(&single).values, [600.0]);
    }

    #[test]
    fn ofi_single_increment_and_static() {
        let m = at(1.0, EventType::NewLimit, 1, 10, 10000, Side::Bid);
        let s = seq_of(vec![
            (m, book(Some((10100, 5)), Some((10000, 20)))),
            (m, book(Some((10100, 5)), Some((10000, 30)))),
            (m, book(Some((10100, 5)), Some((10000, 30)))),
        ]);
        assert_eq!(order_flow_imbalance(&s, 1).values, [10.0, 0.0]);
        assert_eq!(order_flow_imbalance(&s, 5).values.len(), 0);
    }

    #[test]
    fn ofi_routed_by_next_mid_move() {
        let m = at(1.0, EventType::NewLimit, 1, 10, 10000, Side::Bid);
        let s = seq_of(vec![
            (m, book(Some((10100, 5)), Some((10000, 20)))),
            (m, book(Some((10100, 5)), Some((10000, 30)))),
            (m, book(Some((10100, 5)), Some((10050, 30)))),
            (m, book(Some((10100, 5)), Some((10050, 30)))),
            (m, book(Some((10100, 5)), Some((10000, 30)))),
        ]);
        let [up, stay, down] = ofi_by_next_move(&s, 1);
        assert_eq!(up.values.len() + stay.values.len() + down.values.len(), 3);
        assert_eq!(up.values.len(), 1);
        assert_eq!(stay.values.len(), 1);
        assert_eq!(down.values.len(), 1);
    }

    #[test]
    fn hour_of_day() {
        let b = book(None, None);
        let s = seq_of(vec![
            (at(34200.0, EventType::NewLimit, 1, 1, 1, Side::Bid), b.clone()),
            (at(57600.0, EventType::NewLimit, 2, 1, 1, Side::Bid), b),
        ]);
        assert_eq!(mean_hour_of_day(&s).values, [9.5, 16.0]);
    }

    #[test]
    fn volatility_constant_and_alternating() {
        let flat = book(Some((10100, 1)), Some((10000, 1)));
        let up = book(Some((10200, 1)), Some((10100, 1)));
        let mut entries = Vec::new();
        for k in 0..50 {
            let b = if k % 2 == 0 { flat.clone() } else { up.clone() };
            entries.push((at(1.0 + 0.01 * k as f64, EventType::NewLimit, k, 1, 1, Side::Bid), b));
        }
        let alt = seq_of(entries.clone());
        let v = volatility_10ms(&alt).values;
        assert_eq!(v.len(), 1);
        assert!(v[0] > 0.0);
        let constant = seq_of(entries.into_iter().map(|(m, _)| (m, flat.clone())).collect());
        assert_eq!(volatility_10ms(&constant).values, [0.0]);
    }

    #[test]
    fn align_broadcasts_sequence_values() {
        let mut x = ScoreSeries::new("x", Granularity::PerMessage);
        x.push(1.0, Nanos(0), 1);
        x.push(2.0, Nanos(0), 2);
        let mut y = ScoreSeries::new("y", Granularity::PerSequence);
        y.push(0.5, Nanos(0), 1);
        assert_eq!(align(&x, &y), (vec![1.0, 2.0], vec![0.5, 0.5]));
        let mut yp = ScoreSeries::new("y", Granularity::PerMessage);
        yp.push(7.0, Nanos(0), 2);
        assert_eq!(align(&x, &yp), (vec![2.0], vec![7.0]));
    }
}
